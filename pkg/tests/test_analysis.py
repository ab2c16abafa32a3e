import random

import pytest

from issforge import ast as A
from issforge.analysis import may_branch, read_overrides
from issforge.errors import DescriptionError
from issforge.pcparse import parse_expression as P
from issforge.sim.decoder import decode
from issforge.simplify import NotStatic, evaluate_static, fold, simplify

import checks

EXPECTED = {
    "LDR_reg_pre": "d == 15",
    "LDR_imm_off": "d == 15",
    "LDRB_reg_pre": "0",
    "STR_imm_pre": "0",
    "LDM_IA": "reglist[15] == 1",
    "LDM3_DB": "reglist[15] == 1",
    "STM_IA": "0",
    "SRS_IA": "0",
    "RFE_IA": "1",
    "B": "1",
    "ADC_imm": "d == 15",
    "MOV_lsl_imm": "d == 15",
    "CMP_imm": "0",
    "LDRBT": "0",
    "UXTH": "0",
    "NOP": "0",
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_condition(tc, name):
    assert A.format_expr(tc.decoder.by_name[name].may_branch) == EXPECTED[name]


def test_ldr_reg_pre_is_structural(flats):
    assert flats["LDR_reg_pre"].may_branch == A.BinOp("==", A.Var("d"), A.Num(15))


def test_variants_inherit_conditions(flats):
    assert flats["ADC_imm__S0_AL"].may_branch == flats["ADC_imm"].may_branch


def test_overrides(tc):
    assert tc.reports["B"].override == "always"
    assert tc.reports["HLT"].override == "always"
    rep = may_branch(tc.decoder.by_name["STM_IA"], {"STM_IA": "W == 1"})
    assert rep.condition == P("W == 1")
    assert may_branch(tc.decoder.by_name["B"], {"B": "never"}).condition == A.FALSE


def test_override_file_syntax():
    assert read_overrides("// c\nB always\nX  d == 15 // pc\n") == {"B": "always", "X": "d == 15"}
    with pytest.raises(DescriptionError):
        read_overrides("JUSTONE\n")


def test_records_for_ldm(tc):
    recs = {target: A.format_expr(c) for target, c in tc.reports["LDM_IA"].records}
    assert recs == {"PC": "ConditionPassed(cond) and reglist[15] == 1",
                    "Rn": "ConditionPassed(cond) and W == 1 and n == 15"}


# -- simplifier ------------------------------------------------------------------------

def test_contradiction_and_absorption():
    assert simplify(P("d == 15 and d != 15")) == A.FALSE
    assert simplify(P("(a == 1 and b == 2) or a == 1")) == P("a == 1")


def test_constraints_as_facts(flats):
    assert simplify(P("d == 15"), flats["LDRB_imm_off"].constraints) == A.FALSE


def test_fold_and_static_eval():
    assert fold(P("3 + 4 * 2")) == A.Num(11)
    assert evaluate_static(P("immed_8 ROR (rotate_imm * 2)"), {"immed_8": 0x53, "rotate_imm": 15}) == 0x14C
    with pytest.raises(NotStatic):
        evaluate_static(P("Rn + 1"), {"n": 1})


# -- soundness over every instruction ------------------------------------------------------

def test_no_false_negatives_all_flats(tc):
    names = [f.name for f in tc.flats]
    missed, writes, total = checks.maybranch_soundness(tc, names, 20_000, seed=11, pool=128)
    assert missed == 0
    assert writes > 100


def test_emitted_terminator_flag_agrees(tc):
    rng = random.Random(3)
    iss = tc.iss
    pool = [w for fi in tc.flats for w, _ in checks.enumerate_valid(fi, 32, 1)]
    for w in rng.sample(pool, 3000):
        a, b = decode(tc.decoder, w), iss.decode(w)
        assert a.id == b.id and a.is_terminator == b.is_terminator, hex(w)
