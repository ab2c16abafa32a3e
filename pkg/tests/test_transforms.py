from collections import Counter

import pytest

from issforge import ast as A
from issforge.errors import TransformError
from issforge.ingest import load_description, parse_encoding_row
from issforge.pcparse import parse_expression, parse_statements
from issforge.toolchain import PACKAGED, Toolchain
from issforge.transforms import (PASS_NAMES, TransformConfig, apply_mode_patch, merge_encodings,
                                 read_profile, rewrite_symbolic_calls, run_pipeline, write_profile)

V, N = A.Var, A.Num


def _assigns_flag(fi) -> bool:
    return A.contains(fi.ast, lambda n: isinstance(n, A.Assign) and isinstance(n.lhs, A.FlagRef))


# -- symbolic rewrite -------------------------------------------------------------

def test_symbolic_rewrite_picks_operator_and_arity():
    blk = parse_statements("C Flag = CarryFrom(Rn + shifter_operand + C Flag)\n"
                           "V Flag = OverflowFrom(Rn - shifter_operand)\n")
    out = rewrite_symbolic_calls(blk)
    assert out.body[0].rhs.name == "CarryFromAdd3"
    assert len(out.body[0].rhs.args) == 3
    assert out.body[1].rhs.name == "OverflowFromSub2"


def test_symbolic_rewrite_rejects_unknown_operator():
    with pytest.raises(TransformError):
        rewrite_symbolic_calls(parse_statements("x = CarryFrom(a * b)\n"))


def test_no_symbolic_calls_survive(tc):
    names = {"CarryFrom", "OverflowFrom", "BorrowFrom", "SignedSat"}
    for fi in tc.flats:
        assert not A.contains(fi.ast, lambda n: isinstance(n, A.Fun) and n.name in names), fi.name


# -- patches ----------------------------------------------------------------------

def test_srs_patch_applied(flats):
    srs = flats["SRS_IA"]
    assert not A.contains(srs.ast, lambda n: n == A.Fun("NbOfSetBitsIn", (V("reglist"),)))
    assert A.contains(srs.ast, lambda n: isinstance(n, A.Reg) and n.mode == V("mode"))


def test_stale_patch_is_reported():
    desc = load_description(PACKAGED)
    srs = desc.instruction("SRS")
    stale = dict(desc.patches, srs=desc.patches["srs"] + [(V("no_such_local"), N(0))])
    with pytest.raises(TransformError, match="stale patch srs"):
        apply_mode_patch(srs, desc.mode("IA").ast, stale)


# -- flattening and merged encodings ------------------------------------------------

def test_merge_golden(flats):
    fi = flats["ADC_lsl_imm"]
    assert fi.encoding.text() == ("31..28 cond | 27..26 00 | 25 0 | 24..21 0101 | 20 S | 19..16 Rn | "
                                  "15..12 Rd | 11..7 shift_imm | 6..4 000 | 3..0 Rm")
    assert fi.syntax.text() == "ADC{<cond>}{S} <Rd>,<Rn>,<Rm>,LSL #<shift_imm>"
    assert fi.constants == {"I": 0, "opcode": 5}
    assert [(p.name, p.width) for p in fi.params] == [
        ("cond", 4), ("S", 1), ("n", 4), ("d", 4), ("shift_imm", 5), ("m", 4)]
    assert [c.text() for c in fi.constraints] == ["ADC: cond != 15"]


def test_merge_conflict():
    a = parse_encoding_row("31..28 cond | 27..26 00 | 25 1 | 24..0 x")
    b = parse_encoding_row("31..26 cond2 | 25 0 | 24..0 y")
    with pytest.raises(TransformError):
        merge_encodings(a, b)


def test_flat_counts(tc):
    per_instr = Counter(f.instr for f in tc.generic)
    assert len(tc.generic) == 63
    assert len(tc.flats) == 179
    for name in ("ADC", "ADD", "SUB", "AND", "EOR", "ORR", "MOV", "CMP"):
        assert per_instr[name] == 3
    for name in ("LDR", "STR", "LDRB", "LDM", "STM", "LDM3", "SRS", "RFE"):
        assert per_instr[name] == 4
    for name in ("LDRBT", "B", "BL", "UXTAH", "UXTH", "NOP", "HLT"):
        assert per_instr[name] == 1


def test_no_unbound_names_after_flatten(tc):
    from issforge.ir import free_vars
    for fi in tc.flats:
        fv = free_vars(fi.ast, {p.name for p in fi.fields} | {n for n, _ in fi.computed})
        assert not fv["unbound"], (fi.name, fv["unbound"])


# -- write-back ---------------------------------------------------------------------

def _last_memory_index(fi):
    return max(i for i, s in enumerate(fi.ast.body)
               if A.contains(s, lambda n: isinstance(n, A.Memory)))


def test_writeback_after_last_access(flats):
    for name in ("LDR_imm_pre", "STR_reg_pre", "LDRB_imm_post", "LDM_IA", "STM_DB"):
        body = flats[name].ast.body
        wb = [i for i, s in enumerate(body) if A.contains(
            s, lambda n: isinstance(n, A.Assign) and n.lhs == A.Reg(V("n")))]
        assert wb == [len(body) - 1] and wb[0] > _last_memory_index(flats[name]), name


def test_capture_form_when_mode_may_change(flats):
    for name in ("LDM3_IA", "RFE_IB"):
        text = A.format_block(flats[name].ast)
        assert "wb_mode = CPSR[4:0]" in text, name
        assert "wb_pending" in text, name


# -- pre-computation ----------------------------------------------------------------

def test_precompute_hoists_reglist_count(flats):
    fi = flats["LDM_IA"]
    assert ("nb_reg_x4", parse_expression("NbOfSetBitsIn(reglist) * 4")) in fi.computed
    assert not A.contains(fi.ast, lambda n: isinstance(n, A.Fun) and n.name == "NbOfSetBitsIn")


def test_precompute_values(flats):
    fi = flats["LDM_IA"]
    word = fi.encoding.encode({"cond": 14, "W": 0, "n": 0, "reglist": 0x000B})
    assert fi.decode_fields(word)["nb_reg_x4"] == 12
    imm = flats["MOV_imm"]
    v = imm.decode_fields(imm.encoding.encode({"cond": 14, "S": 0, "d": 0, "rotate_imm": 15,
                                                "immed_8": 0x53}))
    assert v["imm_value"] == 0x14C


def test_precompute_rejects_state_pattern():
    with pytest.raises(TransformError, match="not static"):
        TransformConfig(precompute_patterns=[("bad", parse_expression("Rn + 4"))])


# -- specialization --------------------------------------------------------------------

def test_adc_variants(tc):
    names = [f.name for f in tc.flats if f.generic == "ADC_lsl_imm"]
    assert names == ["ADC_lsl_imm", "ADC_lsl_imm__S0_AL", "ADC_lsl_imm__S1_AL",
                     "ADC_lsl_imm__S0", "ADC_lsl_imm__S1"]


def test_s0_variant_has_no_flag_writes(flats):
    assert _assigns_flag(flats["ADC_lsl_imm"])
    assert _assigns_flag(flats["ADC_lsl_imm__S1"])
    assert not _assigns_flag(flats["ADC_lsl_imm__S0"])
    assert not _assigns_flag(flats["ADC_lsl_imm__S0_AL"])


def test_al_variant_drops_condition(flats):
    fi = flats["ADC_lsl_imm__S0_AL"]
    assert not A.contains(fi.ast, lambda n: isinstance(n, A.Fun) and n.name == "ConditionPassed")
    assert fi.predicate == {"S": 0, "cond": 14}


def test_no_specialize(tc_nospec):
    assert len(tc_nospec.flats) == 63
    assert not any(f.is_variant for f in tc_nospec.flats)


def test_profile_threshold_limits_variants(tmp_path):
    prof = tmp_path / "p.tsv"
    write_profile(prof, {"ADC_lsl_imm__S0_AL": 700, "ADC_lsl_imm": 400, "B": 5})
    counts = read_profile(prof)
    assert counts == {"ADC_lsl_imm": 400, "ADC_lsl_imm__S0_AL": 700, "B": 5}
    tc = Toolchain.load(profile=counts)
    special = {f.generic for f in tc.flats if f.is_variant}
    assert special == {"ADC_lsl_imm"}


def test_profile_malformed(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("ADC 12\n")
    with pytest.raises(TransformError, match="bad.tsv:1"):
        read_profile(p)


def test_dump_stages():
    res = run_pipeline(load_description(PACKAGED), TransformConfig(), dump=True)
    assert list(res.stages) == list(PASS_NAMES)
    assert "Mode IA patched for SRS" in res.stages["2-patch"]
    assert "ADC_lsl_imm__S0_AL" in res.stages["6-specialize"]
    assert "ADC_lsl_imm__S0_AL" not in res.stages["5-precompute"]

