from dataclasses import replace

import pytest

from issforge import ast as A
from issforge.errors import DescriptionError, LinkError
from issforge.ingest import (SourceSet, link, load_description, parse_constraints,
                             parse_encoding_row, parse_syntax_template)
from issforge.ir import NotEqualValue, NotIn, ParamsDiffer, RegNotInList
from issforge.pcparse import parse_expression, parse_pseudocode, parse_statements
from issforge.toolchain import PACKAGED

V, N = A.Var, A.Num


# -- expressions ---------------------------------------------------------------

def test_register_test_phrase():
    assert parse_expression("Rd is R15") == A.BinOp("==", V("d"), N(15))


def test_precedence_shift_binds_looser_than_arithmetic():
    e = parse_expression("immed_8 ROR rotate_imm * 2")
    assert e == A.BinOp("ROR", V("immed_8"), A.BinOp("*", V("rotate_imm"), N(2)))


@pytest.mark.parametrize("text", [
    "a + b * c",
    "(a + b) * c",
    "a - (b - c)",
    "x[31] == 1 and not (y != 2 or z == 3)",
    "NOT Rm AND 0xFF",
    "Rn + (SignExtend(signed_immed_24, 24) << 2)",
    "reglist[i] == 1",
    "Memory[Rn + 4, 4]",
])
def test_format_roundtrip(text):
    e = parse_expression(text)
    assert parse_expression(A.format_expr(e)) == e


def test_flag_and_bitrange():
    assert parse_expression("C Flag") == A.FlagRef("C")
    assert parse_expression("Rm[7:0]") == A.BitRange(A.Reg(V("m")), N(7), N(0))


def test_hex_and_binary_literals():
    assert parse_expression("0x1F") == N(31)
    assert parse_expression("0b101") == N(5)


# -- statements --------------------------------------------------------------------

def test_indentation_defines_blocks():
    blk = parse_statements("if a == 1 then\n    x = 1\n    y = 2\nelse\n    x = 3\nz = x\n")
    assert len(blk.body) == 2
    first = blk.body[0]
    assert isinstance(first, A.If)
    assert len(first.then) == 2 and len(first.orelse) == 1


def test_else_if_chain_nests():
    blk = parse_statements("if a then\n    x = 1\nelse if b then\n    x = 2\nelse\n    x = 3\n")
    outer = blk.body[0]
    assert isinstance(outer.orelse[0], A.If)
    assert outer.orelse[0].orelse == (A.Assign(V("x"), N(3)),)


def test_for_loop():
    blk = parse_statements("for i = 0 to 14\n    if reglist[i] == 1 then\n        R[i] = 0\n")
    loop = blk.body[0]
    assert isinstance(loop, A.For) and loop.var == "i"
    assert loop.lo == N(0) and loop.hi == N(14)


def test_unpredictable_statement():
    assert parse_statements("UNPREDICTABLE\n").body == (A.Unpredictable(),)


def test_error_reports_position():
    with pytest.raises(DescriptionError) as ei:
        parse_statements("x = 1\ny = (2 +\n", unit="U", first_line=10)
    assert ei.value.line == 11
    assert ei.value.unit == "U"


def test_bad_dedent_is_rejected():
    with pytest.raises(DescriptionError):
        parse_statements("if a then\n        x = 1\n    y = 2\n")


def test_units_and_headers():
    units = parse_pseudocode("Mode m1 for fam writeback:\n    address = Rn\n    Rn = Rn + 4\n\n"
                             "Instruction FOO patch p:\n    Rd = Memory[address, 4]\n")
    assert units["m1"].family == "fam" and units["m1"].writeback
    assert units["FOO"].patch == "p"


def test_duplicate_unit():
    with pytest.raises(DescriptionError, match="duplicate"):
        parse_pseudocode("Instruction A:\n    x = 1\nInstruction A:\n    x = 2\n")


# -- encoding / syntax / constraints --------------------------------------------------

def test_encoding_row_fields():
    t = parse_encoding_row("31..28 cond | 27..26 00 | 25 1 | 24..0 rest")
    assert t.mask == 0x0E000000
    assert t.value == 0x02000000
    assert [f.param for f in t.params()] == ["cond", "rest"]


def test_encoding_row_must_cover_32_bits():
    with pytest.raises(DescriptionError):
        parse_encoding_row("31..28 cond | 26..0 rest")


def test_encoding_extract_encode_inverse():
    t = parse_encoding_row("31..28 cond | 27..20 10101010 | 19..16 Rn | 15..0 imm")
    w = t.encode({"cond": 14, "n": 3, "imm": 0xBEEF})
    assert w == 0xEAA3BEEF
    assert t.extract(w) == {"cond": 14, "n": 3, "imm": 0xBEEF}
    assert t.matches(w) and not t.matches(w ^ 0x00100000)


def test_syntax_template_placeholders():
    s = parse_syntax_template("ADC{<cond>}{S} <Rd>,<Rn>,<shifter_operand>")
    assert s.placeholders() == ["cond", "Rd", "Rn", "shifter_operand"]


def test_syntax_unbalanced_brace():
    with pytest.raises(DescriptionError):
        parse_syntax_template("ADD{<cond> <Rd>")


def test_constraint_kinds():
    cs = parse_constraints("A: cond != 15\nA: Rd != Rn\nA: Rn notin {13, 15}\nA: Rn notin reglist\n")
    kinds = [type(c.kind) for c in cs]
    assert kinds == [NotEqualValue, ParamsDiffer, NotIn, RegNotInList]
    assert not cs[3].holds({"n": 2, "reglist": 0b100})
    assert cs[3].holds({"n": 3, "reglist": 0b100})


def test_malformed_constraint():
    with pytest.raises(DescriptionError):
        parse_constraints("A: cond < 15\n")


# -- linking the packaged description ---------------------------------------------

@pytest.fixture(scope="module")
def desc():
    return load_description(PACKAGED)


def test_description_counts(desc):
    assert len(desc.instructions) == 23
    families = {f: len(c) for f, c in desc.families.items()}
    assert families == {"shifter_operand": 3, "addressing_mode": 4, "addressing_mode_4": 4}


def test_adc_unit(desc):
    adc = desc.instruction("ADC")
    assert adc.family == "shifter_operand"
    assert adc.syntax.text() == "ADC{<cond>}{S} <Rd>,<Rn>,<shifter_operand>"
    assert [c.text() for c in adc.constraints] == ["ADC: cond != 15"]


def test_writeback_modes(desc):
    wb = sorted(m.name for m in desc.modes if m.writeback is not None)
    assert wb == ["DA", "DB", "IA", "IB", "imm_post", "imm_pre", "reg_pre"]


def test_dump_mentions_every_unit(desc):
    text = desc.dump()
    for unit in desc.instructions:
        assert unit.name in text


PACKAGED_SOURCES = SourceSet.from_dir(PACKAGED)


def test_missing_encoding_is_a_link_error():
    enc = "\n".join(ln for ln in PACKAGED_SOURCES.encodings_text.splitlines()
                    if not ln.startswith("HLT"))
    with pytest.raises((LinkError, DescriptionError), match="HLT"):
        link(replace(PACKAGED_SOURCES, encodings_text=enc))


def test_unknown_constraint_subject():
    vc = PACKAGED_SOURCES.constraints_text + "\nNOPE: cond != 15\n"
    with pytest.raises((LinkError, DescriptionError), match="NOPE"):
        link(replace(PACKAGED_SOURCES, constraints_text=vc))
