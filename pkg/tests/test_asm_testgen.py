import random
from dataclasses import replace

import pytest

from issforge import testgen
from issforge.asm import AsmError
from issforge.errors import GeneratorError
from issforge.ingest import parse_encoding_row
from issforge.sim.image import Image, ImageError
from issforge.sim.render import print_asm


# -- printer ---------------------------------------------------------------------------

@pytest.mark.parametrize("word,text", [
    (0xE3A00005, "MOV R0,#5,0"),
    (0x02AB0F53, "ADCEQ R0,R11,#83,15"),
    (0xE1200070, "HLT"),
    (0xE92D4007, "STMDB R13!,{R0,R1,R2,R14}"),
    (0xE7310002, "LDR R0,[R1,-R2]!"),
])
def test_print_examples(tc, word, text):
    d = tc.iss.decode(word)
    assert tc.iss.print_decoded(d) == text


def test_printer_agrees_with_library(tc):
    rng = random.Random(4)
    from issforge.sim.decoder import decode
    for fi in tc.generic:
        for w, values in testgen.enumerate_valid(fi, 40, rng.randrange(100)):
            d = tc.iss.decode(w)
            assert tc.iss.print_decoded(d) == print_asm(fi, values) == \
                print_asm(decode(tc.generic_decoder, w).flat, values)


# -- assembler ---------------------------------------------------------------------------

def test_encode_line(asm):
    assert asm.encode_line("MOV R0,#5,0") == 0xE3A00005
    assert asm.encode_line("mov r0,#5,0") == 0xE3A00005
    assert asm.encode_line("ADCEQ R0,R11,#83,15") == 0x02AB0F53
    assert asm.encode_line("STMDB SP!,{R0-R2,LR}") == 0xE92D4007


def test_branch_label_offsets(asm):
    img = asm.assemble("_start: B fwd\nNOP\nfwd: B _start\n")
    assert img.words[0] == 0xEA000000          # (8 - (0 + 8)) / 4
    assert img.words[2] == 0xEAFFFFFC          # (0 - (8 + 8)) / 4
    assert img.entry == 0


def test_word_directive_and_comments(asm):
    img = asm.assemble("x: .word 0x1234 ; data\n.word x @ address\n")
    assert img.words == [0x1234, 0]


@pytest.mark.parametrize("bad", [
    "MOV R0,#256,0",
    "FROB R1",
    "ADD R16,R0,#1,0",
    "B nowhere",
])
def test_assembler_errors(asm, bad):
    with pytest.raises(AsmError):
        asm.assemble(bad)


def test_duplicate_label(asm):
    with pytest.raises(AsmError, match="duplicate"):
        asm.assemble("a: NOP\na: NOP\n")


# -- image -------------------------------------------------------------------------------

def test_image_round_trip(tmp_path):
    img = Image([1, 0xDEADBEEF, 3], entry=4)
    p = tmp_path / "x.uisa"
    img.save(p)
    back = Image.load(p)
    assert back.words == img.words and back.entry == 4
    assert p.read_bytes()[:4] == b"UISA"


def test_image_rejects_garbage():
    with pytest.raises(ImageError):
        Image.from_bytes(b"ELF\x00" + bytes(12))
    good = Image([1, 2]).to_bytes()
    with pytest.raises(ImageError):
        Image.from_bytes(good[:-2])


# -- test generation --------------------------------------------------------------------

def test_ldrbt_samples_respect_constraints(flats):
    samples = list(testgen.enumerate_valid(flats["LDRBT"], 500, seed=9))
    assert len(samples) == 500
    for _, v in samples:
        assert 0 <= v["n"] <= 14 and v["d"] != v["n"] and v["d"] != 15 and v["m"] not in (15, v["n"])


def test_small_space_is_exhaustive(flats):
    enc = parse_encoding_row("31..1 0000000000000000000000000000000 | 0 X")
    fi = replace(flats["NOP"], name="TINY", encoding=enc, constraints=[], predicate={})
    words = [w for w, _ in testgen.enumerate_valid(fi, 4096)]
    assert sorted(words) == [0, 1]


def test_unsatisfiable_constraints(flats):
    fi = flats["NOP"]
    from issforge.ir import NotEqualValue, ValidityConstraint
    enc = parse_encoding_row("31..1 0000000000000000000000000000000 | 0 X")
    impossible = [ValidityConstraint("TINY", NotEqualValue("X", 0)),
                  ValidityConstraint("TINY", NotEqualValue("X", 1))]
    tiny = replace(fi, name="TINY", encoding=enc, constraints=impossible, predicate={})
    with pytest.raises(GeneratorError):
        list(testgen.enumerate_valid(tiny))


def test_enumeration_is_seeded(flats):
    fi = flats["ADD_imm"]
    a = [w for w, _ in testgen.enumerate_valid(fi, 50, seed=1)]
    b = [w for w, _ in testgen.enumerate_valid(fi, 50, seed=1)]
    c = [w for w, _ in testgen.enumerate_valid(fi, 50, seed=2)]
    assert a == b != c
    assert len(set(a)) == 50


def test_variant_predicates_are_pinned(flats):
    fi = flats["ADC_imm__S1_AL"]
    for _, v in testgen.enumerate_valid(fi, 30):
        assert v["S"] == 1 and v["cond"] == 14


def test_corrupted_expected_lines_are_reported(tc, tmp_path):
    corpus = testgen.generate(tc.flats, budget=16)
    img, expected = testgen.write_corpus(corpus, tmp_path)
    lines = expected.read_text().splitlines()
    for i in (3, 40, 41):
        lines[i] = lines[i] + "X"
    expected.write_text("\n".join(lines) + "\n")
    rows = testgen.read_expected(expected)
    rep = testgen.roundtrip(tc.iss, Image.load(img).words, [t for _, t in rows])
    assert [m["index"] for m in rep.mismatches] == [3, 40, 41]


def test_roundtrip_with_reassembly(tc, asm):
    corpus = testgen.generate(tc.flats, budget=24, seed=3)
    rep = testgen.roundtrip(tc.iss, corpus.words, corpus.expected, asm)
    assert rep.ok and rep.total == len(corpus.words) > 63 * 10


def test_random_programs_are_deterministic(tc):
    pool = testgen.instruction_pool(tc.flats, per_flat=8)
    a = testgen.random_program(tc.flats, 7, pool=pool)
    b = testgen.random_program(tc.flats, 7, pool=pool)
    assert a.image.words == b.image.words and a.regs == b.regs
    assert a.image.words[-1] == testgen.HALT_WORD
