import random
import subprocess
import sys
import warnings

import pytest

from issforge import ast as A
from issforge.errors import GeneratorError
from issforge.sim.decoder import UNDEFINED, UNPREDICTABLE, build_decoder, decode
from issforge.sim.emit import emit_iss
from issforge.sim.interp import interpret
from issforge.sim.runtime import BLOCK_LIMIT, BlockCache
from issforge.sim.state import ABT, SVC

ENGINES = ("oracle", "iss", "iss-nocache")


def execute_one(tc, text, engine="oracle", **regs):
    """Assemble ``text`` at address 0, set registers, run one instruction."""
    from issforge.asm import Assembler
    s = tc.new_state()
    Assembler(tc.flats).assemble(text + "\nHLT\n").install(s)
    for k, v in regs.items():
        s.r[int(k[1:])] = v
    tc.run(engine, s, 1)
    return s


# -- oracle semantics ----------------------------------------------------------------

@pytest.mark.parametrize("engine", ENGINES)
def test_adcs_signed_overflow(tc, engine):
    s = execute_one(tc, "ADCS R0,R1,R2,LSL #0", engine, r1=0x7FFFFFFF, r2=1)
    assert s.r[0] == 0x80000000
    assert (s.n, s.z, s.c, s.v) == (1, 0, 0, 1)


@pytest.mark.parametrize("engine", ENGINES)
def test_failed_condition_changes_nothing(tc, engine):
    s = execute_one(tc, "ADDEQS R0,R1,R2,LSL #0", engine, r1=5, r2=6)
    assert s.r[0] == 0 and (s.n, s.z, s.c, s.v) == (0, 0, 0, 0)
    assert s.pc == 4


@pytest.mark.parametrize("engine", ENGINES)
def test_pc_reads_as_address_plus_8(tc, engine):
    s = execute_one(tc, "MOV R0,R15,LSL #0", engine)
    assert s.r[0] == 8


@pytest.mark.parametrize("engine", ENGINES)
def test_ldm_stm_round_trip(tc, engine):
    from issforge.asm import Assembler
    src = """
        MOV R13,#2,12       ; 0x200
        MOV R1,#1,0
        MOV R2,#2,0
        MOV R3,#3,0
        STMDB R13!,{R1-R3}
        MOV R1,#0,0
        MOV R2,#0,0
        MOV R3,#0,0
        LDMIA R13!,{R1-R3}
        HLT
    """
    s = tc.new_state()
    Assembler(tc.flats).assemble(src).install(s)
    tc.run(engine, s, 100)
    assert s.halted
    assert s.r[1:4] == [1, 2, 3] and s.r[13] == 0x200
    assert s.mem.read32(0x200 - 12) == 1


def test_interpret_directly(flats):
    from issforge.sim.state import CpuState
    fi = flats["MOV_imm"]
    s = CpuState()
    s.r[15], s.npc = 8, 4
    interpret(fi, {"cond": 14, "S": 1, "d": 3, "imm_value": 0, "rotate_imm": 0, "immed_8": 0}, s)
    assert s.r[3] == 0 and s.z == 1


@pytest.mark.parametrize("engine", ENGINES)
def test_data_abort_enters_abort_mode(tc, engine):
    s = execute_one(tc, "LDR R0,[R1,#0]", engine, r1=0x40000000)
    assert s.mode == ABT and s.pc == 0x10 and s.r[14] == 8
    assert s.spsr[ABT] & 0x1F == SVC


@pytest.mark.parametrize("engine", ENGINES)
def test_branch_and_link(tc, engine):
    from issforge.asm import Assembler
    s = tc.new_state()
    Assembler(tc.flats).assemble("BL f\nHLT\nf: MOV R0,#7,0\nMOV R15,R14,LSL #0\n").install(s)
    tc.run(engine, s, 10)
    assert s.halted and s.r[0] == 7 and s.r[14] == 4


# -- decoding ------------------------------------------------------------------------

def test_undefined_word(tc):
    assert decode(tc.decoder, 0xFFFFFFFF) is UNDEFINED
    assert tc.iss.decode(0xFFFFFFFF) is UNDEFINED


def test_unpredictable_when_constraint_fails(tc, flats):
    fi = flats["LDR_imm_pre"]
    w = fi.encoding.encode({"cond": 14, "U": 1, "n": 15, "d": 0, "offset_12": 4})
    assert decode(tc.decoder, w) is UNPREDICTABLE
    assert tc.iss.decode(w) is UNPREDICTABLE


def test_specialized_variant_selected(tc, flats):
    w = flats["ADC_lsl_imm"].encoding.encode({"cond": 14, "S": 0, "n": 1, "d": 0, "shift_imm": 0, "m": 2})
    assert decode(tc.decoder, w).id == "ADC_lsl_imm__S0_AL"
    assert tc.iss.decode(w).id == "ADC_lsl_imm__S0_AL"
    assert decode(tc.generic_decoder, w).id == "ADC_lsl_imm"


def test_reglist_precompute_in_decoder(tc, flats):
    w = flats["LDM_IA"].encoding.encode({"cond": 14, "W": 0, "n": 5, "reglist": 0x000B})
    d = tc.iss.decode(w)
    assert d.generic == "LDM_IA"
    assert d.params.nb_reg_x4 == 12


def test_shared_bucket_phase1(tc, flats):
    # UXTH, UXTAH and LDRBT differ only below bit 20, so phase 1 returns all three
    w = flats["UXTH"].encoding.encode({"cond": 14, "d": 1, "rotate": 0, "m": 2})
    generics = {c.flat.generic for c in tc.decoder.phase1(w)}
    assert {"UXTH", "UXTAH", "LDRBT"} <= generics
    assert decode(tc.decoder, w).id.startswith("UXTH")


def test_decoder_totality(tc):
    rng = random.Random(0)
    decode_ = tc.iss.decode
    for _ in range(1_000_000):
        d = decode_(rng.getrandbits(32))
        assert d is UNDEFINED or d is UNPREDICTABLE or d.id


def test_emitted_decoder_matches_library(tc):
    rng = random.Random(1)
    for _ in range(50_000):
        w = rng.getrandbits(32)
        a, b = decode(tc.decoder, w), tc.iss.decode(w)
        assert (a.id if a else repr(a)) == (b.id if b else repr(b)), hex(w)


def test_ambiguous_encodings_rejected(tc, flats):
    clone = flats["NOP"]
    from dataclasses import replace
    dup = replace(clone, name="NOP2", generic="NOP2")
    with pytest.raises(GeneratorError, match="ambiguous"):
        build_decoder(tc.generic + [dup])


# -- generated source -------------------------------------------------------------------

def test_routine_count(tc):
    assert tc.iss_source.routine_count == len(tc.flats) == 179


def test_s0_routine_has_no_flag_writes(tc):
    src = tc.iss_source.files["semantics.py"]
    body = src.split("def ADC_lsl_imm__S0_AL(")[1].split("\ndef ")[0]
    assert "s.n =" not in body and "s.c =" not in body and "s.v =" not in body
    flagged = src.split("def ADC_lsl_imm__S1_AL(")[1].split("\ndef ")[0]
    assert "s.v =" in flagged


def test_sources_compile_warning_free(tc):
    for name, text in tc.iss_source.files.items():
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            compile(text, name, "exec")


def test_standalone_package(tc, tmp_path):
    pkg = tmp_path / "uarm_iss"
    pkg.mkdir()
    for name, text in tc.iss_source.files.items():
        (pkg / name).write_text(text)
    code = ("import uarm_iss as m; d = m.decode(0xE3A00005); "
            "print(d.id, m.print_decoded(d), len(m.ROUTINES))")
    out = subprocess.run([sys.executable, "-W", "error", "-c", code], cwd=tmp_path,
                         capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "MOV_imm__S0_AL"
    assert " ".join(out[1:3]) == "MOV R0,#5,0"
    assert int(out[3]) == 179


def test_untranslatable_construct(tc, flats):
    from dataclasses import replace
    bad = replace(flats["NOP"], ast=A.Block((A.Call("Teleport"),)))
    with pytest.raises(GeneratorError):
        emit_iss([bad], build_decoder([bad]))


# -- block cache ---------------------------------------------------------------------------

def _loop_program(tc, asm, count=50):
    return asm.assemble(f"""
        MOV R0,#{count},0
        MOV R1,#0,0
    top:
        ADD R1,R1,#1,0
        SUBS R0,R0,#1,0
        BNE top
        HLT
    """)


def test_persistent_cache_skips_decoding(tc, asm):
    img = _loop_program(tc, asm)
    cache = BlockCache(tc.iss.decode)
    first, second = tc.new_state(), tc.new_state()
    img.install(first)
    img.install(second)
    r1 = tc.run_iss(first, 10_000, block_cache=cache)
    r2 = tc.run_iss(second, 10_000, block_cache=cache)
    assert r1.decodes > 0 and r2.decodes == 0
    assert first.snapshot() == second.snapshot()


def test_profile_sums_to_executed(tc, asm):
    img = _loop_program(tc, asm, 30)
    for engine in ENGINES:
        s = tc.new_state()
        img.install(s)
        res = tc.run(engine, s, 10_000)
        assert sum(res.profile.values()) == res.executed == 2 + 30 * 3 + 1
        assert res.generic_profile["ADD_imm"] == 30


def test_self_modifying_code(tc, asm):
    # first pass runs 'patch' as MOV R0,#1 and caches its block, then rewrites
    # it to MOV R0,#9 and loops; a stale block would give R5 == 2
    src = """
        MOV R5,#0,0
        MOV R4,#0,0
        B patch
    patch:
        MOV R0,#1,0
        ADD R5,R5,R0,LSL #0
        CMP R4,#0,0
        BNE done
        MOV R4,#1,0
        LDR R2,[R15,#8]
        MOV R3,#12,0
        STR R2,[R3,#0]
        B patch
        .word 0xE3A00009
    done:
        HLT
    """
    img = asm.assemble(src)
    results = []
    for engine in ENGINES:
        s = tc.new_state()
        img.install(s)
        tc.run(engine, s, 100)
        assert s.halted and s.r[5] == 10, engine
        results.append(s.snapshot())
    assert results[0] == results[1] == results[2]


def test_blocks_respect_limits(tc, asm):
    body = "\n".join(["ADD R1,R1,#1,0"] * (BLOCK_LIMIT + 10))
    img = asm.assemble(body + "\nHLT\n")
    s = tc.new_state()
    img.install(s)
    cache = BlockCache(tc.iss.decode)
    tc.run_iss(s, 10_000, block_cache=cache)
    sizes = [len(b.items) for b in cache.history]
    assert max(sizes) == BLOCK_LIMIT
    assert s.r[1] == BLOCK_LIMIT + 10


def test_block_stops_at_page_boundary(tc, asm):
    s = tc.new_state()
    words = [0xE2811001] * 8 + [0xE1200070]  # ADD R1,R1,#1 then HLT
    for i, w in enumerate(words):
        s.mem.write32(0x0FF0 + 4 * i, w)
    s.pc = s.npc = 0x0FF0
    cache = BlockCache(tc.iss.decode)
    tc.run_iss(s, 100, block_cache=cache)
    assert [b.start for b in cache.history] == [0x0FF0, 0x1000]
    assert s.halted and s.r[1] == 8


def test_limit_is_exact(tc, asm):
    img = _loop_program(tc, asm, 200)
    for engine in ENGINES:
        s = tc.new_state()
        img.install(s)
        assert tc.run(engine, s, 77).executed == 77


def test_fault_is_reported(tc):
    s = tc.new_state()
    s.mem.write32(0, 0xFFFFFFFF)
    tc.run("iss", s, 10)
    assert s.fault == ("undefined", 0, 0xFFFFFFFF)
    s = tc.new_state()
    s.pc = s.npc = 0x40000000
    tc.run("oracle", s, 10)
    assert s.fault[0] == "prefetch-abort"
