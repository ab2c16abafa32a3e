"""Acceptance checks shared between the test suite and the standalone runner.

Each ``check_*`` function returns ``(ok, detail)``; ``detail`` is a short
human-readable summary of what was measured.
"""

from __future__ import annotations

import json
import random
import re
import subprocess
import sys
import time
from pathlib import Path

from issforge import ast as A
from issforge.asm import Assembler
from issforge.bench import BENCHMARKS, bench_source
from issforge.sim.state import ABT, SVC, VALID_MODES, SimFault
from issforge.testgen import enumerate_valid, instruction_pool, random_program
from issforge.transforms import _wb_target

ACCEPTANCE_LINES: list[str] = []

UNMAPPED = 0x20000000
LAST_WORD = 0xFFFC


def record(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def cli(*args: str, timeout: float = 120) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "issforge.cli", *args],
                          capture_output=True, text=True, timeout=timeout)


# -- 1: decoder round trip -----------------------------------------------------

def check_roundtrip(outdir: Path, extra: tuple[str, ...] = (), generate: bool = True,
                    budget: float = 30.0) -> tuple[bool, str]:
    t0 = time.perf_counter()
    if generate:
        gen = cli("gen-tests", "--out-dir", str(outdir), *extra)
        if gen.returncode:
            return False, f"gen-tests failed: {gen.stderr.strip()}"
    rt = cli("roundtrip", "--image", str(outdir / "corpus.uisa"),
             "--expected", str(outdir / "corpus.expected.asm"), "--json", *extra)
    dt = time.perf_counter() - t0
    try:
        rep = json.loads(rt.stdout)
    except json.JSONDecodeError:
        return False, f"roundtrip produced no report: {rt.stderr.strip()}"
    ok = rt.returncode == 0 and rep["mismatches"] == 0 and rep["total"] >= 10_000 and dt < budget
    return ok, f"{rep['total']} words, {rep['mismatches']} mismatches, {dt:.1f}s"


# -- 2: write-back under data aborts ---------------------------------------------

def writeback_base(fi):
    """``(index_expr, mode_expr)`` of the base register a flat writes back, or None."""
    if not A.contains(fi.ast, lambda n: isinstance(n, A.Memory)):
        return None
    if fi.writeback is not None:
        target = _wb_target(fi.ast.body[fi.writeback])
        return (target.index, target.mode) if target is not None else None
    for n in A.walk(fi.ast):
        if isinstance(n, A.Assign) and isinstance(n.lhs, A.Reg) and n.lhs.index == A.Var("n"):
            return n.lhs.index, n.lhs.mode
    return None


def _resolve(e, values, default):
    if e is None or e == A.Var("wb_mode"):
        return default
    if isinstance(e, A.Num):
        return e.value
    return values[e.name]


def _abort_state(tc, word: int, idx: int, mode: int, base: int):
    s = tc.new_state()
    for i in range(15):
        s.r[i] = 0x100
    for bank in s.banks.values():
        bank[0] = bank[1] = 0x100
    s.write_banked(idx, mode, base)
    s.mem.write32(0, word)
    s.pc = s.npc = 0
    return s


def check_writeback_abort(tc, engines=("oracle", "iss", "iss-nocache"), samples: int = 48
                          ) -> tuple[bool, str]:
    flats = [f for f in tc.flats if writeback_base(f) is not None]
    bad, faults, starved = [], 0, []
    for fi in flats:
        idx_e, mode_e = writeback_base(fi)
        hits = 0
        for word, values in enumerate_valid(fi, samples, seed=2):
            idx = _resolve(idx_e, values, None)
            mode = _resolve(mode_e, values, SVC)
            if idx is None or idx == 15 or mode not in VALID_MODES:
                continue
            for base in (UNMAPPED, LAST_WORD):
                for engine in engines:
                    s = _abort_state(tc, word, idx, mode, base)
                    tc.run(engine, s, 1)
                    if s.mode != ABT or s.pc != 0x10:
                        continue  # condition failed or the access stayed in range
                    hits += 1
                    faults += 1
                    # read back through the original mode's view of the bank
                    s.switch_mode(SVC)
                    got = s.read_banked(idx, mode)
                    if got != base:
                        bad.append(f"{fi.name} {word:08X} {engine}: R{idx} {base:#x} -> {got:#x}")
        if not hits:
            starved.append(fi.name)
    ok = not bad and not starved
    detail = f"{len(flats)} flats, {faults} aborting accesses, {len(bad)} base changes"
    if starved:
        detail += f", no abort produced for {starved}"
    if bad:
        detail += f" (first: {bad[0]})"
    return ok, detail


# -- 3: flatten count -------------------------------------------------------------

def check_flatten_count(tc) -> tuple[bool, str]:
    expected = sum(max(1, len(tc.desc.families.get(i.family, ())) if i.family else 1)
                   for i in tc.desc.instructions)
    got = len(tc.generic)
    return got == expected, f"{got} flattened, {expected} expected"


# -- 4: merged encoding golden ------------------------------------------------------

ADC_LSL_IMM_GOLDEN = ("31..28 cond | 27..26 00 | 25 0 | 24..21 0101 | 20 S | 19..16 Rn | "
                      "15..12 Rd | 11..7 shift_imm | 6..4 000 | 3..0 Rm")


def check_merge_golden(tc) -> tuple[bool, str]:
    fi = next(f for f in tc.generic if f.name == "ADC_lsl_imm")
    got = fi.encoding.text()
    return got == ADC_LSL_IMM_GOLDEN, "exact match" if got == ADC_LSL_IMM_GOLDEN else f"got {got!r}"


# -- 5: may-branch of LDR reg_pre ----------------------------------------------------

def random_state(tc, rng: random.Random, data: bytes):
    s = tc.new_state()
    s.mem.load(0x8000, data)
    for i in range(15):
        s.r[i] = 0x8000 + 4 * rng.randrange(0x400) if rng.random() < 0.6 else rng.getrandbits(32)
    for bank in s.banks.values():
        bank[0], bank[1] = 0x8000 + 4 * rng.randrange(0x400), rng.getrandbits(32)
    for m in s.spsr:
        s.spsr[m] = rng.getrandbits(27) << 5 | rng.choice(sorted(VALID_MODES))
    s.switch_mode(rng.choice(sorted(VALID_MODES)))
    s.n, s.z, s.c, s.v = (rng.getrandbits(1) for _ in range(4))
    return s


def maybranch_soundness(tc, names, n: int, seed: int = 5, pool: int = 4096) -> tuple[int, int, int]:
    """Interpret ``n`` random (instruction, params, state) triples with the
    oracle; return (false negatives, PC writes observed, interpretations)."""
    from issforge.sim.decoder import decode
    from issforge.sim.interp import interpret
    rng = random.Random(seed)
    pools = {}
    for name in names:
        fi = tc.decoder.by_name[name]
        pools[name] = [w for w, _ in enumerate_valid(fi, pool, seed)]
    data = rng.randbytes(0x1000)
    base = random_state(tc, rng, data)
    missed = writes = 0
    spec = tc.decoder
    for _ in range(n):
        word = rng.choice(pools[rng.choice(names)])
        d = decode(spec, word)
        s = base.copy() if rng.random() < 0.5 else random_state(tc, rng, data)
        s.n, s.z, s.c, s.v = (rng.getrandbits(1) for _ in range(4))
        s.r[15] = 8
        s.npc = None
        try:
            interpret(d.flat, d.values, s)
        except SimFault:
            pass
        if s.npc is not None:
            writes += 1
            if not d.is_terminator:
                missed += 1
    return missed, writes, n


def check_ldr_maybranch(tc, n: int = 100_000) -> tuple[bool, str]:
    fi = tc.decoder.by_name["LDR_reg_pre"]
    structural = fi.may_branch == A.BinOp("==", A.Var("d"), A.Num(15))
    names = [f.name for f in tc.flats if f.generic == "LDR_reg_pre"]
    missed, writes, total = maybranch_soundness(tc, names, n)
    ok = structural and missed == 0 and writes > 0
    return ok, (f"condition {A.format_expr(fi.may_branch)}, {total} interpretations, "
                f"{writes} PC writes, {missed} false negatives")


# -- 6: oracle against the generated simulator ----------------------------------------

def programs(tc, count: int = 100):
    """Benchmark images plus ``count`` random programs, as (name, installer) pairs."""
    asm = Assembler(tc.flats)
    out = []
    for name in BENCHMARKS:
        img = asm.assemble(bench_source(tc, name))
        out.append((name, img.install, 10_000_000))
    pool = instruction_pool(tc.flats)
    for seed in range(count):
        prog = random_program(tc.flats, seed, pool=pool)
        out.append((f"random-{seed}", prog.install, 5000))
    return out


def run_snapshot(tc, engine: str, install, limit: int) -> tuple[dict, int]:
    s = tc.new_state()
    install(s)
    res = tc.run(engine, s, limit)
    return s.snapshot(), res.executed


def oracle_snapshots(tc, count: int = 100) -> dict:
    return {name: (run_snapshot(tc, "oracle", inst, lim), inst, lim)
            for name, inst, lim in programs(tc, count)}


def check_equivalence(tc, reference: dict) -> tuple[bool, str]:
    bad = []
    for name, ((snap, n), install, limit) in reference.items():
        got, m = run_snapshot(tc, "iss", install, limit)
        if got != snap or m != n:
            bad.append(name)
    ok = not bad
    return ok, f"{len(reference)} programs, {len(bad)} differ" + (f" ({bad[:5]})" if bad else "")


# -- 7: throughput ----------------------------------------------------------------------

def check_bench(outdir: Path) -> tuple[bool, str, dict | None]:
    t0 = time.perf_counter()
    proc = cli("bench", "--json", "--out", str(outdir))
    dt = time.perf_counter() - t0
    if proc.returncode:
        return False, f"bench failed: {proc.stderr.strip()}", None
    rep = json.loads(proc.stdout)
    speed = rep["summary"]["iss_over_oracle"]["loop"]
    spec = rep["summary"]["specialization_ratio"]["loop"]
    ok = speed >= 3.0 and spec >= 1.0 and dt < 60
    return ok, f"loop ISS/oracle {speed:.1f}x, specialization ratio {spec:.2f}, {dt:.1f}s", rep


# -- 9: reglist popcount ------------------------------------------------------------------

def emitted_expression(tc, name: str, flat: str = "LDM_IA"):
    """Compile the decode-time expression the generator wrote for ``name``."""
    src = tc.iss_source.files["decoder.py"]
    m = re.search(rf"^    {name} = (.+)$", src, re.M)
    ns = {}
    exec(tc.iss_source.files["support.py"], ns)
    fi = tc.decoder.by_name[flat]
    args = ", ".join(f.param for f in fi.encoding.params())
    return eval(f"lambda {args}: {m.group(1)}", ns)


def check_reglist(tc) -> tuple[bool, str]:
    fn = emitted_expression(tc, "nb_reg_x4")
    t0 = time.perf_counter()
    wrong = sum(1 for rl in range(1 << 16)
                if fn(cond=14, W=0, n=0, reglist=rl) != 4 * bin(rl).count("1"))
    dt = time.perf_counter() - t0
    return wrong == 0 and dt < 1.0, f"65536 reglists, {wrong} wrong, {dt * 1000:.0f} ms"

