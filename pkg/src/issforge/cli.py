"""Command-line entry point: ``issforge <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import ast as A
from .errors import IsaError

log = logging.getLogger("issforge")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help="description directory (default: packaged corpus or $ISSFORGE_CORPUS)")
    p.add_argument("--no-specialize", action="store_true", help="skip the specialization pass")
    p.add_argument("--weight-threshold", type=int, help="minimum profile weight for specialization")
    p.add_argument("--profile", help="execution profile (name<TAB>count lines)")


def _toolchain(args, dump: bool = False):
    from .toolchain import Toolchain
    from .transforms import read_profile
    return Toolchain.load(
        args.corpus, dump=dump,
        specialize=False if args.no_specialize else None,
        weight_threshold=args.weight_threshold,
        profile=read_profile(args.profile) if args.profile else None)


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if getattr(args, "json", False) else text)


# -- commands ----------------------------------------------------------------

def cmd_parse(args) -> int:
    from .ingest import load_description
    from .toolchain import corpus_dir
    desc = load_description(corpus_dir(args.corpus_dir or args.corpus))
    for w in desc.warnings:
        log.warning(w)
    dump = desc.dump()
    if args.out:
        Path(args.out).write_text(dump, encoding="utf-8")
    elif not args.quiet:
        print(dump, end="")
    print(f"{len(desc.instructions)} instructions, {len(desc.modes)} mode cases, "
          f"{len(desc.families)} families", file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    tc = _toolchain(args, dump=bool(args.dump_ir))
    if args.dump_ir:
        out = Path(args.dump_ir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in tc.pipeline.stages.items():
            (out / f"{name}.txt").write_text(text, encoding="utf-8")
    if args.dump_maybranch:
        for fi in tc.flats:
            rep = tc.reports[fi.name]
            tag = f"  [override: {rep.override}]" if rep.override else ""
            print(f"{fi.name}: {A.format_expr(fi.may_branch)}{tag}")
    print(f"{len(tc.generic)} flat instructions, {len(tc.flats)} with specialized variants")
    return 0


def cmd_gen_iss(args) -> int:
    tc = _toolchain(args)
    out = Path(args.out) / args.package
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tc.iss_source.files.items():
        (out / name).write_text(text, encoding="utf-8")
    print(f"wrote {len(tc.iss_source.files)} modules to {out} "
          f"({tc.iss_source.routine_count} semantics routines)")
    return 0


def cmd_gen_tests(args) -> int:
    from . import testgen
    tc = _toolchain(args)
    corpus = testgen.generate(tc.flats, args.budget, args.seed)
    img, asm = testgen.write_corpus(corpus, args.out_dir)
    print(f"{len(corpus.words)} words -> {img}, {asm}")
    return 0


def cmd_roundtrip(args) -> int:
    from . import testgen
    from .asm import Assembler
    from .sim.image import Image
    tc = _toolchain(args)
    t0 = time.perf_counter()
    words = Image.load(args.image).words
    rows = testgen.read_expected(args.expected)
    rep = testgen.roundtrip(tc.iss, words, [t for _, t in rows],
                            Assembler(tc.flats) if args.reassemble else None)
    payload = dict(rep.as_dict(), seconds=round(time.perf_counter() - t0, 3))
    lines = [f"{m['word']}: expected {m['expected']!r}, got {m['got']!r}" for m in rep.mismatches[:20]]
    lines.append(f"{rep.total} words, {len(rep.mismatches)} mismatches")
    _emit(args, payload, "\n".join(lines))
    return 0 if rep.ok else 1


def _load_program(args, tc):
    from .asm import Assembler
    from .sim.image import Image
    if args.image:
        return Image.load(args.image)
    return Assembler(tc.flats).assemble(Path(args.asm).read_text(encoding="utf-8"))


def cmd_sim(args) -> int:
    from .transforms import write_profile
    tc = _toolchain(args)
    image = _load_program(args, tc)
    s = tc.new_state()
    image.install(s)
    if args.trace:
        _trace(tc, s, args.max_insns)
        return 0
    t0 = time.perf_counter()
    res = tc.run(args.engine, s, args.max_insns)
    dt = time.perf_counter() - t0
    snap = s.snapshot()
    if args.emit_profile:
        write_profile(args.emit_profile, dict(res.generic_profile))
    payload = {"executed": res.executed, "seconds": round(dt, 6), "halted": s.halted,
               "fault": list(s.fault) if s.fault else None, "regs": snap["regs"],
               "cpsr": snap["cpsr"], "memory_sha256": snap["mem"]}
    text = "\n".join([
        f"executed {res.executed} instructions in {dt:.3f}s"
        f" ({'halted' if s.halted else s.fault[0] if s.fault else 'limit reached'})",
        *(f"R{i:<2} = 0x{v:08X}" for i, v in enumerate(snap["regs"])),
        f"CPSR = 0x{snap['cpsr']:08X}"])
    _emit(args, payload, text)
    return 0 if s.fault is None else 2


def _trace(tc, s, limit: int) -> None:
    from .sim.runtime import run_stepping
    iss = tc.iss

    def execute(d, st):
        print(f"{st.pc:08X}: {iss.print_decoded(d)}")
        d.exec(st, d.params)
    res = run_stepping(iss.decode, execute, s, limit)
    print(f"executed {res.executed}; fault={s.fault}, halted={s.halted}")


def cmd_bench(args) -> int:
    from . import bench
    tc = _toolchain(args)
    report = bench.run_bench(tc, args.benchmark or bench.BENCHMARKS, repeat=args.repeat,
                             oracle_limit=args.oracle_limit)
    paths = bench.write_outputs(report, args.out)
    summary = report["summary"]
    text = bench.to_csv(report) + "\n" + "\n".join(
        f"{k}: " + ", ".join(f"{b}={v:.2f}" for b, v in d.items()) for k, d in summary.items())
    text += "\nwrote " + ", ".join(str(p) for p in paths.values())
    _emit(args, report, text)
    return 0


def cmd_disasm(args) -> int:
    from .sim.image import Image
    tc = _toolchain(args)
    iss = tc.iss
    for i, w in enumerate(Image.load(args.image).words):
        d = iss.decode(w)
        text = iss.print_decoded(d) if d else f"<{d!r}>"
        print(f"{4 * i:08X}  {w:08X}  {text}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="issforge", description="ISA description to simulator toolchain")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and link a description, then dump the IR")
    p.add_argument("corpus_dir", nargs="?", help="description directory")
    p.add_argument("--corpus", help=argparse.SUPPRESS)
    p.add_argument("--out", help="write the IR dump to a file instead of stdout")
    p.add_argument("-q", "--quiet", action="store_true", help="validate only")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("pipeline", help="run the transform pipeline")
    _add_pipeline_flags(p)
    p.add_argument("--dump-ir", metavar="DIR", help="write the IR after every pass")
    p.add_argument("--dump-maybranch", action="store_true", help="print may-branch conditions")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("gen-iss", help="write the generated simulator package")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--package", default="uarm_iss")
    p.set_defaults(func=cmd_gen_iss)

    p = sub.add_parser("gen-tests", help="write a decoder test corpus")
    _add_pipeline_flags(p)
    p.add_argument("--out-dir", "--out", dest="out_dir", required=True)
    p.add_argument("--budget", type=int, default=4096, help="words per flat instruction")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_tests)

    p = sub.add_parser("roundtrip", help="check a test corpus against the generated decoder")
    _add_pipeline_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--expected", required=True)
    p.add_argument("--reassemble", action="store_true",
                   help="also assemble every expected line and compare the words")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("sim", help="run a program")
    _add_pipeline_flags(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", help="UISA image")
    src.add_argument("--asm", help="assembly source")
    p.add_argument("--engine", choices=("iss", "iss-nocache", "oracle"), default="iss")
    p.add_argument("--max-insns", type=int, default=10_000_000)
    p.add_argument("--emit-profile", metavar="FILE")
    p.add_argument("--trace", action="store_true", help="print every executed instruction")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("bench", help="measure simulator throughput")
    _add_pipeline_flags(p)
    p.add_argument("--out", default="bench-out", help="directory for bench.json, bench.csv, bench.png")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--oracle-limit", type=int, default=40_000)
    p.add_argument("--benchmark", action="append", choices=("loop", "sorting", "crypto"),
                   help="benchmark to run (repeatable; default: all)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("disasm", help="disassemble a UISA image")
    _add_pipeline_flags(p)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_disasm)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except (IsaError, ValueError, OSError) as exc:
        print(f"issforge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
