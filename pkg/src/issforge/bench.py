"""Throughput measurements for the oracle and the generated simulator."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .asm import Assembler
from .toolchain import Toolchain

BENCHMARKS = ("loop", "sorting", "crypto")
ENGINES = ("oracle", "iss", "iss-nocache", "iss-nospec")


@dataclass
class Row:
    benchmark: str
    engine: str
    instructions: int
    seconds: float
    ips: float
    regs_digest: str


def bench_source(tc: Toolchain, name: str) -> str:
    path = tc.corpus / "bench" / f"{name}.s"
    return path.read_text(encoding="utf-8")


def _time(tc: Toolchain, engine: str, image, limit: int, repeat: int) -> tuple[int, float, str]:
    best = float("inf")
    executed = 0
    digest = ""
    for _ in range(repeat):
        s = tc.new_state()
        image.install(s)
        t0 = time.perf_counter()
        res = tc.run(engine, s, limit)
        dt = time.perf_counter() - t0
        best = min(best, dt)
        executed = res.executed
        digest = hashlib.sha1(repr(s.snapshot()["regs"]).encode()).hexdigest()[:12]
    return executed, best, digest


def run_bench(tc: Toolchain, names=BENCHMARKS, repeat: int = 3, oracle_limit: int = 40_000,
              limit: int = 10_000_000, nospec: Toolchain | None = None) -> dict:
    """Best-of-``repeat`` instructions per second for each engine.

    The oracle is timed over at most ``oracle_limit`` instructions so a full
    run stays short; the emitted simulator runs each program to completion.
    """
    if nospec is None:
        nospec = Toolchain.load(tc.corpus, specialize=False)
    rows: list[Row] = []
    for name in names:
        image = Assembler(tc.flats).assemble(bench_source(tc, name))
        for engine in ENGINES:
            chain, eng = (nospec, "iss") if engine == "iss-nospec" else (tc, engine)
            lim = min(limit, oracle_limit) if engine == "oracle" else limit
            n, dt, digest = _time(chain, eng, image, lim, repeat if engine == "oracle" else repeat + 2)
            rows.append(Row(name, engine, n, dt, n / dt if dt else 0.0, digest))
    ips = {(r.benchmark, r.engine): r.ips for r in rows}
    summary = {
        "iss_over_oracle": {b: ips[b, "iss"] / ips[b, "oracle"] for b in names},
        "specialization_ratio": {b: ips[b, "iss"] / ips[b, "iss-nospec"] for b in names},
        "cache_ratio": {b: ips[b, "iss"] / ips[b, "iss-nocache"] for b in names},
    }
    return {"rows": [asdict(r) for r in rows], "summary": summary,
            "flats": len(tc.flats), "generic_flats": len(tc.generic), "repeat": repeat}


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(Row.__dataclass_fields__))
    w.writeheader()
    for r in report["rows"]:
        w.writerow(r)
    return buf.getvalue()


def plot(report: dict, path: str | Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    rows = report["rows"]
    names = list(dict.fromkeys(r["benchmark"] for r in rows))
    engines = list(dict.fromkeys(r["engine"] for r in rows))
    ips = {(r["benchmark"], r["engine"]): r["ips"] for r in rows}
    x = np.arange(len(names))
    width = 0.8 / len(engines)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, eng in enumerate(engines):
        ax.bar(x + i * width, [ips[n, eng] for n in names], width, label=eng)
    ax.set_xticks(x + width * (len(engines) - 1) / 2, names)
    ax.set_yscale("log")
    ax.set_ylabel("instructions / second")
    ax.legend(fontsize="small")
    ax.set_title("Simulator throughput (best of runs)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_outputs(report: dict, outdir: str | Path) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "bench.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    (outdir / "bench.csv").write_text(to_csv(report), encoding="utf-8")
    png = plot(report, outdir / "bench.png")
    return {"json": outdir / "bench.json", "csv": outdir / "bench.csv", "png": png}
