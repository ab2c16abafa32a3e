"""Loading a description directory and building everything derived from it."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .analysis import BranchReport, annotate, load_overrides
from .ingest import load_description
from .ir import FlatInstruction, IsaDescription
from .pcparse import parse_expression
from .sim import emit
from .sim.decoder import DecoderSpec, build_decoder
from .sim.decoder import decode as spec_decode
from .sim.interp import interpret
from .sim.runtime import BlockCache, RunResult, run_cached, run_stepping
from .sim.state import MODE_NAMES, CpuState, Memory
from .transforms import PipelineResult, TransformConfig, run_pipeline

PACKAGED = Path(__file__).parent / "data" / "uarm"
_MODE_BY_NAME = {v: k for k, v in MODE_NAMES.items()}


def corpus_dir(path: str | Path | None = None) -> Path:
    if path:
        return Path(path)
    env = os.environ.get("ISSFORGE_CORPUS")
    return Path(env) if env else PACKAGED


def load_machine(corpus: Path) -> dict:
    p = corpus / "machine.json"
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}


def config_from_machine(machine: dict, **overrides) -> TransformConfig:
    spec = machine.get("specialize", {})
    kw = dict(
        precompute_patterns=[(k, parse_expression(v)) for k, v in machine.get("precompute", {}).items()],
        specialize_flags=[(k, tuple(v)) for k, v in spec.get("flags", {"S": [0, 1]}).items()],
        specialize_condition=spec.get("condition", True),
        condition_param=spec.get("condition_param", "cond"),
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return TransformConfig(**kw)


@dataclass
class Toolchain:
    corpus: Path
    desc: IsaDescription
    machine: dict
    config: TransformConfig
    pipeline: PipelineResult
    reports: dict[str, BranchReport] = field(default_factory=dict)

    @classmethod
    def load(cls, corpus: str | Path | None = None, dump: bool = False, **cfg_overrides) -> "Toolchain":
        root = corpus_dir(corpus)
        desc = load_description(root)
        machine = load_machine(root)
        cfg = config_from_machine(machine, **cfg_overrides)
        result = run_pipeline(desc, cfg, dump)
        reports = annotate(result.flats, load_overrides(root / "overrides.mb"))
        return cls(root, desc, machine, cfg, result, reports)

    @property
    def flats(self) -> list[FlatInstruction]:
        return self.pipeline.flats

    @property
    def generic(self) -> list[FlatInstruction]:
        return [f for f in self.flats if not f.is_variant]

    @cached_property
    def decoder(self) -> DecoderSpec:
        return build_decoder(self.flats, specialized=True)

    @cached_property
    def generic_decoder(self) -> DecoderSpec:
        return build_decoder(self.flats, specialized=False)

    @cached_property
    def iss_source(self) -> emit.IssSource:
        return emit.emit_iss(self.flats, self.decoder)

    @cached_property
    def iss(self):
        return emit.load_iss(self.iss_source)

    # -- machine state -------------------------------------------------------
    def new_state(self) -> CpuState:
        ranges = [tuple(r) for r in self.machine.get("memory", [[0, 0x10000]])]
        reset = self.machine.get("reset", {})
        mode = _MODE_BY_NAME[reset.get("mode", "svc")]
        return CpuState(Memory(ranges), mode, reset.get("pc", 0))

    # -- engines -------------------------------------------------------------
    def run_oracle(self, s: CpuState, limit: int) -> RunResult:
        spec = self.generic_decoder
        return run_stepping(lambda w: spec_decode(spec, w),
                            lambda d, st: interpret(d.flat, d.values, st), s, limit)

    def run_iss(self, s: CpuState, limit: int, cache: bool = True,
                block_cache: BlockCache | None = None) -> RunResult:
        decode = self.iss.decode
        if cache:
            return run_cached(decode, s, limit, block_cache)
        return run_stepping(decode, lambda d, st: d.exec(st, d.params), s, limit)

    def run(self, engine: str, s: CpuState, limit: int) -> RunResult:
        if engine == "oracle":
            return self.run_oracle(s, limit)
        if engine == "iss":
            return self.run_iss(s, limit, cache=True)
        if engine == "iss-nocache":
            return self.run_iss(s, limit, cache=False)
        raise ValueError(f"unknown engine {engine!r}")
