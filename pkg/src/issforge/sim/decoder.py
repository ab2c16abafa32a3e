"""Two-phase decoder: a bucket table on bits 27..20 selects candidates,
then mask/value, validity constraints and specialization predicates are
checked in candidate order."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import GeneratorError
from ..ir import FlatInstruction
from ..simplify import evaluate_static

BUCKET_SHIFT = 20
BUCKET_MASK = 0xFF


@dataclass(frozen=True)
class Candidate:
    mask: int
    value: int
    flat: FlatInstruction
    index: int

    @property
    def id(self) -> str:
        return self.flat.name


@dataclass
class DecoderSpec:
    candidates: list[Candidate]
    buckets: list[tuple[int, ...]] = field(default_factory=list)
    by_name: dict[str, FlatInstruction] = field(default_factory=dict)

    def phase1(self, word: int) -> list[Candidate]:
        return [self.candidates[i] for i in self.buckets[(word >> BUCKET_SHIFT) & BUCKET_MASK]]


class DecodeFailure:
    __slots__ = ("kind",)

    def __init__(self, kind: str):
        self.kind = kind

    def __repr__(self):
        return self.kind.upper()

    def __bool__(self):
        return False


UNDEFINED = DecodeFailure("undefined")
UNPREDICTABLE = DecodeFailure("unpredictable")


class DecodedInstr:
    __slots__ = ("flat", "id", "exec", "params", "values", "is_terminator", "word")

    def __init__(self, flat, values, word, exec_=None):
        self.flat = flat
        self.id = flat.name
        self.values = values
        self.params = tuple(values[p.name] for p in flat.params)
        self.is_terminator = bool(evaluate_static(flat.may_branch, values))
        self.word = word
        self.exec = exec_

    def __repr__(self):
        return f"DecodedInstr({self.id}, {self.values})"


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _satisfiable_overlap(a: FlatInstruction, b: FlatInstruction) -> bool:
    from ..testgen import enumerate_valid
    for word, values in enumerate_valid(a, 512):
        vb = b.decode_fields(word)
        if b.constraints_hold(vb):
            return True
    return False


def build_decoder(flats: list[FlatInstruction], specialized: bool = True) -> DecoderSpec:
    generics = [f for f in flats if not f.is_variant]
    variants: dict[str, list[FlatInstruction]] = {}
    if specialized:
        for f in flats:
            if f.is_variant:
                variants.setdefault(f.generic, []).append(f)
    order = sorted(range(len(generics)),
                   key=lambda i: (-_popcount(generics[i].encoding.mask), i))
    seen: dict[tuple[int, int], FlatInstruction] = {}
    cands: list[Candidate] = []
    for i in order:
        g = generics[i]
        key = (g.encoding.mask, g.encoding.value)
        if key in seen and _satisfiable_overlap(g, seen[key]):
            raise GeneratorError(f"ambiguous encoding: {seen[key].name} and {g.name}")
        seen.setdefault(key, g)
        vs = sorted(variants.get(g.name, []), key=lambda v: -len(v.predicate))
        for f in vs + [g]:
            cands.append(Candidate(g.encoding.mask, g.encoding.value, f, len(cands)))
    buckets = []
    for k in range(BUCKET_MASK + 1):
        probe = k << BUCKET_SHIFT
        sel = BUCKET_MASK << BUCKET_SHIFT
        buckets.append(tuple(c.index for c in cands
                             if (probe & c.mask & sel) == (c.value & c.mask & sel)))
    return DecoderSpec(cands, buckets, {f.name: f for f in flats})


def decode(spec: DecoderSpec, word: int) -> DecodedInstr | DecodeFailure:
    matched = False
    for c in spec.phase1(word):
        if word & c.mask != c.value:
            continue
        matched = True
        fi = c.flat
        values = fi.decode_fields(word)
        if not fi.constraints_hold(values) or not fi.predicate_holds(values):
            continue
        return DecodedInstr(fi, values, word)
    return UNPREDICTABLE if matched else UNDEFINED
