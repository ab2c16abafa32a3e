"""Decoder test generation: valid words per flat instruction, the expected
disassembly, and the round-trip check against the generated simulator."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import GeneratorError
from .ir import FlatInstruction, is_register_field
from .sim.image import Image
from .sim.render import print_asm

DEFAULT_BUDGET = 4096


def _boundary(width: int, label: str) -> list[int]:
    top = (1 << width) - 1
    vals = {0, 1, top, top - 1, 1 << (width - 1), (1 << (width - 1)) - 1}
    if is_register_field(label):
        vals |= {13, 14, 15}
    return sorted(v for v in vals if 0 <= v <= top)


def enumerate_valid(fi: FlatInstruction, budget: int = DEFAULT_BUDGET, seed: int = 0
                    ) -> Iterator[tuple[int, dict[str, int]]]:
    produced = 0
    for hit in _enumerate(fi, budget, seed):
        produced += 1
        yield hit
    if not produced:
        raise GeneratorError(f"{fi.name}: no encoding satisfies its validity constraints")


def _enumerate(fi: FlatInstruction, budget: int, seed: int):
    """Yield ``(word, decode values)`` for distinct valid encodings of ``fi``.

    Small encoding spaces are enumerated exhaustively; larger ones are sampled
    with a mix of boundary values and uniform draws from a seeded generator.
    """
    fields = fi.encoding.params()
    space = 1
    for f in fields:
        space <<= f.width
    seen: set[int] = set()

    def accept(values: dict[str, int]):
        word = fi.encoding.encode(values)
        if word in seen:
            return None
        seen.add(word)
        full = fi.decode_fields(word)
        if fi.constraints_hold(full) and fi.predicate_holds(full):
            return word, full
        return None

    if space <= budget:
        for combo in itertools.product(*(range(1 << f.width) for f in fields)):
            hit = accept({f.param: v for f, v in zip(fields, combo)})
            if hit:
                yield hit
        return

    rng = random.Random(f"{seed}:{fi.name}")
    bounds = {f.param: _boundary(f.width, f.label) for f in fields}
    # pin known predicate values so specialized variants are not starved
    pinned = dict(fi.predicate)
    produced = 0
    for _ in range(budget * 8):
        if produced >= budget:
            break
        values = {}
        for f in fields:
            if f.param in pinned:
                values[f.param] = pinned[f.param]
            elif rng.random() < 0.35:
                values[f.param] = rng.choice(bounds[f.param])
            else:
                values[f.param] = rng.getrandbits(f.width)
        hit = accept(values)
        if hit:
            produced += 1
            yield hit


@dataclass
class Corpus:
    words: list[int] = field(default_factory=list)
    expected: list[str] = field(default_factory=list)
    owners: list[str] = field(default_factory=list)

    def expected_text(self) -> str:
        return "".join(f"{w:08X}  {t}\n" for w, t in zip(self.words, self.expected))


def generate(flats: list[FlatInstruction], budget: int = DEFAULT_BUDGET, seed: int = 0) -> Corpus:
    """Corpus over every generic flat instruction (variants decode to the same text)."""
    out = Corpus()
    for fi in flats:
        if fi.is_variant:
            continue
        for word, values in enumerate_valid(fi, budget, seed):
            out.words.append(word)
            out.expected.append(print_asm(fi, values))
            out.owners.append(fi.name)
    return out


def write_corpus(corpus: Corpus, outdir: str | Path) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    img, asm = outdir / "corpus.uisa", outdir / "corpus.expected.asm"
    Image(corpus.words).save(img)
    asm.write_text(corpus.expected_text(), encoding="utf-8")
    return img, asm


def read_expected(path: str | Path) -> list[tuple[int, str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            word, _, text = line.partition("  ")
            rows.append((int(word, 16), text))
    return rows


@dataclass
class RoundtripReport:
    total: int
    mismatches: list[dict]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def as_dict(self) -> dict:
        return {"total": self.total, "mismatches": len(self.mismatches),
                "examples": self.mismatches[:20]}


def roundtrip(iss, words: list[int], expected: list[str], assembler=None) -> RoundtripReport:
    """Disassemble each word with the generated decoder and printer and diff
    against ``expected``; with an assembler, also re-encode the text."""
    bad = []
    decode, printers = iss.decode, iss.PRINTERS
    for i, (w, want) in enumerate(zip(words, expected)):
        d = decode(w)
        if not d:
            bad.append({"index": i, "word": f"{w:08X}", "expected": want, "got": repr(d)})
            continue
        got = printers[d.id](d.fields)
        if got != want:
            bad.append({"index": i, "word": f"{w:08X}", "expected": want, "got": got})
            continue
        if assembler is not None:
            try:
                back = assembler.encode_line(want, 4 * i)
            except ValueError as exc:
                bad.append({"index": i, "word": f"{w:08X}", "expected": want, "got": f"asm error: {exc}"})
                continue
            if back != w:
                bad.append({"index": i, "word": f"{w:08X}", "expected": want,
                            "got": f"re-encoded as {back:08X}"})
    if len(words) != len(expected):
        bad.append({"index": min(len(words), len(expected)), "word": "",
                    "expected": f"{len(expected)} lines", "got": f"{len(words)} words"})
    return RoundtripReport(len(words), bad)


# -- random programs ---------------------------------------------------------

HALT_WORD = 0xE1200070


@dataclass
class RandomProgram:
    image: Image
    regs: list[int]
    data: bytes
    data_base: int = 0x8000

    def install(self, state) -> None:
        self.image.install(state)
        state.r[:15] = list(self.regs)
        state.mem.load(self.data_base, self.data)


def random_program(flats: list[FlatInstruction], seed: int, length: int = 48,
                   pool: dict[str, list[int]] | None = None) -> RandomProgram:
    """Valid words drawn across generic flats, ended by a halt.

    Registers start mostly inside mapped memory so loads and stores land; some
    point outside it to exercise data aborts. Program words may be overwritten
    by the program itself.
    """
    rng = random.Random(seed)
    if pool is None:
        pool = instruction_pool(flats)
    names = sorted(pool)
    words = [rng.choice(pool[rng.choice(names)]) for _ in range(length)] + [HALT_WORD]
    regs = []
    for _ in range(15):
        roll = rng.random()
        if roll < 0.6:
            regs.append(0x8000 + 4 * rng.randrange(0x400))
        elif roll < 0.8:
            regs.append(rng.randrange(16))
        else:
            regs.append(rng.getrandbits(32))
    data = rng.randbytes(0x1000)
    return RandomProgram(Image(words), regs, data)


def instruction_pool(flats: list[FlatInstruction], per_flat: int = 64, seed: int = 0
                     ) -> dict[str, list[int]]:
    return {fi.name: [w for w, _ in enumerate_valid(fi, per_flat, seed)]
            for fi in flats if not fi.is_variant}
