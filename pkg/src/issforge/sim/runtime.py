"""Run loops: the oracle engine and the emitted simulator with or without
the basic-block cache."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .decoder import UNDEFINED, UNPREDICTABLE, DecodeFailure  # noqa: F401  (re-exported)
from .state import ABT, PAGE_SHIFT, CpuState, DataAbort, SimFault, UndefinedError

BLOCK_LIMIT = 256
ABORT_VECTOR = 0x10


class Decoded(NamedTuple):
    id: str
    exec: Callable
    params: tuple
    is_terminator: bool
    word: int
    fields: tuple
    stores: bool
    generic: str


@dataclass
class RunResult:
    state: CpuState
    executed: int
    profile: Counter = field(default_factory=Counter)
    decodes: int = 0
    blocks: int = 0

    @property
    def generic_profile(self) -> Counter:
        out: Counter = Counter()
        for name, n in self.profile.items():
            out[name.split("__", 1)[0]] += n
        return out


def _fault(s: CpuState, kind: str, pc: int, word: int | None) -> None:
    s.fault = (kind, pc, word)


def _handle(s: CpuState, exc: SimFault, pc: int, word: int) -> None:
    if isinstance(exc, DataAbort):
        s.enter_exception(ABT, ABORT_VECTOR, pc + 8)
    else:
        _fault(s, "undefined" if isinstance(exc, UndefinedError) else "unpredictable", pc, word)


def run_stepping(decode: Callable, execute: Callable, s: CpuState, limit: int) -> RunResult:
    """Fetch, decode and execute one instruction at a time."""
    res = RunResult(s, 0)
    prof = res.profile
    r, mem = s.r, s.mem
    while res.executed < limit and not s.halted and s.fault is None:
        pc = s.pc
        try:
            word = mem.read32(pc)
        except DataAbort:
            _fault(s, "prefetch-abort", pc, None)
            break
        d = decode(word)
        res.decodes += 1
        if isinstance(d, DecodeFailure):
            _fault(s, d.kind, pc, word)
            break
        r[15] = (pc + 8) & 0xFFFFFFFF
        s.npc = pc + 4
        res.executed += 1
        prof[d.id] += 1
        try:
            execute(d, s)
        except SimFault as exc:
            _handle(s, exc, pc, word)
            continue
        s.pc = s.npc
    return res


class _Block:
    __slots__ = ("start", "items", "ids", "runs", "partial")

    def __init__(self, start, items, ids):
        self.start = start
        self.items = items
        self.ids = ids
        self.runs = 0
        self.partial: Counter = Counter()


class BlockCache:
    """Decoded basic blocks keyed by start address.

    A block holds at most ``BLOCK_LIMIT`` instructions, ends after the first
    instruction that may write the PC and never crosses a 4 KiB page, so a
    store into a page invalidates exactly the blocks built from it.
    """

    def __init__(self, decode: Callable, mem=None):
        self.decode = decode
        self.mem = mem
        self.blocks: dict[int, _Block] = {}
        self.by_page: dict[int, list[int]] = {}
        self.history: list[_Block] = []
        self.decodes = 0

    def build(self, pc: int) -> _Block | tuple:
        items, ids = [], []
        page = pc >> PAGE_SHIFT
        a = pc
        mem = self.mem
        while len(items) < BLOCK_LIMIT and a >> PAGE_SHIFT == page:
            try:
                word = mem.read32(a)
            except DataAbort:
                if not items:
                    return ("prefetch-abort", None)
                break
            d = self.decode(word)
            self.decodes += 1
            if isinstance(d, DecodeFailure):
                if not items:
                    return (d.kind, word)
                break
            items.append((d.exec, d.params, d.is_terminator, d.stores))
            ids.append(d.id)
            a += 4
            if d.is_terminator:
                break
        blk = _Block(pc, items, ids)
        self.blocks[pc] = blk
        self.by_page.setdefault(page, []).append(pc)
        self.history.append(blk)
        mem.watched.add(page)
        return blk

    def invalidate(self, pages) -> None:
        for page in pages:
            for start in self.by_page.pop(page, ()):
                self.blocks.pop(start, None)
            self.mem.watched.discard(page)

    def attach(self, mem) -> None:
        """Reuse the cached blocks on ``mem``, which must hold the same code."""
        self.mem = mem
        mem.watched |= set(self.by_page)

    def profile(self) -> Counter:
        out: Counter = Counter()
        for b in self.history:
            if b.runs:
                for name in b.ids:
                    out[name] += b.runs
            out.update(b.partial)
        return out


def run_cached(decode: Callable, s: CpuState, limit: int, cache: BlockCache | None = None
               ) -> RunResult:
    mem = s.mem
    if cache is None:
        cache = BlockCache(decode, mem)
    else:
        cache.attach(mem)
    decodes0, blocks0, profile0 = cache.decodes, len(cache.history), cache.profile()
    blocks = cache.blocks
    r = s.r
    executed = 0
    while executed < limit and not s.halted and s.fault is None:
        pc = s.pc
        blk = blocks.get(pc)
        if blk is None:
            blk = cache.build(pc)
            if isinstance(blk, tuple):
                _fault(s, blk[0], pc, blk[1])
                break
        items = blk.items
        n = len(items)
        if executed + n > limit:
            items = items[:limit - executed]
        done = 0
        try:
            for fn, p, term, stores in items:
                r[15] = pc + 8
                done += 1
                if term:
                    s.npc = pc + 4
                    fn(s, p)
                    pc = s.npc
                    break
                fn(s, p)
                pc += 4
                if stores and mem.dirty:
                    break
        except SimFault as exc:
            s.pc = pc
            _handle(s, exc, pc, mem.read32(pc))
        else:
            s.pc = pc
        executed += done
        if done == n:
            blk.runs += 1
        else:
            blk.partial.update(blk.ids[:done])
        if mem.dirty:
            cache.invalidate(mem.dirty)
            mem.dirty.clear()
    mem.watched.clear()
    return RunResult(s, executed, cache.profile() - profile0, cache.decodes - decodes0,
                     len(cache.history) - blocks0)
