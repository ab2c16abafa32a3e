"""Architectural state: registers, banks, status bits and memory."""

from __future__ import annotations

import hashlib

from ..semantics import MASK

USR, FIQ, IRQ, SVC, ABT, UND, SYS = 0x10, 0x11, 0x12, 0x13, 0x17, 0x1B, 0x1F
MODE_NAMES = {USR: "usr", FIQ: "fiq", IRQ: "irq", SVC: "svc", ABT: "abt", UND: "und", SYS: "sys"}
VALID_MODES = frozenset(MODE_NAMES)
# user and system mode share one register bank
_GROUP = {USR: USR, SYS: USR, FIQ: FIQ, IRQ: IRQ, SVC: SVC, ABT: ABT, UND: UND}
BANKED = (13, 14)
I_BIT = 0x80
PAGE_SHIFT = 12


class SimFault(Exception):
    """Raised by instruction semantics; the runtime decides what happens next."""


class DataAbort(SimFault):
    def __init__(self, addr: int):
        super().__init__(f"data abort at 0x{addr:08X}")
        self.addr = addr


class UnpredictableError(SimFault):
    pass


class UndefinedError(SimFault):
    pass


class Memory:
    """Byte-addressable little-endian memory made of mapped ranges.

    Pages listed in ``watched`` hold translated code; a store to one of them
    is recorded in ``dirty`` so the block cache can drop stale blocks.
    """

    def __init__(self, ranges=((0, 0x10000),)):
        self.regions = [(base, base + size, bytearray(size)) for base, size in ranges]
        self.watched: set[int] = set()
        self.dirty: set[int] = set()

    def _locate(self, a: int, size: int):
        for lo, hi, buf in self.regions:
            if lo <= a and a + size <= hi:
                return buf, a - lo
        raise DataAbort(a)

    def read32(self, a: int) -> int:
        buf, o = self._locate(a, 4)
        return buf[o] | buf[o + 1] << 8 | buf[o + 2] << 16 | buf[o + 3] << 24

    def read16(self, a: int) -> int:
        buf, o = self._locate(a, 2)
        return buf[o] | buf[o + 1] << 8

    def read8(self, a: int) -> int:
        buf, o = self._locate(a, 1)
        return buf[o]

    def read(self, a: int, size: int) -> int:
        buf, o = self._locate(a, size)
        return int.from_bytes(buf[o:o + size], "little")

    def _touch(self, a: int, size: int) -> None:
        if self.watched:
            for page in {a >> PAGE_SHIFT, (a + size - 1) >> PAGE_SHIFT}:
                if page in self.watched:
                    self.dirty.add(page)

    def write32(self, a: int, v: int) -> None:
        buf, o = self._locate(a, 4)
        buf[o:o + 4] = (v & MASK).to_bytes(4, "little")
        if self.watched:
            self._touch(a, 4)

    def write16(self, a: int, v: int) -> None:
        buf, o = self._locate(a, 2)
        buf[o:o + 2] = (v & 0xFFFF).to_bytes(2, "little")
        if self.watched:
            self._touch(a, 2)

    def write8(self, a: int, v: int) -> None:
        buf, o = self._locate(a, 1)
        buf[o] = v & 0xFF
        if self.watched:
            self._touch(a, 1)

    def write(self, a: int, size: int, v: int) -> None:
        buf, o = self._locate(a, size)
        buf[o:o + size] = (v & ((1 << (8 * size)) - 1)).to_bytes(size, "little")
        if self.watched:
            self._touch(a, size)

    def load(self, addr: int, data: bytes) -> None:
        buf, o = self._locate(addr, len(data))
        buf[o:o + len(data)] = data

    def digest(self) -> str:
        h = hashlib.sha256()
        for lo, hi, buf in self.regions:
            h.update(lo.to_bytes(4, "little"))
            h.update(buf)
        return h.hexdigest()

    def copy(self) -> "Memory":
        m = Memory(())
        m.regions = [(lo, hi, bytearray(buf)) for lo, hi, buf in self.regions]
        return m


class CpuState:
    """Registers as seen from the current mode, plus the other banks.

    ``r`` is mutated in place on mode switches so emitted code may keep a
    local alias to it. Flags are stored unpacked as 0/1 (or bool) values.
    """

    __slots__ = ("r", "n", "z", "c", "v", "mode", "rest", "banks", "spsr", "mem",
                 "pc", "npc", "halted", "fault")

    def __init__(self, mem: Memory | None = None, mode: int = SVC, pc: int = 0):
        self.r = [0] * 16
        self.n = self.z = self.c = self.v = 0
        self.mode = mode
        self.rest = I_BIT | 0x40  # IRQ and FIQ masked at reset
        self.banks = {g: [0, 0] for g in set(_GROUP.values())}
        self.spsr = {m: 0 for m in VALID_MODES if m not in (USR, SYS)}
        self.mem = mem if mem is not None else Memory()
        self.pc = pc
        self.npc = pc
        self.halted = False
        self.fault: tuple | None = None

    # -- status registers ----------------------------------------------------
    def get_cpsr(self) -> int:
        return (bool(self.n) << 31 | bool(self.z) << 30 | bool(self.c) << 29 | bool(self.v) << 28
                | self.rest | self.mode)

    def set_cpsr(self, value: int) -> None:
        mode = value & 0x1F
        if mode not in VALID_MODES:
            raise UnpredictableError(f"CPSR write selects invalid mode 0x{mode:02X}")
        self.n, self.z = value >> 31 & 1, value >> 30 & 1
        self.c, self.v = value >> 29 & 1, value >> 28 & 1
        self.rest = value & 0x0FFFFFE0
        self.switch_mode(mode)

    def has_spsr(self) -> bool:
        return self.mode not in (USR, SYS)

    def get_spsr(self) -> int:
        if not self.has_spsr():
            raise UnpredictableError("SPSR read in a mode without one")
        return self.spsr[self.mode]

    def set_spsr(self, value: int) -> None:
        if not self.has_spsr():
            raise UnpredictableError("SPSR write in a mode without one")
        self.spsr[self.mode] = value & MASK

    def switch_mode(self, mode: int) -> None:
        old, new = _GROUP[self.mode], _GROUP[mode]
        if old != new:
            r = self.r
            self.banks[old][0], self.banks[old][1] = r[13], r[14]
            r[13], r[14] = self.banks[new]
        self.mode = mode

    # -- banked access -------------------------------------------------------
    def read_banked(self, index: int, mode: int) -> int:
        if mode not in VALID_MODES:
            raise UnpredictableError(f"banked access to invalid mode 0x{mode:02X}")
        if index in BANKED and _GROUP[mode] != _GROUP[self.mode]:
            return self.banks[_GROUP[mode]][index - 13]
        return self.r[index]

    def write_banked(self, index: int, mode: int, value: int) -> None:
        if mode not in VALID_MODES:
            raise UnpredictableError(f"banked access to invalid mode 0x{mode:02X}")
        if index in BANKED and _GROUP[mode] != _GROUP[self.mode]:
            self.banks[_GROUP[mode]][index - 13] = value & MASK
        elif index == 15:
            self.npc = value & MASK
        else:
            self.r[index] = value & MASK

    # -- exceptions ----------------------------------------------------------
    def enter_exception(self, mode: int, vector: int, return_addr: int) -> None:
        saved = self.get_cpsr()
        self.switch_mode(mode)
        self.spsr[mode] = saved
        self.r[14] = return_addr & MASK
        self.rest |= I_BIT
        self.pc = self.npc = vector

    def snapshot(self) -> dict:
        """Comparable architectural view (flags normalised to 0/1)."""
        banks = {g: list(v) for g, v in self.banks.items()}
        banks[_GROUP[self.mode]] = [self.r[13], self.r[14]]
        regs = list(self.r[:15]) + [self.pc]
        return {"regs": regs, "cpsr": self.get_cpsr(), "banks": banks, "spsr": dict(self.spsr),
                "halted": self.halted, "fault": self.fault, "mem": self.mem.digest()}

    def copy(self) -> "CpuState":
        s = CpuState(self.mem.copy(), self.mode, self.pc)
        s.r = list(self.r)
        s.n, s.z, s.c, s.v = self.n, self.z, self.c, self.v
        s.rest = self.rest
        s.banks = {g: list(v) for g, v in self.banks.items()}
        s.spsr = dict(self.spsr)
        s.npc, s.halted, s.fault = self.npc, self.halted, self.fault
        return s
