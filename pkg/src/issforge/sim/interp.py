"""Direct AST interpreter. Slow on purpose: it is the reference the emitted
simulator is checked against."""

from __future__ import annotations

from .. import ast as A
from ..ir import FlatInstruction
from ..semantics import BINOPS, MASK, PURE_FUNCS, UNOPS, bits, condition_passed
from .state import CpuState, UnpredictableError

_FLAG_ATTR = {"N": "n", "Z": "z", "C": "c", "V": "v"}


class _Frame:
    __slots__ = ("s", "env")

    def __init__(self, s: CpuState, env: dict):
        self.s = s
        self.env = env

    def ev(self, e) -> int:
        t = type(e)
        if t is A.Num:
            return e.value
        if t is A.Var:
            if e.name == "CPSR":
                return self.s.get_cpsr()
            if e.name == "SPSR":
                return self.s.get_spsr()
            return self.env[e.name]
        if t is A.BinOp:
            if e.op == "and":
                return int(bool(self.ev(e.left)) and bool(self.ev(e.right)))
            if e.op == "or":
                return int(bool(self.ev(e.left)) or bool(self.ev(e.right)))
            return BINOPS[e.op](self.ev(e.left), self.ev(e.right))
        if t is A.UnOp:
            return UNOPS[e.op](self.ev(e.operand))
        if t is A.Reg:
            idx = self.ev(e.index)
            if e.mode is None:
                return self.s.r[idx]
            return self.s.read_banked(idx, self.ev(e.mode))
        if t is A.FlagRef:
            return int(bool(getattr(self.s, _FLAG_ATTR[e.flag])))
        if t is A.Memory:
            return self.s.mem.read(self.ev(e.addr), e.size)
        if t is A.BitRange:
            return bits(self.ev(e.expr), self.ev(e.hi), self.ev(e.lo))
        if t is A.Fun:
            if e.name == "ConditionPassed":
                s = self.s
                return condition_passed(self.ev(e.args[0]), s.n, s.z, s.c, s.v)
            if e.name == "CurrentModeHasSPSR":
                return int(self.s.has_spsr())
            return PURE_FUNCS[e.name](*(self.ev(a) for a in e.args))
        raise TypeError(f"cannot evaluate {e!r}")

    def store(self, lhs, v: int) -> None:
        s = self.s
        t = type(lhs)
        if t is A.Var:
            if lhs.name == "CPSR":
                s.set_cpsr(v & MASK)
            elif lhs.name == "SPSR":
                s.set_spsr(v)
            else:
                self.env[lhs.name] = v
        elif t is A.Reg:
            idx = self.ev(lhs.index)
            if lhs.mode is not None:
                s.write_banked(idx, self.ev(lhs.mode), v)
            elif idx == 15:
                s.npc = v & MASK
            else:
                s.r[idx] = v & MASK
        elif t is A.FlagRef:
            setattr(s, _FLAG_ATTR[lhs.flag], 1 if v else 0)
        elif t is A.Memory:
            s.mem.write(self.ev(lhs.addr), lhs.size, v)
        elif t is A.BitRange:
            hi, lo = self.ev(lhs.hi), self.ev(lhs.lo)
            m = ((1 << (hi - lo + 1)) - 1) << lo
            old = self.ev(lhs.expr)
            self.store(lhs.expr, (old & ~m) | ((v << lo) & m))
        else:
            raise TypeError(f"cannot assign to {lhs!r}")

    def run(self, body) -> None:
        for st in body:
            t = type(st)
            if t is A.Assign:
                self.store(st.lhs, self.ev(st.rhs))
            elif t is A.If:
                self.run(st.then if self.ev(st.cond) else st.orelse)
            elif t is A.For:
                for i in range(self.ev(st.lo), self.ev(st.hi) + 1):
                    self.env[st.var] = i
                    self.run(st.body)
            elif t is A.Call:
                if st.name == "Halt":
                    self.s.halted = True
                else:
                    raise TypeError(f"unknown procedure {st.name}")
            elif t is A.Unpredictable:
                raise UnpredictableError("UNPREDICTABLE statement reached")
            elif t is A.Nop:
                pass
            else:
                raise TypeError(f"cannot execute {st!r}")


def interpret(fi: FlatInstruction, params: dict[str, int], state: CpuState) -> CpuState:
    """Execute ``fi`` on ``state`` in place.

    The caller sets ``state.r[15]`` to the instruction address plus 8 and
    ``state.npc`` to the fall-through address; writes to the PC land in
    ``state.npc``.
    """
    _Frame(state, dict(params)).run(fi.ast.body)
    return state
