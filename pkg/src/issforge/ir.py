"""Linked intermediate representation of an instruction-set description."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

from . import ast as A
from .errors import LinkError

# name -> (arity, kind). kind: 'pure' functions of their arguments, 'state'
# reads processor state, 'symbolic' takes an unevaluated +/- expression,
# 'proc' is a statement-only procedure.
BUILTINS: dict[str, tuple[int, str]] = {
    "ConditionPassed": (1, "state"),
    "CurrentModeHasSPSR": (0, "state"),
    "CarryFrom": (1, "symbolic"),
    "OverflowFrom": (1, "symbolic"),
    "BorrowFrom": (1, "symbolic"),
    "SignedSat": (2, "symbolic"),
    "CarryFromAdd2": (2, "pure"),
    "CarryFromAdd3": (3, "pure"),
    "OverflowFromAdd2": (2, "pure"),
    "OverflowFromAdd3": (3, "pure"),
    "CarryFromSub2": (2, "pure"),
    "CarryFromSub3": (3, "pure"),
    "BorrowFromSub2": (2, "pure"),
    "BorrowFromSub3": (3, "pure"),
    "OverflowFromSub2": (2, "pure"),
    "OverflowFromSub3": (3, "pure"),
    "SignedSatAdd2": (3, "pure"),
    "SignedSatSub2": (3, "pure"),
    "NbOfSetBitsIn": (1, "pure"),
    "SignExtend": (2, "pure"),
    "ZeroExtend": (1, "pure"),
    "Halt": (0, "proc"),
}

# Names that denote processor state rather than parameters or locals.
STATE_NAMES = frozenset({"CPSR", "SPSR"})

_REG_FIELD = re.compile(r"^R([a-z][A-Za-z0-9_]*)$")


def param_name(label: str) -> str:
    """Encoding field label -> parameter name (``Rd`` holds index ``d``)."""
    m = _REG_FIELD.match(label)
    return m.group(1) if m else label


def is_register_field(label: str) -> bool:
    return bool(_REG_FIELD.match(label))


# -- encodings ---------------------------------------------------------------

class EncField(NamedTuple):
    hi: int
    lo: int
    const: str | None = None   # bit string, msb first
    label: str | None = None   # parameter field label as written (e.g. "Rd")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    @property
    def param(self) -> str | None:
        return param_name(self.label) if self.label is not None else None

    def text(self) -> str:
        rng = f"{self.hi}" if self.hi == self.lo else f"{self.hi}..{self.lo}"
        return f"{rng} {self.const if self.const is not None else self.label}"


@dataclass(frozen=True)
class EncodingTable:
    fields: tuple[EncField, ...]
    width: int = 32

    @property
    def mask(self) -> int:
        m = 0
        for f in self.fields:
            if f.const is not None:
                m |= ((1 << f.width) - 1) << f.lo
        return m

    @property
    def value(self) -> int:
        v = 0
        for f in self.fields:
            if f.const is not None:
                v |= int(f.const, 2) << f.lo
        return v

    def params(self) -> list[EncField]:
        return [f for f in self.fields if f.label is not None]

    def param_field(self, name: str) -> EncField | None:
        for f in self.fields:
            if f.label is not None and f.param == name:
                return f
        return None

    def matches(self, word: int) -> bool:
        return (word & self.mask) == self.value

    def extract(self, word: int) -> dict[str, int]:
        return {f.param: (word >> f.lo) & ((1 << f.width) - 1)
                for f in self.fields if f.label is not None}

    def encode(self, values: dict[str, int]) -> int:
        word = self.value
        for f in self.fields:
            if f.label is not None:
                v = values[f.param]
                if v >> f.width:
                    raise ValueError(f"value {v} does not fit field {f.label} ({f.width} bits)")
                word |= v << f.lo
        return word

    def text(self) -> str:
        return " | ".join(f.text() for f in self.fields)


# -- syntax ------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    text: str


@dataclass(frozen=True)
class Hole:
    name: str


@dataclass(frozen=True)
class Opt:
    elements: tuple
    control: str


@dataclass(frozen=True)
class SyntaxTemplate:
    mnemonic: str
    elements: tuple  # of Lit | Hole | Opt

    def placeholders(self) -> list[str]:
        out = []

        def go(elems):
            for e in elems:
                if isinstance(e, Hole):
                    out.append(e.name)
                elif isinstance(e, Opt):
                    go(e.elements)
        go(self.elements)
        return out

    def text(self) -> str:
        def go(elems):
            s = ""
            for e in elems:
                if isinstance(e, Lit):
                    s += e.text
                elif isinstance(e, Hole):
                    s += f"<{e.name}>"
                else:
                    inner = go(e.elements)
                    implied = _implied_control(e.elements)
                    s += "{" + inner + ("" if implied == e.control else f"?{e.control}") + "}"
            return s
        return self.mnemonic + go(self.elements)


def _implied_control(elements) -> str | None:
    holes = [e for e in elements if isinstance(e, Hole)]
    if holes:
        return param_name(holes[0].name)
    if len(elements) == 1 and isinstance(elements[0], Lit):
        return elements[0].text
    return None


# -- constraints -------------------------------------------------------------

@dataclass(frozen=True)
class NotEqualValue:
    param: str
    value: int

    def holds(self, v: dict[str, int]) -> bool:
        return v[self.param] != self.value

    def text(self) -> str:
        return f"R{self.param} != {self.value}" if _looks_reg(self.param) else f"{self.param} != {self.value}"


@dataclass(frozen=True)
class ParamsDiffer:
    a: str
    b: str

    def holds(self, v: dict[str, int]) -> bool:
        return v[self.a] != v[self.b]

    def text(self) -> str:
        return f"R{self.a} != R{self.b}"


@dataclass(frozen=True)
class NotIn:
    param: str
    values: frozenset[int]

    def holds(self, v: dict[str, int]) -> bool:
        return v[self.param] not in self.values

    def text(self) -> str:
        return f"{self.param} notin {{{', '.join(map(str, sorted(self.values)))}}}"


@dataclass(frozen=True)
class RegNotInList:
    """Register index ``param`` must not be a set bit of ``reglist``."""
    param: str
    reglist: str

    def holds(self, v: dict[str, int]) -> bool:
        return not (v[self.reglist] >> v[self.param]) & 1

    def text(self) -> str:
        return f"R{self.param} notin {self.reglist}"


def _looks_reg(p: str) -> bool:
    return len(p) == 1 and p.islower()


Constraint = NotEqualValue | ParamsDiffer | NotIn | RegNotInList


@dataclass(frozen=True)
class ValidityConstraint:
    subject: str
    kind: Constraint

    def params(self) -> list[str]:
        k = self.kind
        if isinstance(k, ParamsDiffer):
            return [k.a, k.b]
        if isinstance(k, RegNotInList):
            return [k.param, k.reglist]
        return [k.param]

    def holds(self, values: dict[str, int]) -> bool:
        return self.kind.holds(values)

    def text(self) -> str:
        return f"{self.subject}: {self.kind.text()}"


# -- units -------------------------------------------------------------------

@dataclass
class ModeCase:
    name: str
    family: str
    ast: A.Block
    encoding: EncodingTable
    syntax: SyntaxTemplate
    constraints: list[ValidityConstraint] = field(default_factory=list)
    writeback: int | None = None  # index of the write-back statement in ast.body
    decl_index: int = 0


@dataclass
class InstrUnit:
    name: str
    ast: A.Block
    encoding: EncodingTable
    syntax: SyntaxTemplate
    constraints: list[ValidityConstraint] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    family: str | None = None
    patch: str | None = None
    decl_index: int = 0


@dataclass
class IsaDescription:
    instructions: list[InstrUnit]
    modes: list[ModeCase]
    families: dict[str, list[str]]
    patches: dict[str, list[tuple[A.Node, A.Node]]] = field(default_factory=dict)
    builtins: dict[str, tuple[int, str]] = field(default_factory=lambda: dict(BUILTINS))
    warnings: list[str] = field(default_factory=list)

    def instruction(self, name: str) -> InstrUnit:
        for i in self.instructions:
            if i.name == name:
                return i
        raise KeyError(name)

    def mode(self, name: str) -> ModeCase:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)

    def family_outputs(self, family: str) -> set[str]:
        """Locals assigned by every case of a mode family."""
        out: set[str] | None = None
        for case in self.families[family]:
            names = set(free_vars(self.mode(case).ast, set())["locals"])
            out = names if out is None else out & names
        return out or set()

    def dump(self) -> str:
        lines = [f"# {len(self.instructions)} instructions, {len(self.modes)} mode cases", ""]
        for fam, cases in self.families.items():
            lines.append(f"family {fam}: {', '.join(cases)}")
        lines.append("")
        for m in self.modes:
            lines.append(f"Mode {m.name} for {m.family}" + (" writeback" if m.writeback is not None else ""))
            lines.append(f"  encoding: {m.encoding.text()}")
            lines.append(f"  syntax:   {m.syntax.text()}")
            for c in m.constraints:
                lines.append(f"  constraint: {c.kind.text()}")
            lines.append(A.format_block(m.ast, 4))
            lines.append("")
        for i in self.instructions:
            extra = f" modes [{', '.join(i.modes)}]" if i.modes else ""
            extra += f" patch {i.patch}" if i.patch else ""
            lines.append(f"Instruction {i.name}{extra}")
            lines.append(f"  encoding: {i.encoding.text()}")
            lines.append(f"  syntax:   {i.syntax.text()}")
            for c in i.constraints:
                lines.append(f"  constraint: {c.kind.text()}")
            lines.append(A.format_block(i.ast, 4))
            lines.append("")
        return "\n".join(lines)


# -- flattened instructions --------------------------------------------------

class Param(NamedTuple):
    name: str
    width: int
    signed: bool = False


@dataclass
class FlatInstruction:
    name: str
    instr: str
    mode: str | None
    ast: A.Block
    encoding: EncodingTable
    syntax: SyntaxTemplate
    constraints: list[ValidityConstraint]
    constants: dict[str, int] = field(default_factory=dict)
    params: list[Param] = field(default_factory=list)
    fields: list[Param] = field(default_factory=list)  # every decode-time value
    locals: list[str] = field(default_factory=list)
    computed: list[tuple[str, A.Expr]] = field(default_factory=list)
    may_branch: A.Expr = A.TRUE
    weight: int = 0
    predicate: dict[str, int] = field(default_factory=dict)
    generic: str = ""
    mode_len: int = 0
    writeback: int | None = None
    decl_index: int = 0

    def __post_init__(self):
        if not self.generic:
            self.generic = self.name

    @property
    def is_variant(self) -> bool:
        return bool(self.predicate)

    def decode_fields(self, word: int) -> dict[str, int]:
        """All decode-time values: encoding fields then pre-computed params."""
        from .simplify import evaluate_static
        values = self.encoding.extract(word)
        for name, expr in self.computed:
            values[name] = evaluate_static(expr, values)
        return values

    def constraints_hold(self, values: dict[str, int]) -> bool:
        return all(c.holds(values) for c in self.constraints)

    def predicate_holds(self, values: dict[str, int]) -> bool:
        return all(values[k] == v for k, v in self.predicate.items())


# -- free variables ----------------------------------------------------------

def free_vars(ast, params: set[str], provided: set[str] = frozenset(),
              unit: str | None = None, strict: bool = False) -> dict[str, list[str]]:
    """Partition the names used by ``ast`` into params, locals and builtins.

    A name is a local iff its first occurrence (in execution order) is as an
    assignment target or a loop variable. ``provided`` names are values a mode
    family computes for the instruction that uses it.
    """
    seen_params: list[str] = []
    seen_locals: list[str] = []
    seen_builtins: list[str] = []
    unbound: list[str] = []
    bound: set[str] = set()

    def note(lst, name):
        if name not in lst:
            lst.append(name)

    def use(name):
        if name in bound:
            return
        if name in params:
            note(seen_params, name)
        elif name in STATE_NAMES:
            note(seen_builtins, name)
        elif name in provided:
            pass
        else:
            note(unbound, name)

    def expr(e):
        for n in A.walk(e):
            if isinstance(n, A.Var):
                use(n.name)
            elif isinstance(n, A.Fun):
                note(seen_builtins, n.name)

    def assign_target(lhs):
        if isinstance(lhs, A.Var):
            if lhs.name in STATE_NAMES:
                note(seen_builtins, lhs.name)
            elif lhs.name not in params or lhs.name in provided:
                if lhs.name not in bound:
                    bound.add(lhs.name)
                    note(seen_locals, lhs.name)
        elif isinstance(lhs, A.Reg):
            expr(lhs.index)
            if lhs.mode is not None:
                expr(lhs.mode)
        elif isinstance(lhs, A.Memory):
            expr(lhs.addr)
        elif isinstance(lhs, A.BitRange):
            expr(lhs.hi)
            expr(lhs.lo)
            if isinstance(lhs.expr, A.Var):
                use(lhs.expr.name)
            assign_target(lhs.expr)

    def stmts(body):
        for s in body:
            if isinstance(s, A.Assign):
                expr(s.rhs)
                assign_target(s.lhs)
            elif isinstance(s, A.If):
                expr(s.cond)
                stmts(s.then)
                stmts(s.orelse)
            elif isinstance(s, A.For):
                expr(s.lo)
                expr(s.hi)
                if s.var not in bound:
                    bound.add(s.var)
                    note(seen_locals, s.var)
                stmts(s.body)
            elif isinstance(s, A.Call):
                note(seen_builtins, s.name)
                for a in s.args:
                    expr(a)

    body = ast.body if isinstance(ast, A.Block) else (ast if isinstance(ast, tuple) else (ast,))
    if body and not isinstance(body[0], (A.Assign, A.If, A.For, A.Call, A.Unpredictable, A.Nop)):
        expr(body[0])
    else:
        stmts(body)
    if unbound and strict:
        raise LinkError(f"unbound identifier{'s' if len(unbound) > 1 else ''} "
                        f"{', '.join(unbound)}" + (f" in {unit}" if unit else ""))
    return {"params": seen_params, "locals": seen_locals, "builtins": seen_builtins,
            "unbound": unbound}
