"""Emit the fast simulator as Python source.

The generated tree holds one parameter-record type per distinct runtime
parameter list, one semantics routine per flat instruction (specialized
variants included), the two-phase decoder, the assembly printer and the
may-branch evaluators. It imports only the runtime support in
``issforge.sim`` and ``issforge.semantics``.
"""

from __future__ import annotations

import keyword
import sys
import types
import warnings
from dataclasses import dataclass

from .. import ast as A
from ..errors import GeneratorError
from ..ir import FlatInstruction, Hole, Lit, NotEqualValue, NotIn, Opt, ParamsDiffer, \
    RegNotInList, param_name
from ..semantics import ALWAYS, MASK, PURE_FUNCS
from ..simplify import fold_stmts
from .decoder import BUCKET_MASK, BUCKET_SHIFT, DecoderSpec
from .render import render_value

_RESERVED = {"s", "r", "p", "w", "f"} | set(keyword.kwlist) | {"bin", "int", "bool", "str", "range"}
M = f"0x{MASK:X}"


def py_name(name: str) -> str:
    return f"v_{name}" if name in _RESERVED or name.startswith("_") else name


def _bool_expr(e) -> bool:
    from ..simplify import is_boolean
    return is_boolean(e)


def _simple(code: str) -> bool:
    return code.replace("_", "").replace("[", "").replace("]", "").replace(".", "").isalnum()


# -- dead locals -------------------------------------------------------------

def _reads(body) -> set[str]:
    names: set[str] = set()
    for n in A.walk(body):
        if isinstance(n, A.Assign):
            lhs = n.lhs
            # the assigned variable itself is not a read; its sub-expressions are
            if not isinstance(lhs, A.Var):
                for m in A.walk(lhs):
                    if isinstance(m, A.Var) and m is not lhs:
                        names.add(m.name)
            for m in A.walk(n.rhs):
                if isinstance(m, A.Var):
                    names.add(m.name)
        elif isinstance(n, (A.If,)):
            names |= {m.name for m in A.walk(n.cond) if isinstance(m, A.Var)}
        elif isinstance(n, A.For):
            names |= {m.name for m in A.walk((n.lo, n.hi)) if isinstance(m, A.Var)}
        elif isinstance(n, A.Call):
            names |= {m.name for m in A.walk(n.args) if isinstance(m, A.Var)}
    return names


def drop_dead_locals(body: tuple, locals_: set[str]) -> tuple:
    """Remove assignments to locals that are never read (no memory reads)."""
    while True:
        read = _reads(body)
        dead = {n for n in locals_ if n not in read}

        def go(stmts):
            out = []
            for s in stmts:
                if isinstance(s, A.Assign) and isinstance(s.lhs, A.Var) and s.lhs.name in dead \
                        and not A.contains(s.rhs, lambda n: isinstance(n, A.Memory)):
                    continue
                if isinstance(s, A.If):
                    s = A.If(s.cond, tuple(go(s.then)), tuple(go(s.orelse)))
                elif isinstance(s, A.For):
                    s = A.For(s.var, s.lo, s.hi, tuple(go(s.body)))
                out.append(s)
            return out
        new = fold_stmts(tuple(go(body)))
        if new == body:
            return body
        body = new


# -- expressions -------------------------------------------------------------

class _Routine:
    def __init__(self, fi: FlatInstruction, loop_ranges=None):
        self.fi = fi
        self.widths = {p.name: p.width for p in fi.fields}
        for name, _ in fi.computed:
            self.widths[name] = 32
        self.params = {p.name for p in fi.params}
        self.not15 = {k.param for k in (c.kind for c in fi.constraints)
                      if isinstance(k, NotEqualValue) and k.value == 15}
        self.loops: dict[str, tuple[int, int]] = dict(loop_ranges or {})
        self.lines: list[str] = []
        self.tmp = 0

    # value bounds, used to decide when a shift may be inlined
    def bound(self, e) -> int | None:
        if isinstance(e, A.Num):
            return e.value
        if isinstance(e, A.Var):
            if e.name in self.loops:
                return self.loops[e.name][1]
            w = self.widths.get(e.name)
            return (1 << w) - 1 if w is not None else None
        if isinstance(e, A.BinOp) and e.op in ("*", "+"):
            a, b = self.bound(e.left), self.bound(e.right)
            if a is None or b is None:
                return None
            return a * b if e.op == "*" else a + b
        if isinstance(e, A.BitRange) and isinstance(e.hi, A.Num) and isinstance(e.lo, A.Num):
            return (1 << (e.hi.value - e.lo.value + 1)) - 1
        return None

    def ex(self, e, cond: bool = False) -> str:
        t = type(e)
        if t is A.Num:
            return str(e.value) if e.value < 256 else f"0x{e.value:X}"
        if t is A.Var:
            if e.name == "CPSR":
                return "s.get_cpsr()"
            if e.name == "SPSR":
                return "s.get_spsr()"
            return py_name(e.name)
        if t is A.FlagRef:
            return f"s.{e.flag.lower()}"
        if t is A.Reg:
            if e.mode is not None:
                return f"s.read_banked({self.ex(e.index)}, {self.ex(e.mode)})"
            return f"r[{self.ex(e.index)}]"
        if t is A.Memory:
            addr = self.ex(e.addr)
            return {4: f"s.mem.read32({addr})", 2: f"s.mem.read16({addr})",
                    1: f"s.mem.read8({addr})"}[e.size]
        if t is A.BitRange:
            v = self.ex(e.expr)
            if e.hi == e.lo:
                return f"({v} >> {self.ex(e.lo)} & 1)"
            if isinstance(e.hi, A.Num) and isinstance(e.lo, A.Num):
                width = e.hi.value - e.lo.value + 1
                shifted = v if e.lo.value == 0 else f"{v} >> {e.lo.value}"
                return f"({shifted} & 0x{(1 << width) - 1:X})"
            return f"_bits({v}, {self.ex(e.hi)}, {self.ex(e.lo)})"
        if t is A.UnOp:
            v = self.ex(e.operand, cond and e.op == "not")
            if e.op == "not":
                return f"(not {v})"
            if e.op == "NOT":
                return f"(~{v} & {M})"
            return f"(-{v} & {M})"
        if t is A.BinOp:
            return self.binop(e, cond)
        if t is A.Fun:
            return self.fun(e)
        raise GeneratorError(f"{self.fi.name}: no translation for {e!r}")

    def chain(self, e) -> str:
        """Unmasked +/- chain; the caller masks the result once."""
        if isinstance(e, A.BinOp) and e.op in ("+", "-"):
            return f"{self.chain(e.left)} {e.op} {self.chain_operand(e.right)}"
        return self.ex(e)

    def chain_operand(self, e) -> str:
        if isinstance(e, A.BinOp) and e.op in ("+", "-"):
            return f"({self.chain(e)})"
        return self.ex(e)

    def binop(self, e, cond: bool) -> str:
        op = e.op
        if op in ("and", "or"):
            code = f"({self.ex(e.left, True)} {op} {self.ex(e.right, True)})"
            if cond or (_bool_expr(e.left) and _bool_expr(e.right)):
                return code
            return f"bool{code}"
        if op in ("+", "-"):
            return f"(({self.chain(e)}) & {M})"
        a, b = self.ex(e.left), self.ex(e.right)
        if op == "*":
            return f"({a} * {b} & {M})"
        if op in A.COMPARISONS:
            return f"({a} {op} {b})"
        if op in ("AND", "OR", "EOR"):
            return f"({a} {dict(AND='&', OR='|', EOR='^')[op]} {b})"
        bound = self.bound(e.right)
        small = bound is not None and bound < 32
        if op in ("LSL", "<<"):
            return f"({a} << {b} & {M})" if small else f"_lsl({a}, {b})"
        if op in ("LSR", ">>"):
            return f"({a} >> {b})" if small else f"_lsr({a}, {b})"
        if op == "ASR":
            return f"_asr({a}, {b})"
        if op == "ROR":
            if small and _simple(a) and _simple(b):
                return f"(({a} >> {b} | {a} << (32 - {b})) & {M})"
            return f"_ror({a}, {b})"
        raise GeneratorError(f"{self.fi.name}: no translation for operator {op}")

    def fun(self, e: A.Fun) -> str:
        args = [self.ex(a) for a in e.args]
        name = e.name
        if name == "ConditionPassed":
            return f"_CP[{args[0]}][s.n << 3 | s.z << 2 | s.c << 1 | s.v]"
        if name == "CurrentModeHasSPSR":
            return "s.has_spsr()"
        if name in ("CarryFromAdd2", "CarryFromAdd3"):
            return f"({' + '.join(args)} > {M})"
        if name == "BorrowFromSub2":
            return f"({args[0]} < {args[1]})"
        if name == "CarryFromSub2":
            return f"({args[0]} >= {args[1]})"
        if name == "NbOfSetBitsIn":
            return f"bin({args[0]}).count('1')"
        if name == "SignExtend" and isinstance(e.args[1], A.Num) and \
                (self.bound(e.args[0]) or 0) < (1 << e.args[1].value):
            h = 1 << (e.args[1].value - 1)
            return f"(({args[0]} ^ 0x{h:X}) - 0x{h:X} & {M})"
        if name == "ZeroExtend":
            return args[0]
        return f"_f_{name}({', '.join(args)})"

    # -- statements ----------------------------------------------------------
    def emit(self, line: str, depth: int) -> None:
        self.lines.append("    " * depth + line)

    def store(self, lhs, value: str, depth: int) -> None:
        t = type(lhs)
        if t is A.Var:
            if lhs.name == "CPSR":
                self.emit(f"s.set_cpsr({value})", depth)
            elif lhs.name == "SPSR":
                self.emit(f"s.set_spsr({value})", depth)
            else:
                self.emit(f"{py_name(lhs.name)} = {value}", depth)
        elif t is A.FlagRef:
            self.emit(f"s.{lhs.flag.lower()} = {value}", depth)
        elif t is A.Memory:
            addr = self.ex(lhs.addr)
            fn = {4: "write32", 2: "write16", 1: "write8"}[lhs.size]
            self.emit(f"s.mem.{fn}({addr}, {value})", depth)
        elif t is A.Reg:
            if lhs.mode is not None:
                self.emit(f"s.write_banked({self.ex(lhs.index)}, {self.ex(lhs.mode)}, {value})", depth)
                return
            idx = lhs.index
            if isinstance(idx, A.Num):
                self.emit("s.npc = " + value if idx.value == 15 else f"r[{idx.value}] = {value}", depth)
                return
            code = self.ex(idx)
            if self.may_be_pc(idx):
                tmp = f"_t{self.tmp}"
                self.tmp += 1
                self.emit(f"{tmp} = {value}", depth)
                self.emit(f"if {code} == 15:", depth)
                self.emit(f"s.npc = {tmp}", depth + 1)
                self.emit("else:", depth)
                self.emit(f"r[{code}] = {tmp}", depth + 1)
            else:
                self.emit(f"r[{code}] = {value}", depth)
        elif t is A.BitRange:
            if not (isinstance(lhs.hi, A.Num) and isinstance(lhs.lo, A.Num)):
                raise GeneratorError(f"{self.fi.name}: dynamic bit-range assignment")
            lo, width = lhs.lo.value, lhs.hi.value - lhs.lo.value + 1
            mask = ((1 << width) - 1) << lo
            old = self.ex(lhs.expr)
            self.store(lhs.expr, f"({old} & 0x{~mask & MASK:X} | ({value}) << {lo} & 0x{mask:X})", depth)
        else:
            raise GeneratorError(f"{self.fi.name}: cannot assign to {lhs!r}")

    def may_be_pc(self, idx) -> bool:
        if isinstance(idx, A.Var):
            if idx.name in self.loops:
                lo, hi = self.loops[idx.name]
                return lo <= 15 <= hi
            return idx.name not in self.not15
        return True

    def block(self, body, depth: int) -> None:
        if not body:
            self.emit("pass", depth)
        for st in body:
            self.stmt(st, depth)

    def stmt(self, st, depth: int, elif_: bool = False) -> None:
        t = type(st)
        if t is A.Assign:
            self.store(st.lhs, self.ex(st.rhs), depth)
        elif t is A.If:
            self.emit(f"{'elif' if elif_ else 'if'} {self.ex(st.cond, True)}:", depth)
            self.block(st.then, depth + 1)
            # in the else branch of `x == 15` the index x is known not to be the PC
            c = st.cond
            known = isinstance(c, A.BinOp) and c.op == "==" and isinstance(c.left, A.Var) \
                and c.right == A.Num(15) and c.left.name not in self.not15
            if known:
                self.not15.add(c.left.name)
            if len(st.orelse) == 1 and isinstance(st.orelse[0], A.If):
                self.stmt(st.orelse[0], depth, elif_=True)
            elif st.orelse:
                self.emit("else:", depth)
                self.block(st.orelse, depth + 1)
            if known:
                self.not15.discard(c.left.name)
        elif t is A.For:
            if not (isinstance(st.lo, A.Num) and isinstance(st.hi, A.Num)):
                raise GeneratorError(f"{self.fi.name}: loop bounds must be constant")
            self.loops[st.var] = (st.lo.value, st.hi.value)
            self.emit(f"for {py_name(st.var)} in range({st.lo.value}, {st.hi.value + 1}):", depth)
            self.block(st.body, depth + 1)
        elif t is A.Call:
            if st.name != "Halt":
                raise GeneratorError(f"{self.fi.name}: no translation for procedure {st.name}")
            self.emit("s.halted = True", depth)
        elif t is A.Unpredictable:
            self.emit("raise _Unpredictable('UNPREDICTABLE statement reached')", depth)
        elif t is A.Nop:
            self.emit("pass", depth)
        else:
            raise GeneratorError(f"{self.fi.name}: no translation for {st!r}")


# -- tree assembly -----------------------------------------------------------

def record_layouts(flats: list[FlatInstruction]) -> dict[tuple[str, ...], str]:
    layouts: dict[tuple[str, ...], str] = {}
    for f in flats:
        key = tuple(p.name for p in f.params)
        if key not in layouts:
            layouts[key] = f"P{len(layouts)}"
    return layouts


def routine_source(fi: FlatInstruction) -> str:
    body = drop_dead_locals(fi.ast.body, set(fi.locals))
    rt = _Routine(fi)
    names = [py_name(p.name) for p in fi.params]
    rt.emit(f"def {fi.name}(s, p):", 0)
    rt.emit(f'"""{fi.name}"""', 1)
    if len(names) == 1:
        rt.emit(f"{names[0]}, = p", 1)
    elif names:
        rt.emit(f"{', '.join(names)} = p", 1)
    n_header = len(rt.lines)
    rt.block(body, 1)
    text = "\n".join(rt.lines[n_header:])
    if "r[" in text:
        rt.lines.insert(n_header, "    r = s.r")
    return "\n".join(rt.lines) + "\n"


def _constraint_code(c, consts: dict[str, str]) -> str:
    k = c.kind
    if isinstance(k, NotEqualValue):
        return f"{py_name(k.param)} != {k.value}"
    if isinstance(k, ParamsDiffer):
        return f"{py_name(k.a)} != {py_name(k.b)}"
    if isinstance(k, NotIn):
        return f"{py_name(k.param)} not in {consts.setdefault(_frozen(k.values), f'_SET{len(consts)}')}"
    if isinstance(k, RegNotInList):
        return f"not ({py_name(k.reglist)} >> {py_name(k.param)} & 1)"
    raise GeneratorError(f"unknown constraint {k!r}")


def _frozen(values) -> str:
    return "frozenset({" + ", ".join(map(str, sorted(values))) + "})"


def _mb_name(fi) -> str:
    return f"mb_{fi.name}"


def maybranch_source(flats: list[FlatInstruction]) -> str:
    out = ['"""May-branch evaluators: true iff the decoded instruction may write the PC."""', "",
           "from .support import *  # noqa: F401,F403", "", ""]
    for fi in flats:
        rt = _Routine(fi)
        args = ", ".join(py_name(p.name) for p in fi.fields) + \
            "".join(f", {py_name(n)}" for n, _ in fi.computed)
        out.append(f"def {_mb_name(fi)}({args}):")
        out.append(f"    # {A.format_expr(fi.may_branch)}")
        out.append(f"    return bool({rt.ex(fi.may_branch, True)})")
        out.append("")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def printer_source(flats: list[FlatInstruction]) -> str:
    out = ['"""Assembly printers, one per generic flat instruction."""', "",
           "from issforge.sim.render import cond_text as _cond, reglist_text as _reglist",
           "from issforge.semantics import to_signed as _signed", "", ""]
    for fi in flats:
        if fi.is_variant:
            continue
        widths = {p.name: p for p in fi.fields}
        names = [py_name(p.name) for p in fi.fields]

        def val(name: str) -> str:
            return py_name(name) if name in widths else str(fi.constants[name])

        def hole(label: str) -> str:
            name = param_name(label)
            if name not in widths:
                p = fi.constants[name]
                return repr(render_value(label, p, 32, False))
            sample = render_value(label, 0, widths[name].width, widths[name].signed)
            v = val(name)
            if sample == "R0":
                return f"'R' + str({v})"
            if name == "cond":
                return f"_cond({v})"
            if name == "U":
                return f"('' if {v} else '-')"
            if name == "reglist":
                return f"_reglist({v})"
            if widths[name].signed:
                return f"str(_signed({v}, {widths[name].width}))"
            return f"str({v})"

        def go(elems) -> str:
            parts = []
            for e in elems:
                if isinstance(e, Lit):
                    parts.append(repr(e.text))
                elif isinstance(e, Hole):
                    parts.append(hole(e.name))
                else:
                    absent = ALWAYS if e.control == "cond" else 0
                    parts.append(f"({go(e.elements)} if {val(param_name(e.control))} != {absent} else '')")
            return " + ".join(parts) if parts else "''"
        out.append(f"def print_{fi.name}(f):")
        if names:
            out.append(f"    {', '.join(names)}{',' if len(names) == 1 else ''} = f")
        body = go(fi.syntax.elements)
        out.append(f"    return {fi.syntax.mnemonic!r} + {body}" if body != "''" else
                   f"    return {fi.syntax.mnemonic!r}")
        out.append("")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def decoder_source(spec: DecoderSpec, layouts: dict[tuple[str, ...], str]) -> str:
    out = ['"""Two-phase decoder: bucket on bits 27..20, then mask/value, constraints,',
           'specialization predicate."""', "",
           "from issforge.sim.runtime import Decoded, UNDEFINED, UNPREDICTABLE",
           "from .support import *  # noqa: F401,F403",
           "from .records import *  # noqa: F401,F403",
           "from .semantics import ROUTINES",
           "from .maybranch import *  # noqa: F401,F403", "", ""]
    consts: dict[str, str] = {}
    header = len(out)
    for c in spec.candidates:
        fi = c.flat
        rt = _Routine(fi)
        out.append(f"def _d{c.index}(w):")
        out.append(f"    # {fi.name}")
        out.append(f"    if w & 0x{c.mask:08X} != 0x{c.value:08X}:")
        out.append("        return None")
        for f in fi.encoding.params():
            shifted = f"w >> {f.lo}" if f.lo else "w"
            out.append(f"    {py_name(f.param)} = {shifted} & 0x{(1 << f.width) - 1:X}")
        checks = [_constraint_code(k, consts) for k in fi.constraints]
        checks += [f"{py_name(k)} == {v}" for k, v in fi.predicate.items()]
        if checks:
            out.append(f"    if not ({' and '.join(checks)}):")
            out.append("        return False")
        for name, expr in fi.computed:
            out.append(f"    {py_name(name)} = {rt.ex(expr)}")
        fields = [py_name(p.name) for p in fi.fields]
        rec = layouts[tuple(p.name for p in fi.params)]
        params = ", ".join(py_name(p.name) for p in fi.params)
        mb_args = ", ".join(fields + [py_name(n) for n, _ in fi.computed])
        stores = A.contains(fi.ast, lambda n: isinstance(n, A.Assign) and isinstance(n.lhs, A.Memory))
        out.append(f"    return Decoded({fi.name!r}, ROUTINES[{fi.name!r}], {rec}({params}), "
                   f"{_mb_name(fi)}({mb_args}), w, ({', '.join(fields)}{',' if len(fields) == 1 else ''}), "
                   f"{stores}, {fi.generic!r})")
        out.append("")
        out.append("")
    out[header:header] = [f"{name} = {value}" for value, name in consts.items()] + ["", ""]
    out.append("_BUCKETS = (")
    for k, idxs in enumerate(spec.buckets):
        out.append(f"    ({''.join(f'_d{i}, ' for i in idxs)}),  # bits 27..20 = 0x{k:02X}")
    out.append(")")
    out.append("")
    out.append("")
    out.append("def decode(w):")
    out.append("    matched = False")
    out.append(f"    for cand in _BUCKETS[w >> {BUCKET_SHIFT} & 0x{BUCKET_MASK:X}]:")
    out.append("        d = cand(w)")
    out.append("        if d:")
    out.append("            return d")
    out.append("        if d is False:")
    out.append("            matched = True")
    out.append("    return UNPREDICTABLE if matched else UNDEFINED")
    out.append("")
    out.append("")
    out.append("def candidates(w):")
    out.append('    """Phase-one candidate names for ``w``."""')
    out.append(f"    return [c.__doc__ or c.__name__ for c in _BUCKETS[w >> {BUCKET_SHIFT} & 0x{BUCKET_MASK:X}]]")
    return "\n".join(out) + "\n"


def records_source(layouts: dict[tuple[str, ...], str]) -> str:
    out = ['"""Parameter records, one per distinct runtime parameter list."""', "",
           "from typing import NamedTuple", "", ""]
    for key, name in layouts.items():
        out.append(f"class {name}(NamedTuple):")
        if not key:
            out.append("    pass")
        for p in key:
            out.append(f"    {py_name(p)}: int")
        out.append("")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def support_source() -> str:
    names = ["_F", "_CP", "_bits", "_Unpredictable", "_lsl", "_lsr", "_asr", "_ror"] + \
        [f"_f_{n}" for n in PURE_FUNCS]
    out = ['"""Helpers shared by the generated modules."""', "",
           "from issforge import semantics as _F",
           "from issforge.semantics import CONDITION_TABLE as _CP, bits as _bits",
           "from issforge.semantics import BINOPS as _OPS",
           "from issforge.sim.state import UnpredictableError as _Unpredictable",
           "", "_lsl, _lsr, _asr, _ror = _OPS['LSL'], _OPS['LSR'], _OPS['ASR'], _OPS['ROR']"]
    out += [f"_f_{name} = _F.PURE_FUNCS[{name!r}]" for name in PURE_FUNCS]
    out += ["", "__all__ = ["] + [f"    {n!r}," for n in names] + ["]"]
    return "\n".join(out) + "\n"


def semantics_source(flats: list[FlatInstruction]) -> str:
    out = ['"""Semantics routines, one per flat instruction."""', "",
           "from .support import *  # noqa: F401,F403", "", ""]
    for fi in flats:
        out.append(routine_source(fi))
        out.append("")
    out.append("ROUTINES = {")
    for fi in flats:
        out.append(f"    {fi.name!r}: {fi.name},")
    out.append("}")
    return "\n".join(out) + "\n"


def init_source(flats: list[FlatInstruction]) -> str:
    generics = {f.name for f in flats if not f.is_variant}
    out = ['"""Generated instruction-set simulator."""', "",
           "from .decoder import candidates, decode  # noqa: F401",
           "from .printer import *  # noqa: F401,F403",
           "from .semantics import ROUTINES  # noqa: F401", "",
           "PRINTERS = {"]
    for f in flats:
        target = f.name if f.name in generics else f.generic
        out.append(f"    {f.name!r}: print_{target},  # noqa: F405")
    out += ["}", "", "",
            "def print_decoded(d):",
            "    return PRINTERS[d.id](d.fields)", ""]
    return "\n".join(out)


@dataclass
class IssSource:
    files: dict[str, str]

    def combined(self) -> str:
        """Single-module form, for loading without touching the file system."""
        order = ["support.py", "records.py", "maybranch.py", "printer.py", "semantics.py", "decoder.py", "__init__.py"]
        parts = []
        for name in order:
            lines = [ln for ln in self.files[name].splitlines() if not ln.startswith("from .")]
            parts.append(f"# ---- {name} ----\n" + "\n".join(lines))
        return "\n\n".join(parts) + "\n"

    @property
    def routine_count(self) -> int:
        return self.files["semantics.py"].count("\ndef ")


def emit_iss(flats: list[FlatInstruction], spec: DecoderSpec) -> IssSource:
    layouts = record_layouts(flats)
    files = {
        "support.py": support_source(),
        "records.py": records_source(layouts),
        "maybranch.py": maybranch_source(flats),
        "printer.py": printer_source(flats),
        "semantics.py": semantics_source(flats),
        "decoder.py": decoder_source(spec, layouts),
        "__init__.py": init_source(flats),
    }
    for name, text in files.items():
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                compile(text, name, "exec")
            except (SyntaxError, Warning) as exc:
                raise GeneratorError(f"generated {name} does not compile cleanly: {exc}") from exc
    return IssSource(files)


_counter = 0


def load_iss(src: IssSource, name: str | None = None) -> types.ModuleType:
    """Execute the generated source as a fresh in-memory module."""
    global _counter
    _counter += 1
    mod = types.ModuleType(name or f"_issforge_generated_{_counter}")
    code = compile(src.combined(), f"<generated {mod.__name__}>", "exec")
    sys.modules[mod.__name__] = mod
    exec(code, mod.__dict__)
    return mod
