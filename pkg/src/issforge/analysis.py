"""May-branch analysis: when can an instruction write the program counter?"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import ast as A
from .errors import DescriptionError
from .ir import FlatInstruction
from .pcparse import parse_expression
from .simplify import is_static, negate, nnf, simplify

log = logging.getLogger(__name__)

PC_INDEX = 15


@dataclass
class BranchReport:
    records: list[tuple[str, A.Expr]] = field(default_factory=list)
    condition: A.Expr = A.FALSE
    override: str | None = None  # 'always' | 'never' | expression text
    warnings: list[str] = field(default_factory=list)


def read_overrides(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise DescriptionError("expected 'NAME always|never|<expr>'", None, lineno, 1, "overrides.mb")
        out[parts[0]] = parts[1].strip()
    return out


def load_overrides(path: str | Path) -> dict[str, str]:
    p = Path(path)
    return read_overrides(p.read_text(encoding="utf-8")) if p.exists() else {}


def _staticize(cond: A.Expr, params: set[str]) -> A.Expr:
    """Over-approximate: atoms that depend on run-time state become true."""
    c = nnf(cond)

    def go(e):
        if isinstance(e, A.BinOp) and e.op in ("and", "or"):
            return A.BinOp(e.op, go(e.left), go(e.right))
        return e if is_static(e, params) else A.TRUE
    return go(c)


def _lookup_override(fi: FlatInstruction, overrides: dict[str, str]) -> str | None:
    for key in (fi.name, fi.generic, fi.instr):
        if key in overrides:
            return overrides[key]
    return None


def may_branch(fi: FlatInstruction, overrides: dict[str, str] | None = None) -> BranchReport:
    report = BranchReport()
    params = {p.name for p in fi.fields} | {n for n, _ in fi.computed}
    ov = _lookup_override(fi, overrides or {})
    if ov is not None:
        report.override = ov
        if ov == "always":
            report.condition = A.TRUE
        elif ov == "never":
            report.condition = A.FALSE
        else:
            report.condition = simplify(parse_expression(ov), fi.constraints)
        return report

    contributions: list[A.Expr] = []

    def visit(body, path: list[A.Expr], loops: dict[str, tuple[A.Expr, A.Expr]]):
        for s in body:
            if isinstance(s, A.Assign) and isinstance(s.lhs, A.Reg):
                c = _reg_write(s.lhs.index, path, loops)
                if c is not None:
                    report.records.append((A.format_expr(s.lhs), c))
                    contributions.append(c)
            elif isinstance(s, A.If):
                visit(s.then, path + [s.cond], loops)
                visit(s.orelse, path + [negate(s.cond)], loops)
            elif isinstance(s, A.For):
                visit(s.body, path, dict(loops, **{s.var: (s.lo, s.hi)}))

    def _reg_write(index: A.Expr, path, loops) -> A.Expr | None:
        if isinstance(index, A.Num):
            return A.conj(path) if index.value == PC_INDEX else None
        if isinstance(index, A.Var) and index.name in loops:
            lo, hi = loops[index.name]
            if not (isinstance(lo, A.Num) and isinstance(hi, A.Num)):
                return _unknown(index)
            if not lo.value <= PC_INDEX <= hi.value:
                return None
            at15, _ = A.replace_exp(tuple(path), A.Var(index.name), A.Num(PC_INDEX))
            return A.conj(at15)
        if isinstance(index, A.Var) and index.name in params:
            return A.conj(path + [A.BinOp("==", index, A.Num(PC_INDEX))])
        return _unknown(index)

    def _unknown(index) -> A.Expr:
        msg = f"{fi.name}: cannot classify register index {A.format_expr(index)}; assuming a branch"
        report.warnings.append(msg)
        log.warning(msg)
        return A.TRUE

    visit(fi.ast.body, [], {})
    raw = A.disj(_staticize(c, params) for c in contributions)
    report.condition = simplify(raw, fi.constraints)
    return report


def annotate(flats: list[FlatInstruction], overrides: dict[str, str] | None = None
             ) -> dict[str, BranchReport]:
    """Set ``may_branch`` on every flat instruction; returns the reports."""
    reports = {}
    for fi in flats:
        rep = may_branch(fi, overrides)
        fi.may_branch = rep.condition
        reports[fi.name] = rep
    return reports
