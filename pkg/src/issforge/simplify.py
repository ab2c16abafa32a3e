"""Constant folding, static evaluation and the boolean condition simplifier."""

from __future__ import annotations

from . import ast as A
from .ir import BUILTINS, NotEqualValue, NotIn, ParamsDiffer
from .semantics import BINOPS, BOOLEAN_FUNCS, PURE_FUNCS, UNOPS, bits

__all__ = ["NotStatic", "evaluate_static", "is_static", "fold", "fold_stmts",
           "nnf", "negate", "simplify", "is_boolean"]


class NotStatic(Exception):
    """Raised when an expression depends on processor state."""


def evaluate_static(e: A.Expr, values: dict[str, int]) -> int:
    """Evaluate an expression over decode-time values only."""
    if isinstance(e, A.Num):
        return e.value
    if isinstance(e, A.Var):
        try:
            return values[e.name]
        except KeyError:
            raise NotStatic(e.name) from None
    if isinstance(e, A.BinOp):
        if e.op == "and":
            return int(bool(evaluate_static(e.left, values)) and bool(evaluate_static(e.right, values)))
        if e.op == "or":
            return int(bool(evaluate_static(e.left, values)) or bool(evaluate_static(e.right, values)))
        return BINOPS[e.op](evaluate_static(e.left, values), evaluate_static(e.right, values))
    if isinstance(e, A.UnOp):
        return UNOPS[e.op](evaluate_static(e.operand, values))
    if isinstance(e, A.BitRange):
        return bits(evaluate_static(e.expr, values), evaluate_static(e.hi, values),
                    evaluate_static(e.lo, values))
    if isinstance(e, A.Fun):
        if e.name == "ConditionPassed":
            c = evaluate_static(e.args[0], values)
            if c >= 14:
                return 1
            raise NotStatic(e.name)
        fn = PURE_FUNCS.get(e.name)
        if fn is None:
            raise NotStatic(e.name)
        return fn(*(evaluate_static(a, values) for a in e.args))
    raise NotStatic(type(e).__name__)


def is_static(e: A.Expr, params) -> bool:
    """True if ``e`` mentions only ``params``, constants and pure builtins."""
    for n in A.walk(e):
        if isinstance(n, (A.Reg, A.FlagRef, A.Memory)):
            return False
        if isinstance(n, A.Var) and n.name not in params:
            return False
        if isinstance(n, A.Fun) and BUILTINS.get(n.name, (0, ""))[1] != "pure":
            return False
    return True


def is_boolean(e: A.Expr) -> bool:
    if isinstance(e, A.Num):
        return e.value in (0, 1)
    if isinstance(e, A.BinOp):
        return e.op in A.COMPARISONS or e.op in ("and", "or")
    if isinstance(e, A.UnOp):
        return e.op == "not"
    if isinstance(e, A.Fun):
        return e.name in BOOLEAN_FUNCS
    if isinstance(e, A.FlagRef):
        return True
    if isinstance(e, A.BitRange):
        return e.hi == e.lo
    return False


def _has_effects(e: A.Expr) -> bool:
    return A.contains(e, lambda n: isinstance(n, A.Memory))


def _fold_node(e):
    if isinstance(e, A.BinOp):
        l, r, op = e.left, e.right, e.op
        if isinstance(l, A.Num) and isinstance(r, A.Num):
            if op == "and":
                return A.Num(int(bool(l.value) and bool(r.value)))
            if op == "or":
                return A.Num(int(bool(l.value) or bool(r.value)))
            return A.Num(BINOPS[op](l.value, r.value))
        if op == "and":
            if isinstance(l, A.Num):
                if not l.value:
                    return A.FALSE
                if is_boolean(r):
                    return r
            if isinstance(r, A.Num):
                if r.value and is_boolean(l):
                    return l
                if not r.value and not _has_effects(l):
                    return A.FALSE
        elif op == "or":
            if isinstance(l, A.Num):
                if l.value:
                    return A.TRUE
                if is_boolean(r):
                    return r
            if isinstance(r, A.Num):
                if not r.value and is_boolean(l):
                    return l
                if r.value and not _has_effects(l):
                    return A.TRUE
        elif isinstance(r, A.Num) and r.value == 0 and op in ("+", "-", "OR", "EOR", "LSL", "LSR",
                                                              "ASR", "ROR", "<<", ">>"):
            return l
        elif isinstance(l, A.Num) and l.value == 0 and op in ("+", "OR", "EOR"):
            return r
        elif op == "*" and isinstance(r, A.Num) and r.value == 1:
            return l
        elif op == "*" and isinstance(l, A.Num) and l.value == 1:
            return r
        elif op in ("==", "!=") and l == r and not _has_effects(l):
            return A.Num(int(op == "=="))
        return e
    if isinstance(e, A.UnOp):
        if isinstance(e.operand, A.Num):
            return A.Num(UNOPS[e.op](e.operand.value))
        if e.op == "not" and isinstance(e.operand, A.UnOp) and e.operand.op == "not" \
                and is_boolean(e.operand.operand):
            return e.operand.operand
        return e
    if isinstance(e, A.BitRange):
        if all(isinstance(x, A.Num) for x in (e.expr, e.hi, e.lo)):
            return A.Num(bits(e.expr.value, e.hi.value, e.lo.value))
        return e
    if isinstance(e, A.Fun):
        if e.name == "ConditionPassed" and isinstance(e.args[0], A.Num) and e.args[0].value >= 14:
            return A.TRUE
        fn = PURE_FUNCS.get(e.name)
        if fn is not None and all(isinstance(a, A.Num) for a in e.args):
            return A.Num(fn(*(a.value for a in e.args)))
        return e
    return e


def fold(e):
    """Bottom-up constant folding of an expression."""
    return A.transform(e, _fold_node)


def fold_stmts(body: tuple) -> tuple:
    """Fold expressions and eliminate dead branches (constant conditions,
    empty branches). Loops with constant empty ranges are dropped."""
    out: list = []
    for s in body:
        if isinstance(s, A.Assign):
            out.append(A.Assign(fold(s.lhs), fold(s.rhs)))
        elif isinstance(s, A.If):
            c = fold(s.cond)
            then = fold_stmts(s.then)
            orelse = fold_stmts(s.orelse)
            if isinstance(c, A.Num):
                out.extend(then if c.value else orelse)
            elif not then and not orelse:
                if _has_effects(c):
                    out.append(A.If(c, (A.Nop(),)))
            elif not then:
                out.append(A.If(fold(negate(c)), orelse))
            else:
                out.append(A.If(c, then, orelse))
        elif isinstance(s, A.For):
            lo, hi = fold(s.lo), fold(s.hi)
            body_ = fold_stmts(s.body)
            if body_ and not (isinstance(lo, A.Num) and isinstance(hi, A.Num) and lo.value > hi.value):
                out.append(A.For(s.var, lo, hi, body_))
        elif isinstance(s, A.Call):
            out.append(A.Call(s.name, tuple(fold(a) for a in s.args)))
        elif isinstance(s, A.Nop):
            continue
        else:
            out.append(s)
    return tuple(out)


_NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def negate(e: A.Expr) -> A.Expr:
    """Boolean negation, pushed through and/or and comparisons."""
    if isinstance(e, A.Num):
        return A.Num(int(not e.value))
    if isinstance(e, A.UnOp) and e.op == "not":
        inner = e.operand
        return inner if is_boolean(inner) else A.BinOp("!=", inner, A.FALSE)
    if isinstance(e, A.BinOp):
        if e.op == "and":
            return A.BinOp("or", negate(e.left), negate(e.right))
        if e.op == "or":
            return A.BinOp("and", negate(e.left), negate(e.right))
        if e.op in _NEGATED:
            return A.BinOp(_NEGATED[e.op], e.left, e.right)
    return A.UnOp("not", e)


def nnf(e: A.Expr) -> A.Expr:
    """Negation normal form: ``not`` only directly above atoms."""
    if isinstance(e, A.BinOp) and e.op in ("and", "or"):
        return A.BinOp(e.op, nnf(e.left), nnf(e.right))
    if isinstance(e, A.UnOp) and e.op == "not":
        inner = e.operand
        if isinstance(inner, A.BinOp) and inner.op in ("and", "or") or \
                isinstance(inner, A.UnOp) and inner.op == "not":
            return nnf(negate(inner))
        return negate(inner)
    return e


# -- DNF-based simplification ------------------------------------------------

_DNF_LIMIT = 256


def _dnf(e) -> list[list] | None:
    if isinstance(e, A.BinOp) and e.op == "or":
        l, r = _dnf(e.left), _dnf(e.right)
        if l is None or r is None or len(l) + len(r) > _DNF_LIMIT:
            return None
        return l + r
    if isinstance(e, A.BinOp) and e.op == "and":
        l, r = _dnf(e.left), _dnf(e.right)
        if l is None or r is None or len(l) * len(r) > _DNF_LIMIT:
            return None
        return [a + b for a in l for b in r]
    if isinstance(e, A.Num):
        return [[]] if e.value else []
    return [[e]]


def _eq_atom(a):
    """(name, op, value-or-name) for ``x == k``/``x != k``/``x == y`` atoms."""
    if isinstance(a, A.BinOp) and a.op in ("==", "!="):
        l, r = a.left, a.right
        if isinstance(l, A.Num) and isinstance(r, A.Var):
            l, r = r, l
        if isinstance(l, A.Var) and isinstance(r, (A.Num, A.Var)):
            return l.name, a.op, r.value if isinstance(r, A.Num) else r.name
    return None


def _fact_value(atom, facts) -> bool | None:
    """Truth of ``atom`` forced by the facts, if any."""
    t = _eq_atom(atom)
    if t is None:
        return None
    name, op, rhs = t
    for f in facts:
        k = f.kind if hasattr(f, "kind") else f
        contradicts = False
        if isinstance(k, NotEqualValue) and isinstance(rhs, int):
            contradicts = k.param == name and k.value == rhs
        elif isinstance(k, NotIn) and isinstance(rhs, int):
            contradicts = k.param == name and rhs in k.values
        elif isinstance(k, ParamsDiffer) and isinstance(rhs, str):
            contradicts = {k.a, k.b} == {name, rhs}
        if contradicts:
            return op == "!="
    return None


def _conjunction(atoms, facts) -> list | None:
    """Simplify one conjunction; None means it is unsatisfiable."""
    out: list = []
    eq: dict[str, int] = {}
    ne: dict[str, set] = {}
    for a in atoms:
        a = fold(a)
        if isinstance(a, A.Num):
            if not a.value:
                return None
            continue
        forced = _fact_value(a, facts)
        if forced is True:
            continue
        if forced is False:
            return None
        t = _eq_atom(a)
        if t is not None and isinstance(t[2], int):
            name, op, v = t
            if op == "==":
                if name in eq and eq[name] != v or v in ne.get(name, ()):
                    return None
                eq[name] = v
            else:
                if eq.get(name) == v:
                    return None
                ne.setdefault(name, set()).add(v)
        if a in out:
            continue
        out.append(a)
    # x != j is implied by x == k for k != j
    return [a for a in out
            if not ((t := _eq_atom(a)) and t[1] == "!=" and isinstance(t[2], int)
                    and t[0] in eq and eq[t[0]] != t[2])]


def simplify(cond: A.Expr, facts=()) -> A.Expr:
    """Simplify a boolean condition under validity-constraint facts.

    The result is equivalent to ``cond`` on every assignment satisfying the
    facts. Rewriting is syntactic: folding, contradiction detection inside
    conjunctions, fact-based atom elimination, and and/or unit laws.
    """
    e = nnf(fold(cond))
    terms = _dnf(e)
    if terms is None:
        return fold(e)
    kept: list[list] = []
    for t in terms:
        c = _conjunction(t, facts)
        if c is None:
            continue
        if not c:
            return A.TRUE
        if any(all(x in c for x in k) for k in kept):
            continue  # absorbed by a weaker term already kept
        kept = [k for k in kept if not all(x in k for x in c)]
        kept.append(c)
    if not kept:
        return A.FALSE
    return A.disj(A.conj(c) for c in kept)
