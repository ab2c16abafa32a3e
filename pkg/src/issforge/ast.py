"""Pseudo-code syntax trees, traversal helpers and the canonical printer.

Nodes are frozen dataclasses, so structural equality and hashing come for
free and every transform builds a new tree.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Callable, Iterator, Union

__all__ = [
    "Var", "Num", "Reg", "BinOp", "UnOp", "Fun", "BitRange", "FlagRef", "Memory",
    "Assign", "If", "For", "Call", "Unpredictable", "Nop", "Block",
    "Expr", "Stmt", "Node", "walk", "transform", "replace_exp", "contains",
    "format_expr", "format_stmts", "format_block", "TRUE", "FALSE", "conj", "disj",
]


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Num:
    value: int


@dataclass(frozen=True, slots=True)
class Reg:
    index: "Expr"
    mode: "Expr | None" = None


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class UnOp:
    op: str  # 'not' (boolean), 'NOT' (bitwise), '-' (negate)
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class Fun:
    name: str
    args: tuple["Expr", ...] = ()


@dataclass(frozen=True, slots=True)
class BitRange:
    expr: "Expr"
    hi: "Expr"
    lo: "Expr"


@dataclass(frozen=True, slots=True)
class FlagRef:
    flag: str  # one of N Z C V


@dataclass(frozen=True, slots=True)
class Memory:
    addr: "Expr"
    size: int


Expr = Union[Var, Num, Reg, BinOp, UnOp, Fun, BitRange, FlagRef, Memory]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Assign:
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True, slots=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()


@dataclass(frozen=True, slots=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: tuple["Stmt", ...]


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True, slots=True)
class Unpredictable:
    pass


@dataclass(frozen=True, slots=True)
class Nop:
    pass


@dataclass(frozen=True, slots=True)
class Block:
    body: tuple["Stmt", ...]


Stmt = Union[Assign, If, For, Call, Unpredictable, Nop]
Node = Union[Expr, Stmt, Block]

TRUE = Num(1)
FALSE = Num(0)

_NODE_TYPES = (Var, Num, Reg, BinOp, UnOp, Fun, BitRange, FlagRef, Memory,
               Assign, If, For, Call, Unpredictable, Nop, Block)


def _is_node(x) -> bool:
    return isinstance(x, _NODE_TYPES)


def _children(node) -> Iterator:
    for f in fields(node):
        v = getattr(node, f.name)
        if _is_node(v):
            yield v
        elif isinstance(v, tuple):
            for item in v:
                if _is_node(item):
                    yield item


def walk(node) -> Iterator[Node]:
    """Pre-order iteration over a node (or a tuple of statements)."""
    if isinstance(node, tuple):
        for item in node:
            yield from walk(item)
        return
    yield node
    for child in _children(node):
        yield from walk(child)


def contains(node, pred: Callable[[Node], bool]) -> bool:
    return any(pred(n) for n in walk(node))


def transform(node, fn: Callable[[Node], Node]):
    """Rebuild ``node`` bottom-up, applying ``fn`` to every rebuilt node."""
    if isinstance(node, tuple):
        return tuple(transform(item, fn) for item in node)
    if not _is_node(node):
        return node
    changes = {}
    for f in fields(node):
        v = getattr(node, f.name)
        if _is_node(v) or isinstance(v, tuple):
            nv = transform(v, fn)
            if nv is not v:
                changes[f.name] = nv
    if changes:
        node = replace(node, **changes)
    return fn(node)


def replace_exp(ast, pattern: Node, replacement: Node) -> tuple[object, int]:
    """Replace every structurally-equal occurrence of ``pattern``.

    Returns the new tree and the number of replacements. Replacements are not
    searched again, so a replacement containing the pattern cannot loop.
    """
    count = 0

    def go(node):
        nonlocal count
        if isinstance(node, tuple):
            return tuple(go(item) for item in node)
        if not _is_node(node):
            return node
        if node == pattern:
            count += 1
            return replacement
        changes = {}
        for f in fields(node):
            v = getattr(node, f.name)
            if _is_node(v) or isinstance(v, tuple):
                nv = go(v)
                if nv is not v:
                    changes[f.name] = nv
        return replace(node, **changes) if changes else node

    return go(ast), count


def conj(items) -> Expr:
    items = list(items)
    if not items:
        return TRUE
    out = items[0]
    for e in items[1:]:
        out = BinOp("and", out, e)
    return out


def disj(items) -> Expr:
    items = list(items)
    if not items:
        return FALSE
    out = items[0]
    for e in items[1:]:
        out = BinOp("or", out, e)
    return out


# -- printing ----------------------------------------------------------------

# Larger binds tighter. Comparisons are non-associative.
PRECEDENCE = {
    "or": 1, "and": 2,
    "==": 4, "!=": 4, "<": 4, ">": 4, "<=": 4, ">=": 4,
    "OR": 5, "EOR": 5,
    "AND": 6,
    "LSL": 7, "LSR": 7, "ASR": 7, "ROR": 7, "<<": 7, ">>": 7,
    "+": 8, "-": 8,
    "*": 9,
}
COMPARISONS = frozenset({"==", "!=", "<", ">", "<=", ">="})
NOT_PREC = 3
UNARY_PREC = 10
POSTFIX_PREC = 11


def _fmt_num(v: int) -> str:
    return str(v) if v < 256 else hex(v).upper().replace("0X", "0x")


def _fmt_reg(index: Expr) -> str:
    if isinstance(index, Num):
        return "PC" if index.value == 15 else f"R{index.value}"
    if isinstance(index, Var) and index.name[:1].islower():
        return f"R{index.name}"
    return f"R[{format_expr(index)}]"


def format_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FlagRef):
        return f"{e.flag} Flag"
    if isinstance(e, Reg):
        if e.mode is None:
            return _fmt_reg(e.index)
        return f"Banked({_fmt_reg(e.index)}, {format_expr(e.mode)})"
    if isinstance(e, Memory):
        return f"Memory[{format_expr(e.addr)}, {e.size}]"
    if isinstance(e, Fun):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, BitRange):
        base = format_expr(e.expr, POSTFIX_PREC)
        if e.hi == e.lo:
            return f"{base}[{format_expr(e.hi)}]"
        return f"{base}[{format_expr(e.hi)}:{format_expr(e.lo)}]"
    if isinstance(e, UnOp):
        if e.op == "not":
            s = f"not {format_expr(e.operand, NOT_PREC)}"
            return f"({s})" if prec > NOT_PREC else s
        sep = " " if e.op == "NOT" else ""
        s = f"{e.op}{sep}{format_expr(e.operand, UNARY_PREC)}"
        return f"({s})" if prec > UNARY_PREC else s
    if isinstance(e, BinOp):
        p = PRECEDENCE[e.op]
        if e.op in COMPARISONS:
            left = format_expr(e.left, p + 1)
        else:
            left = format_expr(e.left, p)
        right = format_expr(e.right, p + 1)
        s = f"{left} {e.op} {right}"
        return f"({s})" if prec > p else s
    raise TypeError(f"not an expression: {e!r}")


def _fmt_stmt(s: Stmt, indent: int, out: list[str], else_if: bool = False) -> None:
    pad = " " * indent
    if isinstance(s, Assign):
        out.append(f"{pad}{format_expr(s.lhs)} = {format_expr(s.rhs)}")
    elif isinstance(s, If):
        head = "else if" if else_if else "if"
        line = f"{head} {format_expr(s.cond)} then"
        out.append(f"{pad}{line}")
        _fmt_body(s.then, indent + 4, out)
        if len(s.orelse) == 1 and isinstance(s.orelse[0], If):
            _fmt_stmt(s.orelse[0], indent, out, else_if=True)
        elif s.orelse:
            out.append(f"{pad}else")
            _fmt_body(s.orelse, indent + 4, out)
    elif isinstance(s, For):
        out.append(f"{pad}for {s.var} = {format_expr(s.lo)} to {format_expr(s.hi)}")
        _fmt_body(s.body, indent + 4, out)
    elif isinstance(s, Call):
        out.append(f"{pad}{s.name}({', '.join(format_expr(a) for a in s.args)})")
    elif isinstance(s, Unpredictable):
        out.append(f"{pad}UNPREDICTABLE")
    elif isinstance(s, Nop):
        out.append(f"{pad}nop")
    else:
        raise TypeError(f"not a statement: {s!r}")


def _fmt_body(body, indent: int, out: list[str]) -> None:
    if not body:
        out.append(" " * indent + "nop")
    for s in body:
        _fmt_stmt(s, indent, out)


def format_stmts(stmts, indent: int = 0) -> str:
    out: list[str] = []
    for s in stmts:
        _fmt_stmt(s, indent, out)
    return "\n".join(out)


def format_block(block: Block, indent: int = 4) -> str:
    return format_stmts(block.body, indent)
