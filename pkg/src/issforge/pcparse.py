"""Parser for the indentation-structured pseudo-code format (``.pc`` files).

Physical lines are first joined into logical lines (trailing backslash or an
open bracket continues a line), then grouped into units by their
``Instruction``/``Mode`` headers, and finally each unit body is parsed by a
recursive-descent parser that treats indentation as block structure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

from . import ast as A
from .errors import DescriptionError
from .ir import BUILTINS

KEYWORDS = frozenset({
    "if", "then", "else", "for", "to", "and", "or", "not", "is", "with",
    "UNPREDICTABLE", "nop", "AND", "OR", "EOR", "NOT", "LSL", "LSR", "ASR", "ROR",
})
FLAGS = frozenset("NZCV")
NAMED_REGS = {"PC": 15, "LR": 14, "SP": 13}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<num>0x[0-9A-Fa-f_]+|0b[01_]+|[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<<|>>|[=<>+\-*(),\[\]:{}])
""", re.VERBOSE)

_INSTR_HEADER = re.compile(r"^Instruction\s+(\w+)(?:\s+patch\s+(\w+))?\s*:\s*$")
_MODE_HEADER = re.compile(r"^Mode\s+(\w+)\s+for\s+(\w+)(\s+writeback)?\s*:\s*$")
_PATCH_HEADER = re.compile(r"^Patch\s+(\w+)\s*:\s*$")


class Tok(NamedTuple):
    kind: str   # 'num' | 'name' | 'op' | 'kw'
    text: str
    col: int


class Line(NamedTuple):
    lineno: int
    indent: int
    toks: list[Tok]


@dataclass
class PcUnit:
    name: str
    kind: str            # 'instruction' | 'mode'
    ast: A.Block
    line: int
    family: str | None = None
    patch: str | None = None
    writeback: bool = False


def _strip_comment(s: str) -> str:
    i = s.find("//")
    return s if i < 0 else s[:i]


def logical_lines(text: str) -> list[tuple[int, str]]:
    """Join continued physical lines. Returns (first line number, text)."""
    out: list[tuple[int, str]] = []
    buf: str | None = None
    start = 0
    depth = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw.expandtabs(4)).rstrip()
        if buf is None:
            if not line.strip():
                continue
            buf, start = line, lineno
        else:
            buf += " " + line.strip()
        cont = buf.endswith("\\")
        if cont:
            buf = buf[:-1].rstrip()
        depth = sum(buf.count(c) for c in "([") - sum(buf.count(c) for c in ")]")
        if not cont and depth <= 0:
            out.append((start, buf))
            buf = None
    if buf is not None:
        out.append((start, buf))
    return out


def tokenize(text: str, lineno: int, unit: str | None = None) -> list[Tok]:
    toks: list[Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DescriptionError(f"unexpected character {text[pos]!r}", unit, lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            s = m.group()
            if kind == "name" and s in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, s, m.start() + 1))
        pos = m.end()
    return toks


def _parse_int(s: str) -> int:
    s = s.replace("_", "")
    if s.startswith("0x"):
        return int(s, 16)
    if s.startswith("0b"):
        return int(s[2:], 2)
    return int(s)


class _LineParser:
    """Expression/simple-statement parser over the tokens of one line."""

    def __init__(self, toks: list[Tok], lineno: int, unit: str | None, builtins):
        self.toks = toks
        self.pos = 0
        self.lineno = lineno
        self.unit = unit
        self.builtins = builtins

    # cursor helpers
    def peek(self, k: int = 0) -> Tok | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text and t.kind in ("op", "kw")

    def next(self) -> Tok:
        t = self.peek()
        if t is None:
            self.error("unexpected end of line")
        self.pos += 1
        return t

    def expect(self, text: str) -> Tok:
        t = self.peek()
        if t is None or t.text != text:
            self.error(f"expected {text!r}" + (f", found {t.text!r}" if t else ""))
        self.pos += 1
        return t

    def done(self) -> bool:
        return self.pos >= len(self.toks)

    def error(self, msg: str):
        t = self.peek()
        col = t.col if t is not None else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        raise DescriptionError(msg, self.unit, self.lineno, col)

    # expressions, lowest precedence first
    def expr(self) -> A.Expr:
        return self.or_()

    def or_(self):
        e = self.and_()
        while self.at("or"):
            self.next()
            e = A.BinOp("or", e, self.and_())
        return e

    def and_(self):
        e = self.not_()
        while self.at("and"):
            self.next()
            e = A.BinOp("and", e, self.not_())
        return e

    def not_(self):
        if self.at("not"):
            self.next()
            return A.UnOp("not", self.not_())
        return self.cmp()

    def cmp(self):
        e = self.bitor()
        t = self.peek()
        if t is not None and t.text in A.COMPARISONS:
            self.next()
            return A.BinOp(t.text, e, self.bitor())
        if self.at("is"):
            self.next()
            rhs = self.bitor()
            return A.BinOp("==", self._reg_index(e), self._reg_index(rhs))
        return e

    def _reg_index(self, e):
        if isinstance(e, A.Reg) and e.mode is None:
            return e.index
        self.error("'is' compares registers")

    def _binary(self, ops, sub):
        e = sub()
        while True:
            t = self.peek()
            if t is not None and t.text in ops and t.kind in ("op", "kw"):
                self.next()
                e = A.BinOp(t.text, e, sub())
            else:
                return e

    def bitor(self):
        return self._binary(("OR", "EOR"), self.bitand)

    def bitand(self):
        return self._binary(("AND",), self.shift)

    def shift(self):
        return self._binary(("LSL", "LSR", "ASR", "ROR", "<<", ">>"), self.add)

    def add(self):
        return self._binary(("+", "-"), self.mul)

    def mul(self):
        return self._binary(("*",), self.unary)

    def unary(self):
        if self.at("-"):
            self.next()
            return A.UnOp("-", self.unary())
        if self.at("NOT"):
            self.next()
            return A.UnOp("NOT", self.unary())
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while self.at("["):
            self.next()
            hi = self.expr()
            lo = hi
            if self.at(":"):
                self.next()
                lo = self.expr()
            self.expect("]")
            e = A.BitRange(e, hi, lo)
        return e

    def primary(self):
        t = self.next()
        if t.kind == "num":
            return A.Num(_parse_int(t.text))
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind != "name":
            self.pos -= 1
            self.error(f"unexpected {t.text!r}")
        name = t.text
        nxt = self.peek()
        if name in FLAGS and nxt is not None and nxt.text == "Flag":
            self.next()
            return A.FlagRef(name)
        if name == "Memory":
            self.expect("[")
            addr = self.expr()
            self.expect(",")
            size = self.next()
            if size.kind != "num" or _parse_int(size.text) not in (1, 2, 4):
                self.error("memory access size must be 1, 2 or 4")
            self.expect("]")
            return A.Memory(addr, _parse_int(size.text))
        if name == "Banked":
            self.expect("(")
            reg = self.primary()
            if not isinstance(reg, A.Reg) or reg.mode is not None:
                self.error("Banked() takes a register")
            self.expect(",")
            mode = self.expr()
            self.expect(")")
            return A.Reg(reg.index, mode)
        if name in NAMED_REGS:
            return A.Reg(A.Num(NAMED_REGS[name]))
        if name == "R" and self.at("["):
            self.next()
            idx = self.expr()
            self.expect("]")
            return A.Reg(idx)
        m = re.fullmatch(r"R([0-9]+)", name)
        if m:
            n = int(m.group(1))
            if n > 15:
                self.pos -= 1
                self.error(f"no register {name}")
            return A.Reg(A.Num(n))
        m = re.fullmatch(r"R([a-z][A-Za-z0-9_]*)", name)
        if m:
            return A.Reg(A.Var(m.group(1)))
        if nxt is not None and nxt.text == "(":
            return self._call(t)
        return A.Var(name)

    def _call(self, t: Tok) -> A.Fun:
        sig = self.builtins.get(t.text)
        if sig is None:
            self.pos -= 1
            self.error(f"unknown builtin function {t.text}")
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expr())
            while self.at(","):
                self.next()
                args.append(self.expr())
        self.expect(")")
        if len(args) != sig[0]:
            raise DescriptionError(f"{t.text} takes {sig[0]} argument(s), got {len(args)}",
                                   self.unit, self.lineno, t.col)
        return A.Fun(t.text, tuple(args))

    def lvalue_ok(self, e) -> bool:
        if isinstance(e, (A.Var, A.Reg, A.FlagRef, A.Memory)):
            return True
        return isinstance(e, A.BitRange) and self.lvalue_ok(e.expr)


class _BlockParser:
    def __init__(self, lines: list[Line], unit: str, builtins):
        self.lines = lines
        self.unit = unit
        self.builtins = builtins
        self.i = 0

    def err(self, msg, line: Line, col: int | None = None):
        raise DescriptionError(msg, self.unit, line.lineno, col)

    def block(self, indent: int) -> tuple[A.Stmt, ...]:
        out: list[A.Stmt] = []
        while self.i < len(self.lines):
            line = self.lines[self.i]
            if line.indent < indent:
                break
            if line.indent > indent:
                self.err("inconsistent indentation", line, line.indent + 1)
            if line.toks[0].text == "else":
                self.err("'else' without matching 'if'", line, line.toks[0].col)
            out.append(self.statement())
        return tuple(out)

    def child_block(self, parent: Line) -> tuple[A.Stmt, ...]:
        if self.i >= len(self.lines) or self.lines[self.i].indent <= parent.indent:
            self.err("expected an indented block", parent)
        return self.block(self.lines[self.i].indent)

    def statement(self) -> A.Stmt:
        line = self.lines[self.i]
        self.i += 1
        p = _LineParser(line.toks, line.lineno, self.unit, self.builtins)
        s = self._stmt_on_line(p, line)
        if not p.done():
            p.error(f"unexpected {p.peek().text!r}")
        return s

    def _stmt_on_line(self, p: _LineParser, line: Line) -> A.Stmt:
        t = p.peek()
        if t.text == "if" and t.kind == "kw":
            return self._if(p, line)
        if t.text == "for" and t.kind == "kw":
            p.next()
            var = p.next()
            if var.kind != "name":
                p.error("expected loop variable")
            p.expect("=")
            lo = p.expr()
            p.expect("to")
            hi = p.expr()
            if not p.done():
                p.error(f"unexpected {p.peek().text!r}")
            return A.For(var.text, lo, hi, self.child_block(line))
        return self._simple(p)

    def _simple(self, p: _LineParser) -> A.Stmt:
        t = p.peek()
        if t.text == "UNPREDICTABLE":
            p.next()
            return A.Unpredictable()
        if t.text == "nop":
            p.next()
            return A.Nop()
        if t.kind == "name" and self.builtins.get(t.text, (0, ""))[1] == "proc":
            f = p._call(p.next())
            return A.Call(f.name, f.args)
        lhs = p.expr()
        if not p.at("="):
            p.error("expected '=' in assignment")
        if not p.lvalue_ok(lhs):
            p.error("invalid assignment target")
        p.next()
        return A.Assign(lhs, p.expr())

    def _if(self, p: _LineParser, line: Line) -> A.If:
        p.expect("if")
        cond = p.expr()
        p.expect("then")
        if not p.done():
            then = (self._inline(p, line),)
        else:
            then = self.child_block(line)
        orelse: tuple[A.Stmt, ...] = ()
        if p.at("else"):
            p.next()
            orelse = (self._inline(p, line),)
        elif p.done() and self.i < len(self.lines):
            nxt = self.lines[self.i]
            if nxt.indent == line.indent and nxt.toks[0].text == "else":
                self.i += 1
                q = _LineParser(nxt.toks, nxt.lineno, self.unit, self.builtins)
                q.next()
                if q.done():
                    orelse = self.child_block(nxt)
                else:
                    orelse = (self._stmt_on_line(q, nxt),)
                    if not q.done():
                        q.error(f"unexpected {q.peek().text!r}")
        return A.If(cond, then, orelse)

    def _inline(self, p: _LineParser, line: Line) -> A.Stmt:
        if p.at("if"):
            return self._if(p, line)
        return self._simple(p)


def parse_statements(text: str, unit: str = "<text>", builtins=None, first_line: int = 1) -> A.Block:
    """Parse an indented statement list (no unit header)."""
    builtins = BUILTINS if builtins is None else builtins
    lines = []
    for lineno, s in logical_lines(text):
        indent = len(s) - len(s.lstrip(" "))
        lines.append(Line(lineno + first_line - 1, indent, tokenize(s.strip(), lineno + first_line - 1, unit)))
    if not lines:
        raise DescriptionError("empty unit", unit, first_line)
    bp = _BlockParser(lines, unit, builtins)
    body = bp.block(lines[0].indent)
    if bp.i < len(lines):
        bp.err("inconsistent indentation", lines[bp.i], lines[bp.i].indent + 1)
    return A.Block(body)


def parse_expression(text: str, builtins=None) -> A.Expr:
    p = _LineParser(tokenize(text.strip(), 1), 1, None, BUILTINS if builtins is None else builtins)
    e = p.expr()
    if not p.done():
        p.error(f"unexpected {p.peek().text!r}")
    return e


def _split_units(text: str, headers, source: str):
    units = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        code = _strip_comment(raw).rstrip()
        if not code.strip():
            if current is not None:
                current[2].append("")
            continue
        if not raw[:1].isspace():
            for kind, rx in headers:
                m = rx.match(code)
                if m:
                    current = (kind, m, [], lineno)
                    units.append(current)
                    break
            else:
                raise DescriptionError(f"expected a unit header, found {code.strip()!r}",
                                       None, lineno, 1, source)
            continue
        if current is None:
            raise DescriptionError("statement outside of any unit", None, lineno, 1, source)
        current[2].append(raw)
    return units


def parse_pseudocode(text: str, builtins=None) -> dict[str, PcUnit]:
    """Parse a ``.pc`` document into one :class:`PcUnit` per header."""
    builtins = BUILTINS if builtins is None else builtins
    headers = [("instruction", _INSTR_HEADER), ("mode", _MODE_HEADER)]
    out: dict[str, PcUnit] = {}
    for kind, m, body, lineno in _split_units(text, headers, "pseudo-code"):
        name = m.group(1)
        if name in out:
            raise DescriptionError(f"duplicate unit {name}", name, lineno)
        if not any(b.strip() for b in body):
            raise DescriptionError("empty unit", name, lineno)
        ast = parse_statements("\n".join(body), name, builtins, first_line=lineno + 1)
        if kind == "instruction":
            out[name] = PcUnit(name, kind, ast, lineno, patch=m.group(2))
        else:
            out[name] = PcUnit(name, kind, ast, lineno, family=m.group(2),
                               writeback=bool(m.group(3)))
    return out


def parse_patches(text: str, builtins=None) -> dict[str, list[tuple[A.Expr, A.Expr]]]:
    """Parse ``Patch NAME:`` units of ``replace <expr> with <expr>`` lines."""
    builtins = BUILTINS if builtins is None else builtins
    out: dict[str, list[tuple[A.Expr, A.Expr]]] = {}
    for _, m, body, lineno in _split_units(text, [("patch", _PATCH_HEADER)], "patch"):
        name = m.group(1)
        steps = []
        for offset, raw in enumerate(body, 1):
            if not raw.strip():
                continue
            toks = tokenize(_strip_comment(raw).strip(), lineno + offset, name)
            p = _LineParser(toks, lineno + offset, name, builtins)
            head = p.next()
            if head.text != "replace":
                p.pos -= 1
                p.error("expected 'replace <expr> with <expr>'")
            pattern = p.expr()
            p.expect("with")
            replacement = p.expr()
            if not p.done():
                p.error(f"unexpected {p.peek().text!r}")
            steps.append((pattern, replacement))
        if not steps:
            raise DescriptionError("empty patch", name, lineno)
        out[name] = steps
    return out
