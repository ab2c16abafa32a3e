"""Parsers for the encoding, syntax and constraint files, and the linker."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from . import ast as A
from .errors import DescriptionError, LinkError
from .ir import (
    BUILTINS, EncField, EncodingTable, Hole, InstrUnit, IsaDescription, Lit,
    ModeCase, NotEqualValue, NotIn, Opt, ParamsDiffer, RegNotInList, SyntaxTemplate,
    ValidityConstraint, free_vars, param_name,
)
from .pcparse import parse_patches, parse_pseudocode

log = logging.getLogger(__name__)

WIDTH = 32


@dataclass(frozen=True)
class SourceSet:
    pseudocode_text: str
    encodings_text: str
    syntax_text: str
    constraints_text: str = ""
    patch_text: str = ""

    @classmethod
    def from_dir(cls, path: str | Path) -> "SourceSet":
        path = Path(path)

        def one(suffix: str, required: bool = True) -> str:
            found = sorted(p for p in path.glob(f"*{suffix}")
                           if not (suffix == ".pc" and p.name.endswith(".patch.pc")))
            if not found:
                if required:
                    raise DescriptionError(f"no {suffix} file in {path}")
                return ""
            if len(found) > 1:
                raise DescriptionError(f"several {suffix} files in {path}: "
                                       f"{', '.join(p.name for p in found)}")
            return found[0].read_text(encoding="utf-8")

        return cls(one(".pc"), one(".enc"), one(".syn"), one(".vc", False), one(".patch.pc", False))


def _rows(text: str) -> list[tuple[int, str, str]]:
    """``NAME: content`` rows; indented lines continue the previous row."""
    rows: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = "" if raw.lstrip().startswith("//") else raw.rstrip()
        if not line.strip():
            continue
        if raw[:1].isspace() and rows:
            rows[-1][2] += " " + line.strip()
            continue
        m = re.match(r"^([A-Za-z_][\w, ]*?)\s*:\s*(.*)$", line)
        if not m:
            raise DescriptionError("malformed line", None, lineno, 1)
        rows.append([lineno, m.group(1).strip(), m.group(2)])
    return [tuple(r) for r in rows]


# -- encodings ---------------------------------------------------------------

_RANGE = re.compile(r"^\s*(\d+)(?:\s*\.\.\s*(\d+))?\s+(\S+)\s*$")


def parse_encoding_row(content: str, name: str = "<row>", lineno: int | None = None) -> EncodingTable:
    fields: list[EncField] = []
    labels: set[str] = set()
    expected = WIDTH - 1
    for cell in content.split("|"):
        m = _RANGE.match(cell)
        if not m:
            raise DescriptionError(f"malformed encoding cell {cell.strip()!r}", name, lineno)
        hi = int(m.group(1))
        lo = int(m.group(2)) if m.group(2) is not None else hi
        body = m.group(3)
        if hi < lo:
            raise DescriptionError(f"bit range {hi}..{lo} must list the high bit first", name, lineno)
        if hi > expected:
            raise DescriptionError(f"bits {expected + 1}..{hi} overlap" if hi < WIDTH
                                   else f"bit {hi} outside the {WIDTH}-bit word", name, lineno)
        if hi < expected:
            gap = f"{expected}" if expected == hi + 1 else f"{expected}..{hi + 1}"
            raise DescriptionError(f"bit {gap} uncovered", name, lineno)
        width = hi - lo + 1
        if body[0].isdigit():
            if set(body) - {"0", "1"}:
                raise DescriptionError(f"non-binary constant {body!r}", name, lineno)
            if len(body) != width:
                raise DescriptionError(f"constant {body!r} does not fill bits {hi}..{lo}", name, lineno)
            fields.append(EncField(hi, lo, const=body))
        else:
            if not re.fullmatch(r"[A-Za-z_]\w*", body):
                raise DescriptionError(f"bad field name {body!r}", name, lineno)
            pname = param_name(body)
            if pname in labels:
                raise DescriptionError(f"duplicate parameter {body}", name, lineno)
            labels.add(pname)
            fields.append(EncField(hi, lo, label=body))
        expected = lo - 1
    if expected >= 0:
        gap = "0" if expected == 0 else f"{expected}..0"
        raise DescriptionError(f"bit {gap} uncovered", name, lineno)
    return EncodingTable(tuple(fields))


def parse_encodings(text: str) -> dict[str, EncodingTable]:
    out: dict[str, EncodingTable] = {}
    for lineno, name, content in _rows(text):
        if name in out:
            raise DescriptionError(f"duplicate encoding for {name}", name, lineno)
        out[name] = parse_encoding_row(content, name, lineno)
    return out


# -- syntax ------------------------------------------------------------------

def parse_syntax_template(text: str, name: str = "<syntax>", lineno: int | None = None) -> SyntaxTemplate:
    m = re.match(r"^[A-Z][A-Z0-9]*", text)
    mnemonic = m.group() if m else ""
    pos = len(mnemonic)

    def elements(pos: int, closing: str | None):
        out: list = []
        lit = ""
        while pos < len(text):
            c = text[pos]
            if c == "<":
                end = text.find(">", pos)
                if end < 0:
                    raise DescriptionError("unbalanced '<'", name, lineno, pos + 1)
                inner = text[pos + 1:end]
                if not re.fullmatch(r"[A-Za-z_]\w*", inner):
                    raise DescriptionError(f"bad placeholder <{inner}>", name, lineno, pos + 1)
                if lit:
                    out.append(Lit(lit))
                    lit = ""
                out.append(Hole(inner))
                pos = end + 1
            elif c == "{":
                if lit:
                    out.append(Lit(lit))
                    lit = ""
                inner, pos, control = elements(pos + 1, "}")
                if control is None:
                    holes = [e for e in inner if isinstance(e, Hole)]
                    if holes:
                        control = param_name(holes[0].name)
                    elif len(inner) == 1 and isinstance(inner[0], Lit):
                        control = inner[0].text
                    else:
                        raise DescriptionError("optional group needs a controlling parameter",
                                               name, lineno, pos)
                out.append(Opt(tuple(inner), control))
            elif c == "?" and closing == "}":
                end = text.find("}", pos)
                if end < 0:
                    raise DescriptionError("unbalanced '{'", name, lineno, pos + 1)
                if lit:
                    out.append(Lit(lit))
                return out, end + 1, text[pos + 1:end].strip()
            elif c == closing:
                if lit:
                    out.append(Lit(lit))
                return out, pos + 1, None
            elif c in "}>":
                raise DescriptionError(f"unbalanced {c!r}", name, lineno, pos + 1)
            else:
                lit += c
                pos += 1
        if closing is not None:
            raise DescriptionError("unbalanced '{'", name, lineno, len(text))
        if lit:
            out.append(Lit(lit))
        return out, pos, None

    elems, _, _ = elements(pos, None)
    return SyntaxTemplate(mnemonic, tuple(elems))


def parse_syntax(text: str) -> dict[str, SyntaxTemplate]:
    out: dict[str, SyntaxTemplate] = {}
    for lineno, name, content in _rows(text):
        if name in out:
            raise DescriptionError(f"duplicate syntax for {name}", name, lineno)
        out[name] = parse_syntax_template(content.strip(), name, lineno)
    return out


# -- constraints -------------------------------------------------------------

def _operand(tok: str, name: str, lineno: int):
    tok = tok.strip()
    if re.fullmatch(r"R(1[0-5]|[0-9])", tok):
        return int(tok[1:])
    if re.fullmatch(r"0x[0-9A-Fa-f]+|[0-9]+", tok):
        return int(tok, 0)
    if re.fullmatch(r"[A-Za-z_]\w*", tok):
        return param_name(tok)
    raise DescriptionError(f"bad operand {tok!r}", name, lineno)


def _value_set(body: str, name: str, lineno: int) -> frozenset[int]:
    values: set[int] = set()
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\w+)\s*\.\.\s*(\w+)", part)
        if m:
            values.update(range(int(m.group(1), 0), int(m.group(2), 0) + 1))
        else:
            v = _operand(part, name, lineno)
            if not isinstance(v, int):
                raise DescriptionError(f"set members must be numbers, got {part!r}", name, lineno)
            values.add(v)
    return frozenset(values)


def parse_constraints(text: str) -> list[ValidityConstraint]:
    out: list[ValidityConstraint] = []
    for lineno, subjects, content in _rows(text):
        m = re.fullmatch(r"\s*(\w+)\s*(!=|notin)\s*(.+?)\s*", content)
        if not m:
            raise DescriptionError(f"malformed constraint {content.strip()!r}", subjects, lineno)
        lhs, op, rhs = m.groups()
        left = _operand(lhs, subjects, lineno)
        if not isinstance(left, str):
            raise DescriptionError("constraint must start with a parameter", subjects, lineno)
        if op == "!=":
            right = _operand(rhs, subjects, lineno)
            kind = NotEqualValue(left, right) if isinstance(right, int) else ParamsDiffer(left, right)
        elif rhs.startswith("{"):
            if not rhs.endswith("}"):
                raise DescriptionError("unbalanced '{'", subjects, lineno)
            kind = NotIn(left, _value_set(rhs[1:-1], subjects, lineno))
        else:
            right = _operand(rhs, subjects, lineno)
            if not isinstance(right, str):
                raise DescriptionError("'notin' takes a set or a register-list parameter", subjects, lineno)
            kind = RegNotInList(left, right)
        for subject in (s.strip() for s in subjects.split(",")):
            out.append(ValidityConstraint(subject, kind))
    return out


# -- linking -----------------------------------------------------------------

def _writeback_index(ast: A.Block) -> int | None:
    base = A.Reg(A.Var("n"))
    for i, stmt in enumerate(ast.body):
        for node in A.walk(stmt):
            if isinstance(node, A.Assign) and node.lhs == base:
                return i
    return None


def link(sources: SourceSet) -> IsaDescription:
    """Cross-reference the four parsed files into an :class:`IsaDescription`."""
    units = parse_pseudocode(sources.pseudocode_text, BUILTINS)
    encodings = parse_encodings(sources.encodings_text)
    syntaxes = parse_syntax(sources.syntax_text)
    constraints = parse_constraints(sources.constraints_text)
    patches = parse_patches(sources.patch_text) if sources.patch_text.strip() else {}
    warnings: list[str] = []

    for name in units:
        if name not in encodings:
            raise LinkError(f"{name}: no encoding table")
        if name not in syntaxes:
            raise LinkError(f"{name}: no syntax template")
    for name in list(encodings) + list(syntaxes):
        if name not in units:
            raise LinkError(f"{name}: no pseudo-code")

    by_subject: dict[str, list[ValidityConstraint]] = {}
    for c in constraints:
        if c.subject not in units:
            raise LinkError(f"constraint on unknown unit {c.subject}")
        by_subject.setdefault(c.subject, []).append(c)

    families: dict[str, list[str]] = {}
    modes: list[ModeCase] = []
    for idx, u in enumerate(v for v in units.values() if v.kind == "mode"):
        enc = encodings[u.name]
        params = {f.param for f in enc.params()}
        syn = syntaxes[u.name]
        for ph in syn.placeholders():
            if param_name(ph) not in params:
                raise LinkError(f"{u.name}: dangling placeholder <{ph}>")
        fv = free_vars(u.ast, params, unit=u.name)
        if fv["unbound"]:
            raise LinkError(f"unbound identifier {', '.join(fv['unbound'])} in {u.name}")
        wb = _writeback_index(u.ast)
        if u.writeback and wb is None:
            raise LinkError(f"{u.name}: write-back assignment not found")
        _check_constraints(u.name, by_subject.get(u.name, []), params)
        modes.append(ModeCase(u.name, u.family, u.ast, enc, syn, by_subject.get(u.name, []),
                              wb if u.writeback else None, idx))
        families.setdefault(u.family, []).append(u.name)

    desc = IsaDescription([], modes, families, patches, dict(BUILTINS), warnings)
    used_families: set[str] = set()
    for idx, u in enumerate(v for v in units.values() if v.kind == "instruction"):
        enc = encodings[u.name]
        params = {f.param for f in enc.params()}
        syn = syntaxes[u.name]
        holes = [ph for ph in syn.placeholders() if ph in families]
        for ph in syn.placeholders():
            if ph not in families and param_name(ph) not in params:
                raise LinkError(f"{u.name}: dangling placeholder <{ph}>")
        if len(holes) > 1:
            raise LinkError(f"{u.name}: more than one mode hole ({', '.join(holes)})")
        family = holes[0] if holes else None
        provided: set[str] = set()
        check_params = set(params)
        if family:
            used_families.add(family)
            provided = desc.family_outputs(family)
            for case in families[family]:
                check_params |= {f.param for f in desc.mode(case).encoding.params()}
        fv = free_vars(u.ast, params, provided, unit=u.name)
        if fv["unbound"]:
            raise LinkError(f"unbound identifier {', '.join(fv['unbound'])} in {u.name}")
        if u.patch is not None and u.patch not in patches:
            raise LinkError(f"{u.name}: patch {u.patch} is not registered")
        _check_constraints(u.name, by_subject.get(u.name, []), check_params)
        desc.instructions.append(InstrUnit(
            u.name, u.ast, enc, syn, by_subject.get(u.name, []),
            list(families[family]) if family else [], family, u.patch, idx))

    for fam, cases in families.items():
        if fam not in used_families:
            for case in cases:
                msg = f"mode case {case} is used by no instruction"
                warnings.append(msg)
                log.warning(msg)
    return desc


def _check_constraints(name: str, cs: list[ValidityConstraint], params: set[str]) -> None:
    for c in cs:
        for p in c.params():
            if p not in params:
                raise LinkError(f"{name}: constraint {c.kind.text()} names unknown parameter {p}")


def load_description(path: str | Path) -> IsaDescription:
    return link(SourceSet.from_dir(path))
