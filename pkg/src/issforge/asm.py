"""Two-pass assembler driven by the syntax templates of the generic flat
instructions.

Source lines hold an optional ``label:``, then an instruction or a
``.word`` directive; ``;`` and ``@`` start comments. ``SP``, ``LR`` and
``PC`` name R13 to R15. A label in a numeric operand of a signed field is
turned into a word offset relative to the instruction address plus 8.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ir import FlatInstruction, Hole, Lit, is_register_field, param_name
from .semantics import ALWAYS, COND_NAMES
from .sim.image import Image

_COND_RE = "|".join(n for n in COND_NAMES if n)
_REG_RE = r"(?:R1[0-5]|R[0-9]|SP|LR|PC)"
_NUM_RE = r"(?:-?(?:0[xX][0-9A-Fa-f]+|\d+)|[A-Za-z_.][\w.]*)"
_ALIASES = {"SP": 13, "LR": 14, "PC": 15}
_LABEL = re.compile(r"^\s*([A-Za-z_.][\w.]*)\s*:")


class AsmError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _reg(tok: str) -> int:
    tok = tok.upper()
    return _ALIASES[tok] if tok in _ALIASES else int(tok[1:])


def _reglist(tok: str) -> int:
    v = 0
    for part in filter(None, (p.strip() for p in tok.split(","))):
        if "-" in part:
            a, b = (_reg(x.strip()) for x in part.split("-"))
            for i in range(a, b + 1):
                v |= 1 << i
        else:
            v |= 1 << _reg(part)
    return v


@dataclass
class _Pattern:
    flat: FlatInstruction
    regex: re.Pattern
    holes: list[tuple[str, str]]          # (group name, field label)
    controls: list[tuple[str, str]] = field(default_factory=list)  # (group name, control param)


def _lit(text: str) -> str:
    out = []
    for ch in text:
        if ch == " ":
            out.append(r"\s+")
        elif ch == ",":
            out.append(r"\s*,\s*")
        else:
            out.append(re.escape(ch))
    return "".join(out)


def _compile(fi: FlatInstruction) -> _Pattern:
    holes: list[tuple[str, str]] = []
    controls: list[tuple[str, str]] = []

    def hole(label: str) -> str:
        g = f"h{len(holes)}"
        holes.append((g, label))
        name = param_name(label)
        if is_register_field(label):
            body = _REG_RE
        elif name == "cond":
            body = _COND_RE
        elif name == "U":
            body = "-?"
        elif name == "reglist":
            return rf"\{{(?P<{g}>[^}}]*)\}}"
        else:
            body = _NUM_RE
        return f"(?P<{g}>{body})"

    def go(elems) -> str:
        parts = []
        for e in elems:
            if isinstance(e, Lit):
                parts.append(_lit(e.text))
            elif isinstance(e, Hole):
                parts.append(hole(e.name))
            else:
                g = f"c{len(controls)}"
                controls.append((g, param_name(e.control)))
                parts.append(f"(?P<{g}>{go(e.elements)})?")
        return "".join(parts)
    pattern = re.escape(fi.syntax.mnemonic) + go(fi.syntax.elements)
    return _Pattern(fi, re.compile(rf"\s*{pattern}\s*", re.IGNORECASE), holes, controls)


class Assembler:
    def __init__(self, flats: list[FlatInstruction]):
        self.patterns = [_compile(f) for f in flats if not f.is_variant]

    def _number(self, tok: str, width: int, signed: bool, labels, addr: int) -> int:
        if re.fullmatch(r"-?(?:0[xX][0-9A-Fa-f]+|\d+)", tok):
            v = int(tok, 0)
        elif labels is not None and tok in labels:
            if not signed:
                raise AsmError(f"label {tok} used in an unsigned field")
            delta = labels[tok] - (addr + 8)
            if delta % 4:
                raise AsmError(f"label {tok} is not word aligned")
            v = delta // 4
        elif labels is None:
            v = 0  # first pass: labels are not known yet
        else:
            raise AsmError(f"unknown label {tok}")
        if signed:
            if not -(1 << (width - 1)) <= v < (1 << (width - 1)):
                raise AsmError(f"{v} out of range for a signed {width}-bit field")
            return v & ((1 << width) - 1)
        if not 0 <= v < (1 << width):
            raise AsmError(f"{v} out of range for a {width}-bit field")
        return v

    def _try(self, pat: _Pattern, text: str, addr: int, labels) -> int | None:
        m = pat.regex.fullmatch(text)
        if not m:
            return None
        fi = pat.flat
        widths = {p.name: p for p in fi.fields}
        values = {p.name: 0 for p in fi.fields if p.name in fi.encoding.extract(0)}
        for g, control in pat.controls:
            if control in values:
                present = m.group(g) is not None
                values[control] = (1 if control != "cond" else ALWAYS) if present else \
                    (ALWAYS if control == "cond" else 0)
        for g, label in pat.holes:
            tok = m.group(g)
            if tok is None:
                continue
            name = param_name(label)
            if name not in widths:
                continue  # a constant after merging; the template still names it
            p = widths[name]
            if is_register_field(label):
                v = _reg(tok)
            elif name == "cond":
                v = COND_NAMES.index(tok.upper())
            elif name == "U":
                v = 0 if tok == "-" else 1
            elif name == "reglist":
                v = _reglist(tok)
            else:
                v = self._number(tok, p.width, p.signed, labels, addr)
            values[name] = v
        try:
            word = fi.encoding.encode(values)
        except (KeyError, ValueError):
            return None
        full = fi.decode_fields(word)
        if labels is not None and not fi.constraints_hold(full):
            bad = [c.text() for c in fi.constraints if not c.holds(full)]
            raise AsmError(f"{text.strip()}: violates {', '.join(bad)}")
        return word

    def encode_line(self, text: str, addr: int = 0, labels: dict[str, int] | None = None) -> int:
        """Encode one instruction; ``labels`` of None means labels are unknown."""
        first_error = None
        for pat in self.patterns:
            try:
                w = self._try(pat, text, addr, labels if labels is not None else {})
            except AsmError as exc:
                first_error = first_error or exc
                continue
            if w is not None:
                return w
        if first_error:
            raise first_error
        raise AsmError(f"cannot assemble {text.strip()!r}")

    def assemble(self, source: str) -> Image:
        lines = []
        labels: dict[str, int] = {}
        addr = 0
        for lineno, raw in enumerate(source.splitlines(), 1):
            line = re.split(r"[;@]", raw, maxsplit=1)[0].rstrip()
            while True:
                m = _LABEL.match(line)
                if not m:
                    break
                if m.group(1) in labels:
                    raise AsmError(f"duplicate label {m.group(1)}", lineno)
                labels[m.group(1)] = addr
                line = line[m.end():]
            if not line.strip():
                continue
            lines.append((lineno, addr, line.strip()))
            addr += 4
        words = []
        for lineno, addr, line in lines:
            try:
                if line.lower().startswith(".word"):
                    tok = line[5:].strip()
                    words.append(labels[tok] if tok in labels else int(tok, 0) & 0xFFFFFFFF)
                else:
                    words.append(self.encode_line(line, addr, labels))
            except (AsmError, ValueError) as exc:
                raise AsmError(str(exc).removeprefix("line None: "), lineno) from None
        return Image(words, labels.get("_start", 0))
