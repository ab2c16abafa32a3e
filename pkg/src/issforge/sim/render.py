"""Assembly rendering rules, shared by the printer, the test generator and
the assembler so both sides of a round-trip diff agree."""

from __future__ import annotations

from ..ir import FlatInstruction, Hole, Lit, Opt, is_register_field, param_name
from ..semantics import ALWAYS, COND_NAMES, to_signed


def cond_text(v: int) -> str:
    return COND_NAMES[v]


def reglist_text(v: int) -> str:
    return "{" + ",".join(f"R{i}" for i in range(16) if v >> i & 1) + "}"


def render_value(label: str, value: int, width: int, signed: bool) -> str:
    name = param_name(label)
    if is_register_field(label):
        return f"R{value}"
    if name == "cond":
        return cond_text(value)
    if name == "U":
        return "" if value else "-"
    if name == "reglist":
        return reglist_text(value)
    if signed:
        return str(to_signed(value, width))
    return str(value)


def group_present(control: str, value: int) -> bool:
    return value != (ALWAYS if control == "cond" else 0)


def print_asm(fi: FlatInstruction, values: dict[str, int]) -> str:
    widths = {p.name: (p.width, p.signed) for p in fi.fields}

    def get(name: str) -> int:
        return values[name] if name in values else fi.constants[name]

    def go(elems) -> str:
        out = []
        for e in elems:
            if isinstance(e, Lit):
                out.append(e.text)
            elif isinstance(e, Hole):
                name = param_name(e.name)
                w, sg = widths.get(name, (32, False))
                out.append(render_value(e.name, get(name), w, sg))
            elif group_present(e.control, get(param_name(e.control))):
                out.append(go(e.elements))
        return "".join(out)
    return fi.syntax.mnemonic + go(fi.syntax.elements)
