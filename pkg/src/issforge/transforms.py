"""The transformation pipeline.

Passes run in a fixed order: symbolic-call rewrite, mode patches, flattening,
write-back relocation, pre-computation of static sub-expressions and
specialization. Every pass returns new trees; the description is untouched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import ast as A
from .errors import TransformError
from .ir import (
    EncField, EncodingTable, FlatInstruction, Hole, InstrUnit, IsaDescription, Lit,
    ModeCase, NotEqualValue, Opt, Param, ParamsDiffer, SyntaxTemplate, ValidityConstraint,
    free_vars,
)
from .semantics import ALWAYS
from .simplify import fold_stmts, is_static

log = logging.getLogger(__name__)

SMALL_CORPUS = 64
PROFILE_THRESHOLD = 1000


@dataclass
class TransformConfig:
    # (new parameter name, pattern) pairs hoisted to decode time
    precompute_patterns: list[tuple[str, A.Expr]] = field(default_factory=list)
    specialize_flags: list[tuple[str, tuple[int, ...]]] = field(default_factory=lambda: [("S", (0, 1))])
    specialize_condition: bool = True
    condition_param: str = "cond"
    profile: dict[str, int] | None = None
    weight_threshold: int | None = None  # None: pick from corpus size and profile
    specialize: bool = True

    def __post_init__(self):
        for name, pat in self.precompute_patterns:
            if A.contains(pat, lambda n: isinstance(n, (A.Reg, A.FlagRef, A.Memory))) or \
                    A.contains(pat, lambda n: isinstance(n, A.Var) and n.name in ("CPSR", "SPSR")) or \
                    not is_static(pat, {v.name for v in A.walk(pat) if isinstance(v, A.Var)}):
                raise TransformError(f"precompute pattern {name} is not static: {A.format_expr(pat)}")


# -- 1. symbolic-argument calls ----------------------------------------------

_SYMBOLIC = {
    "CarryFrom": {"+": "CarryFromAdd", "-": "CarryFromSub"},
    "OverflowFrom": {"+": "OverflowFromAdd", "-": "OverflowFromSub"},
    "BorrowFrom": {"-": "BorrowFromSub"},
    "SignedSat": {"+": "SignedSatAdd", "-": "SignedSatSub"},
}


def _operands(e: A.Expr) -> tuple[str, list[A.Expr]] | None:
    """Split a left-nested chain of one of + or - into its operands."""
    if not (isinstance(e, A.BinOp) and e.op in "+-"):
        return None
    op = e.op
    items = [e.right]
    while isinstance(e.left, A.BinOp) and e.left.op == op:
        e = e.left
        items.append(e.right)
    items.append(e.left)
    return op, items[::-1]


def rewrite_symbolic_calls(ast: A.Block, unit: str = "?") -> A.Block:
    def fn(n):
        if not (isinstance(n, A.Fun) and n.name in _SYMBOLIC):
            return n
        split = _operands(n.args[0])
        variants = _SYMBOLIC[n.name]
        if split is None or split[0] not in variants or len(split[1]) not in (2, 3):
            raise TransformError(f"{unit}: {n.name} argument {A.format_expr(n.args[0])} "
                                 "has no operator-specific variant")
        op, items = split
        name = f"{variants[op]}{len(items)}"
        if n.name == "SignedSat":
            if len(items) != 2:
                raise TransformError(f"{unit}: SignedSat takes a two-operand expression")
            return A.Fun(name, tuple(items) + n.args[1:])
        return A.Fun(name, tuple(items))
    return A.transform(ast, fn)


# -- 2. mode patches ---------------------------------------------------------

def apply_mode_patch(instr: InstrUnit, mode_ast: A.Block, patches: dict) -> A.Block:
    if instr.patch is None:
        return mode_ast
    if instr.patch not in patches:
        raise TransformError(f"{instr.name}: patch {instr.patch} is not registered")
    out = mode_ast
    for pattern, replacement in patches[instr.patch]:
        out, count = A.replace_exp(out, pattern, replacement)
        if count == 0:
            raise TransformError(f"stale patch {instr.patch}: {A.format_expr(pattern)} "
                                 f"not found while patching for {instr.name}")
    return out


# -- 3. flattening -----------------------------------------------------------

def merge_encodings(inst: EncodingTable, mode: EncodingTable, names=("instruction", "mode")
                    ) -> tuple[EncodingTable, dict[str, int]]:
    """Bit-wise merge keeping the most specific content.

    Returns the merged table and the instruction/mode parameters that became
    constants, with their values.
    """
    def owner(table, bit):
        for f in table.fields:
            if f.lo <= bit <= f.hi:
                return f
        raise AssertionError(bit)

    chosen = []  # per bit from 31 down: ('c', bit char) or ('p', EncField)
    for bit in range(31, -1, -1):
        fi, fm = owner(inst, bit), owner(mode, bit)
        if fi.const is not None and fm.const is not None:
            ci, cm = fi.const[fi.hi - bit], fm.const[fm.hi - bit]
            if ci != cm:
                raise TransformError(f"encoding merge conflict at bit {bit} between "
                                     f"{names[0]} ({ci}) and {names[1]} ({cm})")
            chosen.append(("c", ci))
        elif fi.const is not None:
            chosen.append(("c", fi.const[fi.hi - bit]))
        elif fm.const is not None:
            chosen.append(("c", fm.const[fm.hi - bit]))
        elif fi.param == fm.param:
            if (fi.hi, fi.lo) != (fm.hi, fm.lo):
                raise TransformError(f"parameter {fi.label} sits at different bits in "
                                     f"{names[0]} and {names[1]}")
            chosen.append(("p", fm))
        else:
            chosen.append(("p", fi if fi.width < fm.width else fm))

    # a cell boundary of either table also starts a new merged cell
    starts = {f.hi for f in inst.fields} | {f.hi for f in mode.fields}
    fields: list[EncField] = []
    for bit_idx, (kind, v) in enumerate(chosen):
        bit = 31 - bit_idx
        last = fields[-1] if fields else None
        if kind == "c":
            if last is not None and last.const is not None and bit not in starts:
                fields[-1] = EncField(last.hi, bit, const=last.const + v)
            else:
                fields.append(EncField(bit, bit, const=v))
        elif last is not None and last.label == v.label and last.const is None:
            fields[-1] = EncField(last.hi, bit, label=v.label)
        else:
            fields.append(EncField(bit, bit, label=v.label))

    merged = EncodingTable(tuple(fields))
    kept = {f.param for f in merged.params()}
    for f in merged.params():
        orig = next(t.param_field(f.param) for t in (mode, inst) if t.param_field(f.param))
        if (orig.hi, orig.lo) != (f.hi, f.lo):
            raise TransformError(f"parameter {f.label} is only partly fixed by the merge "
                                 f"of {names[0]} and {names[1]}")
    constants: dict[str, int] = {}
    for table in (inst, mode):
        for f in table.params():
            if f.param in kept or f.param in constants:
                continue
            picks = [chosen[31 - b] for b in range(f.hi, f.lo - 1, -1)]
            if all(k == "c" for k, _ in picks):
                constants[f.param] = int("".join(v for _, v in picks), 2)
    return merged, constants


def merge_syntax(inst: SyntaxTemplate, mode: SyntaxTemplate, family: str) -> SyntaxTemplate:
    sub = ((Lit(mode.mnemonic),) if mode.mnemonic else ()) + mode.elements

    def go(elems):
        out = []
        for e in elems:
            if isinstance(e, Hole) and e.name == family:
                out.extend(sub)
            elif isinstance(e, Opt):
                out.append(Opt(tuple(go(e.elements)), e.control))
            else:
                out.append(e)
        merged: list = []
        for e in out:  # coalesce neighbouring literals
            if merged and isinstance(e, Lit) and isinstance(merged[-1], Lit):
                merged[-1] = Lit(merged[-1].text + e.text)
            else:
                merged.append(e)
        return merged
    return SyntaxTemplate(inst.mnemonic, tuple(go(inst.elements)))


def substitute_constants(ast, constants: dict[str, int]):
    def fn(n):
        if isinstance(n, A.Var) and n.name in constants:
            return A.Num(constants[n.name])
        return n
    return A.transform(ast, fn)


def _merge_constraints(name: str, cs: list[ValidityConstraint], constants: dict[str, int]
                       ) -> list[ValidityConstraint]:
    """Concatenate constraints, resolving those on parameters fixed by the merge."""
    out: list[ValidityConstraint] = []
    for c in cs:
        fixed = [p for p in c.params() if p in constants]
        if fixed and len(fixed) == len(c.params()):
            if c.holds(constants):
                continue
            raise TransformError(f"{name}: constraint {c.kind.text()} can never hold")
        if fixed:
            k = c.kind
            if not isinstance(k, ParamsDiffer):
                raise TransformError(f"{name}: cannot resolve constraint {c.kind.text()}")
            free = k.a if k.b in constants else k.b
            c = ValidityConstraint(c.subject, NotEqualValue(free, constants[fixed[0]]))
        if c not in out:
            out.append(c)
    return out


def signed_params(ast) -> set[str]:
    return {n.args[0].name for n in A.walk(ast)
            if isinstance(n, A.Fun) and n.name == "SignExtend" and isinstance(n.args[0], A.Var)}


def infer_params(fi: FlatInstruction) -> FlatInstruction:
    """Recompute run-time params and locals from the current tree."""
    available = {p.name: p for p in fi.fields}
    for name, _ in fi.computed:
        available.setdefault(name, Param(name, 32))
    fv = free_vars(fi.ast, set(available), unit=fi.name)
    if fv["unbound"]:
        raise TransformError(f"unbound identifier {', '.join(fv['unbound'])} in {fi.name}")
    used = set(fv["params"])
    order = [p.name for p in fi.fields] + [n for n, _ in fi.computed]
    fi.params = [available[n] for n in order if n in used]
    fi.locals = fv["locals"]
    return fi


def _flat(name, instr, mode, ast, enc, syn, constraints, constants, mode_len, wb):
    signed = signed_params(ast)
    fields = [Param(f.param, f.width, f.param in signed) for f in enc.params()]
    fi = FlatInstruction(name=name, instr=instr.name, mode=mode.name if mode else None,
                         ast=ast, encoding=enc, syntax=syn, constraints=constraints,
                         constants=constants, fields=fields, mode_len=mode_len,
                         writeback=wb, decl_index=instr.decl_index)
    return infer_params(fi)


def flatten_one(desc: IsaDescription, instr: InstrUnit, mode: ModeCase | None,
                mode_ast: A.Block | None = None) -> FlatInstruction:
    if mode is None:
        ast = A.Block(fold_stmts(instr.ast.body))
        return _flat(instr.name, instr, None, ast, instr.encoding, instr.syntax,
                     _merge_constraints(instr.name, instr.constraints, {}), {}, 0, None)
    name = f"{instr.name}_{mode.name}"
    enc, constants = merge_encodings(instr.encoding, mode.encoding, (instr.name, mode.name))
    syn = merge_syntax(instr.syntax, mode.syntax, mode.family)
    mode_body = (mode_ast or mode.ast).body
    body = substitute_constants(mode_body + instr.ast.body, constants)
    folded: list = []
    wb = None
    for i, stmt in enumerate(body):
        part = fold_stmts((stmt,))
        if i == mode.writeback:
            hits = [j for j, x in enumerate(part) if _wb_target(x) is not None]
            wb = len(folded) + hits[0] if hits else None
        folded.extend(part)
    constraints = _merge_constraints(name, instr.constraints + mode.constraints, constants)
    return _flat(name, instr, mode, A.Block(tuple(folded)), enc, syn, constraints,
                 constants, len(mode_body), wb)


def flatten(desc: IsaDescription) -> list[FlatInstruction]:
    out: list[FlatInstruction] = []
    for instr in desc.instructions:
        if not instr.modes:
            out.append(flatten_one(desc, instr, None))
            continue
        for mname in instr.modes:
            mode = desc.mode(mname)
            patched = apply_mode_patch(instr, mode.ast, desc.patches)
            out.append(flatten_one(desc, instr, mode, patched))
    return out


# -- 4. write-back relocation ------------------------------------------------

def _has_memory(stmt) -> bool:
    return A.contains(stmt, lambda n: isinstance(n, A.Memory))


def _writes_cpsr(stmt) -> bool:
    return A.contains(stmt, lambda n: isinstance(n, A.Assign) and n.lhs == A.Var("CPSR"))


def _wb_target(stmt):
    for n in A.walk(stmt):
        if isinstance(n, A.Assign) and isinstance(n.lhs, A.Reg):
            return n.lhs
    return None


def move_writeback(fi: FlatInstruction) -> FlatInstruction:
    """Move the base-register update after the last memory access.

    When the instruction may switch processor mode in between, the update is
    computed in place into locals and committed afterwards to the register
    bank of the original mode.
    """
    if fi.writeback is None:
        return fi
    body = list(fi.ast.body)
    wb_index = fi.writeback
    stmt = body[wb_index]
    target = _wb_target(stmt)
    if target is None:
        raise TransformError(f"{fi.name}: write-back assignment not found")
    last = max((i for i, s in enumerate(body) if _has_memory(s)), default=-1)
    if last <= wb_index:
        return fi
    rest = body[wb_index + 1:last + 1]
    if not any(_writes_cpsr(s) for s in rest):
        new = body[:wb_index] + rest + [stmt] + body[last + 1:]
        return infer_params(replace(fi, ast=A.Block(tuple(new)), writeback=last))

    def capture(n):
        if isinstance(n, A.Assign) and n.lhs == target:
            return A.If(A.TRUE, (A.Assign(A.Var("wb_value"), n.rhs),
                                 A.Assign(A.Var("wb_pending"), A.TRUE)))
        return n
    captured = A.transform(stmt, capture)
    captured = A.Block(fold_stmts_keep_ifs(captured))
    banked = target if target.mode is not None else A.Reg(target.index, A.Var("wb_mode"))
    prologue = [A.Assign(A.Var("wb_mode"), A.BitRange(A.Var("CPSR"), A.Num(4), A.Num(0))),
                A.Assign(A.Var("wb_pending"), A.FALSE)] + list(captured.body)
    commit = A.If(A.BinOp("==", A.Var("wb_pending"), A.TRUE), (A.Assign(banked, A.Var("wb_value")),))
    new = body[:wb_index] + prologue + rest + [commit] + body[last + 1:]
    return infer_params(replace(fi, ast=A.Block(tuple(new)), writeback=len(new) - 1 - len(body[last + 1:])))


def fold_stmts_keep_ifs(stmt) -> tuple:
    """Inline the ``if 1`` wrappers introduced by capture()."""
    def go(body):
        out = []
        for s in body:
            if isinstance(s, A.If) and s.cond == A.TRUE:
                out.extend(go(s.then))
            elif isinstance(s, A.If):
                out.append(A.If(s.cond, tuple(go(s.then)), tuple(go(s.orelse))))
            elif isinstance(s, A.For):
                out.append(A.For(s.var, s.lo, s.hi, tuple(go(s.body))))
            else:
                out.append(s)
        return out
    return tuple(go((stmt,)))


# -- 5. pre-computation ------------------------------------------------------

def precompute(fi: FlatInstruction, cfg: TransformConfig) -> FlatInstruction:
    ast = fi.ast
    computed = list(fi.computed)
    decode_names = {p.name for p in fi.fields} | {n for n, _ in computed}
    for name, pattern in cfg.precompute_patterns:
        new_ast, count = A.replace_exp(ast, pattern, A.Var(name))
        if count == 0:
            continue
        if not is_static(pattern, decode_names):
            raise TransformError(f"{fi.name}: pattern {A.format_expr(pattern)} is not static")
        ast = new_ast
        if name not in {n for n, _ in computed}:
            computed.append((name, pattern))
            decode_names.add(name)
    if ast is fi.ast:
        return fi
    return infer_params(replace(fi, ast=ast, computed=computed))


# -- 6. specialization -------------------------------------------------------

def effective_threshold(cfg: TransformConfig, n_flats: int) -> int:
    if cfg.weight_threshold is not None:
        return cfg.weight_threshold
    if cfg.profile is None:
        return 0 if n_flats < SMALL_CORPUS else 1
    return PROFILE_THRESHOLD


def specialize(fi: FlatInstruction, cfg: TransformConfig, threshold: int | None = None
               ) -> list[FlatInstruction]:
    """Generic instruction followed by its constant-folded variants."""
    if threshold is None:
        threshold = cfg.weight_threshold if cfg.weight_threshold is not None else 0
    if not cfg.specialize or fi.weight < threshold or fi.is_variant:
        return [fi]
    used = {p.name for p in fi.params}
    dims: list[tuple[str, tuple]] = [(f, vals) for f, vals in cfg.specialize_flags if f in used]
    cond_dim = cfg.specialize_condition and cfg.condition_param in used
    if not dims and not cond_dim:
        return [fi]

    combos: list[dict[str, int]] = [{}]
    for flag, values in dims:
        combos = [dict(c, **{flag: v}) for c in combos for v in values]
    if cond_dim:
        combos = [dict(c, **extra) for c in combos for extra in ({}, {cfg.condition_param: ALWAYS})]
    variants = []
    for pred in combos:
        if not pred:
            continue
        tag = "_".join(("AL" if k == cfg.condition_param else f"{k}{v}") for k, v in pred.items())
        ast = A.Block(fold_stmts(substitute_constants(fi.ast, pred).body))
        v = replace(fi, name=f"{fi.name}__{tag}", ast=ast, predicate=dict(pred),
                    generic=fi.generic, writeback=None)
        variants.append(infer_params(v))
    # most specific predicates first, so the decoder can take the first match
    variants.sort(key=lambda v: -len(v.predicate))
    return [fi] + variants


def ingest_profile(flats: list[FlatInstruction], profile: dict[str, int]) -> list[FlatInstruction]:
    """Attach execution counts; variant counts roll up into their generic."""
    by_name = {f.name: f for f in flats}
    totals: dict[str, int] = {}
    for name, count in profile.items():
        generic = name.split("__", 1)[0]
        if generic not in by_name:
            log.warning("profile names unknown instruction %s", name)
            continue
        totals[generic] = totals.get(generic, 0) + int(count)
    for f in flats:
        f.weight = totals.get(f.generic, 0)
    return flats


def read_profile(path: str | Path) -> dict[str, int]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TransformError(f"cannot read profile {path}: {exc}") from exc
    out: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            name, count = line.split("\t")
            out[name.strip()] = out.get(name.strip(), 0) + int(count)
        except ValueError:
            raise TransformError(f"{path}:{lineno}: expected 'name<TAB>count'") from None
    return out


def write_profile(path: str | Path, profile: dict[str, int]) -> None:
    lines = [f"{k}\t{v}" for k, v in sorted(profile.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# -- driver ------------------------------------------------------------------

PASS_NAMES = ("1-symbolic", "2-patch", "3-flatten", "4-writeback", "5-precompute", "6-specialize")


@dataclass
class PipelineResult:
    flats: list[FlatInstruction]
    generic: list[FlatInstruction]
    stages: dict[str, str] = field(default_factory=dict)


def _dump_flats(flats: list[FlatInstruction]) -> str:
    parts = []
    for f in flats:
        head = f"Flat {f.name}"
        if f.predicate:
            head += " when " + ", ".join(f"{k}={v}" for k, v in f.predicate.items())
        parts.append(f"{head}\n  encoding: {f.encoding.text()}\n  syntax:   {f.syntax.text()}\n"
                     + "".join(f"  constraint: {c.kind.text()}\n" for c in f.constraints)
                     + "".join(f"  computed: {n} = {A.format_expr(e)}\n" for n, e in f.computed)
                     + f"  params: {', '.join(p.name for p in f.params)}\n"
                     + A.format_block(f.ast, 4))
    return "\n\n".join(parts) + "\n"


def _dump_units(desc: IsaDescription) -> str:
    return desc.dump() + "\n"


def run_pipeline(desc: IsaDescription, cfg: TransformConfig | None = None,
                 dump: bool = False) -> PipelineResult:
    cfg = cfg or TransformConfig()
    stages: dict[str, str] = {}
    desc = replace(
        desc,
        instructions=[replace(i, ast=rewrite_symbolic_calls(i.ast, i.name)) for i in desc.instructions],
        modes=[replace(m, ast=rewrite_symbolic_calls(m.ast, m.name)) for m in desc.modes],
    )
    if dump:
        stages[PASS_NAMES[0]] = _dump_units(desc)
        patched = []
        for instr in desc.instructions:
            for mname in instr.modes if instr.patch else ():
                ast = apply_mode_patch(instr, desc.mode(mname).ast, desc.patches)
                patched.append(f"Mode {mname} patched for {instr.name}\n{A.format_block(ast)}")
        stages[PASS_NAMES[1]] = "\n\n".join(patched) + "\n"
    flats = flatten(desc)
    if dump:
        stages[PASS_NAMES[2]] = _dump_flats(flats)
    flats = [move_writeback(f) for f in flats]
    if dump:
        stages[PASS_NAMES[3]] = _dump_flats(flats)
    flats = [precompute(f, cfg) for f in flats]
    if dump:
        stages[PASS_NAMES[4]] = _dump_flats(flats)
    if cfg.profile is not None:
        ingest_profile(flats, cfg.profile)
    threshold = effective_threshold(cfg, len(flats))
    out: list[FlatInstruction] = []
    for f in flats:
        out.extend(specialize(f, cfg, threshold))
    if dump:
        stages[PASS_NAMES[5]] = _dump_flats(out)
    return PipelineResult(out, flats, stages)
