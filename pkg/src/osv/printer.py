"""Surface-syntax printer; inverse of the parser up to parentheses.

`parse(print_term(t))` yields a term structurally equal to `t` for any
parser-produced term, which the round-trip property tests rely on.
"""

from __future__ import annotations

from .terms import (
    App,
    Convert,
    Binop,
    BoolConst,
    Construct,
    Default,
    FieldAccess,
    FieldStep,
    FunctionDecl,
    Goal,
    IfThenElse,
    IntConst,
    KeysBound,
    Let,
    MapEmpty,
    MapGet,
    MapIndom,
    MapUpdate,
    PatConst,
    PatCtor,
    PatStruct,
    PatVar,
    Pattern,
    Quant,
    RangeBound,
    SeqAppend,
    SeqCons,
    SeqIndex,
    SeqLength,
    SeqRemove,
    SeqRepeat,
    SeqSlice,
    SeqUpdate,
    StructLiteral,
    StructUpdate,
    Switch,
    Term,
    Unop,
    Var,
)
from .types import BOOL, BitVecType, EnumDecl, StructDecl, TypedefDecl, TypeExpr

_BP = {
    "->": 10, "||": 20, "&&": 30,
    "==": 40, "!=": 40,
    "<": 50, "<=": 50, ">": 50, ">=": 50,
    "|": 60, "&": 70,
    "<<": 80, ">>": 80,
    "+": 90, "-": 90, "*": 100,
}
_UNARY_BP = 105
_POSTFIX_BP = 110


def print_type(ty: TypeExpr) -> str:
    return str(ty)


def _bp(t: Term) -> int:
    if isinstance(t, Binop):
        return _BP[t.op]
    if isinstance(t, Unop) or (isinstance(t, IntConst) and t.value < 0):
        return _UNARY_BP
    return _POSTFIX_BP


def print_term(t: Term, prec: int = 0) -> str:
    s = _render(t)
    if _bp(t) < prec:
        return f"({s})"
    return s


def _call(name: str, *args: Term) -> str:
    return f"{name}({', '.join(print_term(a) for a in args)})"


def _render(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, BoolConst):
        return "true" if t.value else "false"
    if isinstance(t, IntConst):
        if isinstance(t.ty, BitVecType):
            return f"{t.ty}({t.value})"
        return str(t.value)
    if isinstance(t, Unop):
        return f"{t.op}{print_term(t.arg, _UNARY_BP)}"
    if isinstance(t, Binop):
        bp = _BP[t.op]
        right_assoc = t.op == "->"
        lhs = print_term(t.left, bp + (1 if right_assoc else 0))
        rhs = print_term(t.right, bp + (0 if right_assoc else 1))
        return f"{lhs} {t.op} {rhs}"
    if isinstance(t, App):
        return _call(t.fn, *t.args)
    if isinstance(t, Convert):
        return _call(str(t.target), t.arg)
    if isinstance(t, Construct):
        if not t.args:
            return t.constructor
        return _call(t.constructor, *t.args)
    if isinstance(t, FieldAccess):
        return f"{print_term(t.base, _POSTFIX_BP)}.{t.fld}"
    if isinstance(t, StructLiteral):
        inner = ", ".join(f"{n}: {print_term(v)}" for n, v in t.assigns)
        return f"{t.struct}{{{inner}}}"
    if isinstance(t, StructUpdate):
        steps = []
        for s in t.path:
            if isinstance(s, FieldStep):
                steps.append(("." if steps else "") + s.name)
            else:
                steps.append(f"[{print_term(s.index)}]")
        path = "".join(steps)
        return f"{print_term(t.base, _POSTFIX_BP)}{{|{path} := {print_term(t.value)}|}}"
    if isinstance(t, Switch):
        arms = [
            f"case {print_pattern(c.pattern)}: {print_term(c.body)};" for c in t.cases
        ]
        if t.default is not None:
            arms.append(f"default: {print_term(t.default)};")
        return f"switch ({print_term(t.scrutinee)}) {{ {' '.join(arms)} }}"
    if isinstance(t, Let):
        return f"let {t.var} = {print_term(t.rhs)} in {print_term(t.body)} end"
    if isinstance(t, Quant):
        binder = f"{t.var_ty} {t.var}"
        if isinstance(t.bound, RangeBound):
            binder += f" in {print_term(t.bound.lo)} .. {print_term(t.bound.hi)}"
        elif isinstance(t.bound, KeysBound):
            binder += f" in keys({print_term(t.bound.map)})"
        return f"{t.kind} ({binder}) {{ {print_term(t.body)} }}"
    if isinstance(t, IfThenElse):
        els = print_term(t.els)
        if isinstance(t.els, IfThenElse):
            return f"if ({print_term(t.cond)}) {{ {print_term(t.then)} }} else {els}"
        return f"if ({print_term(t.cond)}) {{ {print_term(t.then)} }} else {{ {els} }}"
    if isinstance(t, SeqIndex):
        return f"{print_term(t.seq, _POSTFIX_BP)}[{print_term(t.index)}]"
    if isinstance(t, SeqLength):
        return _call("len", t.seq)
    if isinstance(t, SeqAppend):
        return _call("append", t.left, t.right)
    if isinstance(t, SeqCons):
        return _call("cons", t.head, t.tail)
    if isinstance(t, SeqUpdate):
        return _call("update", t.index, t.value, t.seq)
    if isinstance(t, SeqSlice):
        return _call("slice", t.lo, t.hi, t.seq)
    if isinstance(t, SeqRepeat):
        return _call("repeat", t.value, t.count)
    if isinstance(t, SeqRemove):
        return _call("remove", t.index, t.seq)
    if isinstance(t, MapGet):
        return f"{print_term(t.map, _POSTFIX_BP)}[{print_term(t.key)}]"
    if isinstance(t, MapIndom):
        return _call("indom", t.key, t.map)
    if isinstance(t, MapEmpty):
        return "empty"
    if isinstance(t, MapUpdate):
        return _call("update", t.key, t.value, t.map)
    if isinstance(t, Default):
        return f"default({t.of})"
    raise TypeError(f"cannot print {t!r}")


def print_pattern(p: Pattern) -> str:
    if isinstance(p, PatVar):
        return p.name
    if isinstance(p, PatCtor):
        if not p.args:
            return p.constructor
        return f"{p.constructor}({', '.join(print_pattern(a) for a in p.args)})"
    if isinstance(p, PatStruct):
        inner = ", ".join(f"{n}: {print_pattern(a)}" for n, a in p.assigns)
        return f"{p.struct}{{{inner}}}"
    if isinstance(p, PatConst):
        return print_term(p.value)
    raise TypeError(f"cannot print pattern {p!r}")


def print_decl(d) -> str:
    if isinstance(d, TypedefDecl):
        return f"typedef {d.name} = {d.ty};"
    if isinstance(d, StructDecl):
        fields = "\n".join(f"  {f.ty} {f.name};" for f in d.fields)
        return f"struct {d.name} {{\n{fields}\n}}"
    if isinstance(d, EnumDecl):
        branches = []
        for b in d.branches:
            if b.params:
                ps = ", ".join(f"{p.ty} {p.name}" for p in b.params)
                branches.append(f"{b.constructor}({ps})")
            else:
                branches.append(b.constructor)
        return f"enum {d.name} = {' | '.join(branches)};"
    if isinstance(d, FunctionDecl):
        ps = ", ".join(f"{ty} {name}" for name, ty in d.params)
        if d.ret == BOOL:
            return f"predicate {d.name}({ps}) {{\n  {print_term(d.body)}\n}}"
        return f"function {d.name}({ps}) -> {d.ret} {{\n  {print_term(d.body)}\n}}"
    if isinstance(d, Goal):
        return print_goal(d)
    raise TypeError(f"cannot print declaration {d!r}")


def print_goal(g: Goal) -> str:
    lines = [f"query {g.name} {{"]
    if g.type_vars:
        lines.append(f"  type {', '.join(g.type_vars)};")
    for name, ty in g.variables:
        lines.append(f"  {ty} {name};")
    for a in g.assumptions:
        label = f"{a.label}: " if a.label else ""
        lines.append(f"  assumes {label}{print_term(a.prop)};")
    lines.append(f"  shows {print_term(g.conclusion)}")
    lines.append("}")
    return "\n".join(lines)
