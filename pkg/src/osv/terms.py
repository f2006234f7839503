"""The term language: expressions, patterns, goals, and generic traversals.

Terms are immutable. After type checking every term carries its type in the
`ty` slot; `ty` is excluded from equality and hashing so that structural
comparisons ignore annotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional, Union

from .errors import Loc
from .types import BOOL, INT, BitVecType, TypeExpr


def _ty_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class BoolConst:
    value: bool
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class IntConst:
    """Integer literal; `ty` distinguishes unbounded int from bit-vector values.

    Bit-vector constants keep their unsigned representative in [0, 2**width).
    """

    value: int
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Unop:
    op: str  # "!" or "-"
    arg: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Binop:
    op: str
    left: "Term"
    right: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Convert:
    """Conversion between int and bit-vector types (total, wraparound)."""

    target: TypeExpr
    arg: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class App:
    """Application of a user-defined function or predicate (pre-expansion)."""

    fn: str
    args: tuple["Term", ...]
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Construct:
    """A constructed enumeration value, e.g. Vptr(10)."""

    enum: str
    constructor: str
    index: int
    args: tuple["Term", ...]
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class FieldAccess:
    base: "Term"
    fld: str  # a field name, or "id" for the branch number
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class StructLiteral:
    struct: str
    assigns: tuple[tuple[str, "Term"], ...]
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class FieldStep:
    name: str


@dataclass(frozen=True)
class IndexStep:
    index: "Term"


PathStep = Union[FieldStep, IndexStep]


@dataclass(frozen=True)
class StructUpdate:
    """Deep update `base{|path := value|}`; a one-step path is the plain form."""

    base: "Term"
    path: tuple[PathStep, ...]
    value: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class PatVar:
    name: str


@dataclass(frozen=True)
class PatCtor:
    constructor: str
    args: tuple["Pattern", ...]


@dataclass(frozen=True)
class PatStruct:
    """Partial structure pattern: only the listed fields are constrained."""

    struct: Optional[str]
    assigns: tuple[tuple[str, "Pattern"], ...]


@dataclass(frozen=True)
class PatConst:
    value: "Term"


Pattern = Union[PatVar, PatCtor, PatStruct, PatConst]


@dataclass(frozen=True)
class SwitchCase:
    pattern: Pattern
    body: "Term"


@dataclass(frozen=True)
class Switch:
    scrutinee: "Term"
    cases: tuple[SwitchCase, ...]
    default: Optional["Term"]
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Let:
    var: str
    rhs: "Term"
    body: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class RangeBound:
    lo: "Term"
    hi: "Term"


@dataclass(frozen=True)
class KeysBound:
    map: "Term"


QuantBound = Union[RangeBound, KeysBound]


@dataclass(frozen=True)
class Quant:
    kind: str  # "forall" or "exists"
    var: str
    var_ty: TypeExpr
    bound: Optional[QuantBound]
    body: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class IfThenElse:
    cond: "Term"
    then: "Term"
    els: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqIndex:
    seq: "Term"
    index: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqLength:
    seq: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqAppend:
    left: "Term"
    right: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqCons:
    head: "Term"
    tail: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqUpdate:
    index: "Term"
    value: "Term"
    seq: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqSlice:
    lo: "Term"
    hi: "Term"
    seq: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqRepeat:
    value: "Term"
    count: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class SeqRemove:
    index: "Term"
    seq: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class MapGet:
    map: "Term"
    key: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class MapIndom:
    key: "Term"
    map: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class MapEmpty:
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class MapUpdate:
    key: "Term"
    value: "Term"
    map: "Term"
    ty: Optional[TypeExpr] = _ty_field()


@dataclass(frozen=True)
class Default:
    """The designated default value of a type; uninterpreted for primitives."""

    of: TypeExpr
    ty: Optional[TypeExpr] = _ty_field()


Term = Union[
    Var, BoolConst, IntConst, Unop, Binop, Convert, App, Construct, FieldAccess,
    StructLiteral, StructUpdate, Switch, Let, Quant, IfThenElse,
    SeqIndex, SeqLength, SeqAppend, SeqCons, SeqUpdate, SeqSlice, SeqRepeat,
    SeqRemove, MapGet, MapIndom, MapEmpty, MapUpdate, Default,
]


def true_() -> BoolConst:
    return BoolConst(True, ty=BOOL)


def false_() -> BoolConst:
    return BoolConst(False, ty=BOOL)


def int_(value: int) -> IntConst:
    return IntConst(value, ty=INT)


def bv_(value: int, width: int, signed: bool) -> IntConst:
    return IntConst(value % (1 << width), ty=BitVecType(width, signed))


def not_(t: Term) -> Term:
    # Collapse double negation to keep rewritten formulas readable.
    if isinstance(t, Unop) and t.op == "!":
        return t.arg
    if isinstance(t, BoolConst):
        return BoolConst(not t.value, ty=BOOL)
    return Unop("!", t, ty=BOOL)


def and_(*ts: Term) -> Term:
    parts = [t for t in ts if not (isinstance(t, BoolConst) and t.value)]
    if not parts:
        return true_()
    out = parts[0]
    for t in parts[1:]:
        out = Binop("&&", out, t, ty=BOOL)
    return out


def or_(*ts: Term) -> Term:
    if not ts:
        return false_()
    out = ts[0]
    for t in ts[1:]:
        out = Binop("||", out, t, ty=BOOL)
    return out


def implies(lhs: Term, rhs: Term) -> Term:
    return Binop("->", lhs, rhs, ty=BOOL)


def implies_all(conds: list[Term], body: Term) -> Term:
    out = body
    for c in reversed(conds):
        out = implies(c, out)
    return out


def eq(l: Term, r: Term) -> Term:
    return Binop("==", l, r, ty=BOOL)


def ite(c: Term, t: Term, e: Term) -> Term:
    return IfThenElse(c, t, e, ty=t.ty)


# ---------------------------------------------------------------------------
# Goals


@dataclass(frozen=True)
class Assumption:
    label: Optional[str]
    prop: Term


@dataclass(frozen=True)
class Goal:
    """A query under proof: declared variables, assumptions, one conclusion."""

    name: str
    type_vars: tuple[str, ...]
    variables: tuple[tuple[str, TypeExpr], ...]
    assumptions: tuple[Assumption, ...]
    conclusion: Term
    loc: Optional[Loc] = None

    def var_types(self) -> dict[str, TypeExpr]:
        return dict(self.variables)


@dataclass(frozen=True)
class FunctionDecl:
    """A user function; a predicate is a function returning bool."""

    name: str
    params: tuple[tuple[str, TypeExpr], ...]
    ret: TypeExpr
    body: Term
    loc: Optional[Loc] = None


# ---------------------------------------------------------------------------
# Generic traversal

_TERM_TYPES = Term.__args__  # type: ignore[attr-defined]


def is_term(x: object) -> bool:
    return isinstance(x, _TERM_TYPES)


def map_children(t: Term, f: Callable[[Term], Term]) -> Term:
    """Rebuild `t` with `f` applied to each direct child term."""
    if isinstance(t, (Var, BoolConst, IntConst, MapEmpty, Default)):
        return t
    if isinstance(t, Unop):
        return replace(t, arg=f(t.arg))
    if isinstance(t, Binop):
        return replace(t, left=f(t.left), right=f(t.right))
    if isinstance(t, Convert):
        return replace(t, arg=f(t.arg))
    if isinstance(t, App):
        return replace(t, args=tuple(f(a) for a in t.args))
    if isinstance(t, Construct):
        return replace(t, args=tuple(f(a) for a in t.args))
    if isinstance(t, FieldAccess):
        return replace(t, base=f(t.base))
    if isinstance(t, StructLiteral):
        return replace(t, assigns=tuple((n, f(v)) for n, v in t.assigns))
    if isinstance(t, StructUpdate):
        path = tuple(
            IndexStep(f(s.index)) if isinstance(s, IndexStep) else s for s in t.path
        )
        return replace(t, base=f(t.base), path=path, value=f(t.value))
    if isinstance(t, Switch):
        cases = tuple(SwitchCase(c.pattern, f(c.body)) for c in t.cases)
        default = f(t.default) if t.default is not None else None
        return replace(t, scrutinee=f(t.scrutinee), cases=cases, default=default)
    if isinstance(t, Let):
        return replace(t, rhs=f(t.rhs), body=f(t.body))
    if isinstance(t, Quant):
        bound = t.bound
        if isinstance(bound, RangeBound):
            bound = RangeBound(f(bound.lo), f(bound.hi))
        elif isinstance(bound, KeysBound):
            bound = KeysBound(f(bound.map))
        return replace(t, bound=bound, body=f(t.body))
    if isinstance(t, IfThenElse):
        return replace(t, cond=f(t.cond), then=f(t.then), els=f(t.els))
    if isinstance(t, SeqIndex):
        return replace(t, seq=f(t.seq), index=f(t.index))
    if isinstance(t, SeqLength):
        return replace(t, seq=f(t.seq))
    if isinstance(t, SeqAppend):
        return replace(t, left=f(t.left), right=f(t.right))
    if isinstance(t, SeqCons):
        return replace(t, head=f(t.head), tail=f(t.tail))
    if isinstance(t, SeqUpdate):
        return replace(t, index=f(t.index), value=f(t.value), seq=f(t.seq))
    if isinstance(t, SeqSlice):
        return replace(t, lo=f(t.lo), hi=f(t.hi), seq=f(t.seq))
    if isinstance(t, SeqRepeat):
        return replace(t, value=f(t.value), count=f(t.count))
    if isinstance(t, SeqRemove):
        return replace(t, index=f(t.index), seq=f(t.seq))
    if isinstance(t, MapGet):
        return replace(t, map=f(t.map), key=f(t.key))
    if isinstance(t, MapIndom):
        return replace(t, key=f(t.key), map=f(t.map))
    if isinstance(t, MapUpdate):
        return replace(t, key=f(t.key), value=f(t.value), map=f(t.map))
    raise TypeError(f"not a term: {t!r}")


def children(t: Term) -> list[Term]:
    out: list[Term] = []

    def grab(x: Term) -> Term:
        out.append(x)
        return x

    map_children(t, grab)
    return out


def walk(t: Term) -> Iterator[Term]:
    """Pre-order traversal of all subterms, including `t` itself."""
    yield t
    for c in children(t):
        yield from walk(c)


def pattern_vars(p: Pattern) -> list[str]:
    if isinstance(p, PatVar):
        return [] if p.name == "_" else [p.name]
    if isinstance(p, PatCtor):
        out: list[str] = []
        for a in p.args:
            out.extend(pattern_vars(a))
        return out
    if isinstance(p, PatStruct):
        out = []
        for _, a in p.assigns:
            out.extend(pattern_vars(a))
        return out
    return []


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Let):
        return free_vars(t.rhs) | (free_vars(t.body) - {t.var})
    if isinstance(t, Quant):
        out = free_vars(t.body) - {t.var}
        if isinstance(t.bound, RangeBound):
            out |= free_vars(t.bound.lo) | free_vars(t.bound.hi)
        elif isinstance(t.bound, KeysBound):
            out |= free_vars(t.bound.map)
        return out
    if isinstance(t, Switch):
        out = free_vars(t.scrutinee)
        for c in t.cases:
            out |= free_vars(c.body) - frozenset(pattern_vars(c.pattern))
        if t.default is not None:
            out |= free_vars(t.default)
        return out
    out = frozenset()
    for c in children(t):
        out |= free_vars(c)
    return out


def fresh_name(base: str, used: set[str]) -> str:
    """A name not in `used`, derived from `base`; registers the result."""
    if base not in used:
        used.add(base)
        return base
    i = 1
    while f"{base}{i}" in used:
        i += 1
    name = f"{base}{i}"
    used.add(name)
    return name


def _rename_pattern(p: Pattern, renaming: dict[str, str]) -> Pattern:
    if isinstance(p, PatVar):
        return PatVar(renaming.get(p.name, p.name))
    if isinstance(p, PatCtor):
        return PatCtor(p.constructor, tuple(_rename_pattern(a, renaming) for a in p.args))
    if isinstance(p, PatStruct):
        return PatStruct(p.struct, tuple((n, _rename_pattern(a, renaming)) for n, a in p.assigns))
    return p


def subst(t: Term, mapping: dict[str, Term]) -> Term:
    """Capture-avoiding substitution of free variables."""
    if not mapping:
        return t
    if isinstance(t, Var):
        r = mapping.get(t.name, t)
        if r is not t and isinstance(r, Var) and r.ty is None and t.ty is not None:
            # Plain renaming: keep the type recorded at the occurrence.
            return replace(t, name=r.name)
        return r
    if isinstance(t, (Let, Quant, Switch)):
        value_frees: set[str] = set()
        for v in mapping.values():
            value_frees |= free_vars(v)

        def under(binders: list[str], body: Term) -> tuple[list[str], Term]:
            live = {k: v for k, v in mapping.items() if k not in binders}
            clashed = [b for b in binders if b in value_frees and any(
                k in free_vars(body) for k in live
            )]
            if clashed:
                used = set(free_vars(body)) | value_frees | set(binders)
                renaming = {b: fresh_name(b, used) for b in clashed}
                body = subst(body, {b: Var(n) for b, n in renaming.items()})
                binders = [renaming.get(b, b) for b in binders]
                live = {k: v for k, v in mapping.items() if k not in binders}
            return binders, subst(body, live) if live else body

        if isinstance(t, Let):
            rhs = subst(t.rhs, mapping)
            (var,), body = under([t.var], t.body)
            return replace(t, var=var, rhs=rhs, body=body)
        if isinstance(t, Quant):
            bound = t.bound
            if isinstance(bound, RangeBound):
                bound = RangeBound(subst(bound.lo, mapping), subst(bound.hi, mapping))
            elif isinstance(bound, KeysBound):
                bound = KeysBound(subst(bound.map, mapping))
            (var,), body = under([t.var], t.body)
            return replace(t, var=var, bound=bound, body=body)
        # Switch: each case binds its pattern variables.
        scrut = subst(t.scrutinee, mapping)
        cases = []
        for c in t.cases:
            binders = pattern_vars(c.pattern)
            new_binders, body = under(list(binders), c.body)
            pat = c.pattern
            if new_binders != list(binders):
                pat = _rename_pattern(pat, dict(zip(binders, new_binders)))
            cases.append(SwitchCase(pat, body))
        default = subst(t.default, mapping) if t.default is not None else None
        return replace(t, scrutinee=scrut, cases=tuple(cases), default=default)
    return map_children(t, lambda c: subst(c, mapping))


def term_size(t: Term) -> int:
    return sum(1 for _ in walk(t))


def contains_var(t: Term, names: set[str]) -> bool:
    return bool(free_vars(t) & names)
