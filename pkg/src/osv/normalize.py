"""Goal normalization.

Reduces a typed goal to facts built only from generalized atomic terms,
constants, logical/arithmetic operators, if-then-else, and quantifiers,
with equalities applied only to primitive types:

1. expand function and predicate definitions;
2. expand deep structure updates into single-level constructs;
3. compile switch terms to if-then-else chains;
4. remove let bindings (hoisting top-level ones into equations);
5. expand equalities at structure/enumeration/sequence/map types;
6. turn bounded quantifiers into guarded unbounded ones;
7. prenex quantifiers and skolemize outermost existentials, folding the
   negated conclusion into the fact set (refutation form);
8. reduce non-basic sequence/map operations to index/length/get/indom.

Facts that are equalities with an index-free atomic left side act as
rewrite rules (defining equations) and are removed from the active set
after substitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .atoms import decompose_atomic
from .errors import NormalizeError
from .printer import print_term
from .terms import (
    App,
    Assumption,
    children as _children,
    Binop,
    BoolConst,
    Construct,
    Convert,
    Default,
    FieldAccess,
    FieldStep,
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
    and_,
    eq,
    free_vars,
    fresh_name,
    implies,
    int_,
    ite,
    map_children,
    not_,
    subst,
    true_,
    walk,
)
from .types import (
    BOOL,
    INT,
    MapType,
    SeqType,
    SymbolTable,
    TypeExpr,
    is_primitive,
)


@dataclass(frozen=True)
class Fact:
    fid: int
    label: str
    term: Term

    def with_term(self, term: Term) -> "Fact":
        return Fact(self.fid, self.label, term)


@dataclass
class NormalGoal:
    """A goal in refutation normal form.

    `qf_facts` and `q_facts` together assert the assumptions plus the
    negated conclusion; the goal is proved when their conjunction is
    unsatisfiable.  Quantified facts are prenex with a universal
    outermost quantifier.
    """

    name: str
    symbols: SymbolTable
    type_vars: tuple[str, ...]
    variables: dict[str, TypeExpr]
    qf_facts: list[Fact]
    q_facts: list[Fact]
    defining: list[tuple[Term, Term]] = field(default_factory=list)
    dropped: list[Fact] = field(default_factory=list)
    next_fid: int = 0
    used_names: set[str] = field(default_factory=set)

    def new_fid(self) -> int:
        fid = self.next_fid
        self.next_fid += 1
        return fid

    def all_facts(self) -> list[Fact]:
        return self.qf_facts + self.q_facts


def smax(a: Term, b: Term) -> Term:
    return ite(Binop(">=", a, b, ty=BOOL), a, b)


def smin(a: Term, b: Term) -> Term:
    return ite(Binop("<=", a, b, ty=BOOL), a, b)


def _le(a: Term, b: Term) -> Term:
    return Binop("<=", a, b, ty=BOOL)


def _lt(a: Term, b: Term) -> Term:
    return Binop("<", a, b, ty=BOOL)


def _add(a: Term, b: Term) -> Term:
    return Binop("+", a, b, ty=a.ty)


def _sub(a: Term, b: Term) -> Term:
    return Binop("-", a, b, ty=a.ty)


def contains_quant(t: Term) -> bool:
    return any(isinstance(s, Quant) for s in walk(t))


class Normalizer:
    def __init__(self, symbols: SymbolTable, used_names: set[str] | None = None,
                 budget: int = 10000):
        self.symbols = symbols
        self.used = used_names if used_names is not None else set()
        self.budget = budget
        self.rewrites = 0
        self.new_variables: dict[str, TypeExpr] = {}

    def _spend(self, t: Term) -> None:
        self.rewrites += 1
        if self.rewrites > self.budget:
            raise NormalizeError(
                f"rewrite budget exhausted at `{print_term(t)[:200]}`"
            )

    def fresh(self, base: str) -> str:
        return fresh_name(base, self.used)

    def fresh_avoiding(self, base: str, avoid: frozenset[str]) -> str:
        name = base
        i = 1
        while name in self.used or name in avoid:
            name = f"{base}{i}"
            i += 1
        self.used.add(name)
        return name

    # ------------------------------------------------------------------
    # Bottom-up rewriting driver

    def _bottom_up(self, t: Term, rule) -> Term:
        t = map_children(t, lambda c: self._bottom_up(c, rule))
        new = rule(t)
        if new is None:
            return t
        self._spend(t)
        return self._bottom_up(new, rule)

    # ------------------------------------------------------------------
    # Rule 1: function expansion

    def expand_definitions_term(self, t: Term) -> Term:
        def rule(s: Term):
            if isinstance(s, App):
                fn = self.symbols.functions.get(s.fn)
                if fn is None:
                    raise NormalizeError(f"unknown function `{s.fn}`")
                mapping = {name: a for (name, _), a in zip(fn.params, s.args)}
                return subst(fn.body, mapping)
            return None

        return self._bottom_up(t, rule)

    # ------------------------------------------------------------------
    # Rule 4: lets

    def inline_lets_term(self, t: Term) -> Term:
        def rule(s: Term):
            if isinstance(s, Let):
                return subst(s.body, {s.var: s.rhs})
            return None

        return self._bottom_up(t, rule)

    # ------------------------------------------------------------------
    # Rule 2: structure updates

    def expand_updates_term(self, t: Term) -> Term:
        def rule(s: Term):
            if isinstance(s, StructUpdate):
                return self._expand_update(s.base, list(s.path), s.value)
            return None

        return self._bottom_up(t, rule)

    def _expand_update(self, base: Term, path: list, value: Term) -> Term:
        if not path:
            return value
        step = path[0]
        if isinstance(step, FieldStep):
            struct = self.symbols.struct_of(base.ty)
            if struct is None:
                raise NormalizeError(
                    "deep update through an enumeration branch is not supported"
                    f" (at `{print_term(base)}.{step.name}`)"
                )
            assigns = []
            for f in struct.fields:
                old = FieldAccess(base, f.name, ty=f.ty)
                if f.name == step.name:
                    assigns.append((f.name, self._expand_update(old, path[1:], value)))
                else:
                    assigns.append((f.name, old))
            return StructLiteral(struct.name, tuple(assigns), ty=base.ty)
        if isinstance(base.ty, SeqType):
            old = SeqIndex(base, step.index, ty=base.ty.elem)
            return SeqUpdate(step.index, self._expand_update(old, path[1:], value),
                             base, ty=base.ty)
        if isinstance(base.ty, MapType):
            old = MapGet(base, step.index, ty=base.ty.value)
            return MapUpdate(step.index, self._expand_update(old, path[1:], value),
                             base, ty=base.ty)
        raise NormalizeError(f"indexed update step on {base.ty}")

    # ------------------------------------------------------------------
    # Rule 3: switch compilation

    def expand_switch_term(self, t: Term) -> Term:
        def rule(s: Term):
            if isinstance(s, Switch):
                return self._compile_switch(s)
            return None

        return self._bottom_up(t, rule)

    def _pattern_test(self, scrut: Term, pat: Pattern) -> tuple[list[Term], dict[str, Term]]:
        if isinstance(pat, PatVar):
            if pat.name == "_":
                return [], {}
            return [], {pat.name: scrut}
        if isinstance(pat, PatCtor):
            enum = self.symbols.enum_of(scrut.ty)
            idx = enum.branch_index(pat.constructor)
            conds = [eq(FieldAccess(scrut, "id", ty=INT), int_(idx))]
            bindings: dict[str, Term] = {}
            for sub, prm in zip(pat.args, enum.branches[idx].params):
                f = FieldAccess(scrut, prm.name, ty=prm.ty)
                c, b = self._pattern_test(f, sub)
                conds.extend(c)
                bindings.update(b)
            return conds, bindings
        if isinstance(pat, PatStruct):
            struct = self.symbols.struct_of(scrut.ty)
            conds = []
            bindings = {}
            for fname, sub in pat.assigns:
                f = struct.field(fname)
                c, b = self._pattern_test(FieldAccess(scrut, fname, ty=f.ty), sub)
                conds.extend(c)
                bindings.update(b)
            return conds, bindings
        if isinstance(pat, PatConst):
            return [eq(scrut, pat.value)], {}
        raise NormalizeError(f"cannot compile pattern {pat!r}")

    def _irrefutable(self, pat: Pattern) -> bool:
        if isinstance(pat, PatVar):
            return True
        if isinstance(pat, PatStruct):
            return all(self._irrefutable(p) for _, p in pat.assigns)
        return False

    def _covers_all(self, s: Switch) -> bool:
        enum = self.symbols.enum_of(s.scrutinee.ty)
        if any(self._irrefutable(c.pattern) for c in s.cases):
            return True
        if enum is None:
            return False
        covered = {
            c.pattern.constructor
            for c in s.cases
            if isinstance(c.pattern, PatCtor)
            and all(self._irrefutable(p) for p in c.pattern.args)
        }
        return covered == {b.constructor for b in enum.branches}

    def _compile_switch(self, s: Switch) -> Term:
        arms: list[tuple[Term, Term]] = []
        for c in s.cases:
            conds, bindings = self._pattern_test(s.scrutinee, c.pattern)
            arms.append((and_(*conds), subst(c.body, bindings)))
        if s.default is not None:
            out = s.default
        elif self._covers_all(s):
            out = arms.pop()[1]
        else:
            raise NormalizeError(
                f"non-exhaustive switch without default on `{print_term(s.scrutinee)}`"
            )
        for cond, body in reversed(arms):
            if isinstance(cond, BoolConst) and cond.value:
                out = body
            else:
                out = IfThenElse(cond, body, out, ty=s.ty)
        return out

    # ------------------------------------------------------------------
    # Observations: projections, ite pushing, defaults

    def reduce_observations_term(self, t: Term) -> Term:
        return self._bottom_up(t, self._observation_rule)

    def _observation_rule(self, s: Term):
        if isinstance(s, FieldAccess):
            base = s.base
            if isinstance(base, StructLiteral):
                for name, v in base.assigns:
                    if name == s.fld:
                        return v
                raise NormalizeError(f"missing field `{s.fld}` in literal")
            if isinstance(base, Construct):
                if s.fld == "id":
                    return int_(base.index)
                enum = self.symbols.enums[base.enum]
                params = enum.branches[base.index].params
                for p, a in zip(params, base.args):
                    if p.name == s.fld:
                        return a
                return Default(s.ty, ty=s.ty)
            if isinstance(base, IfThenElse):
                return ite(
                    base.cond,
                    FieldAccess(base.then, s.fld, ty=s.ty),
                    FieldAccess(base.els, s.fld, ty=s.ty),
                )
            if isinstance(base, Default):
                return Default(s.ty, ty=s.ty)
        if isinstance(s, SeqLength):
            if isinstance(s.seq, IfThenElse):
                return ite(
                    s.seq.cond,
                    SeqLength(s.seq.then, ty=INT),
                    SeqLength(s.seq.els, ty=INT),
                )
            if isinstance(s.seq, Default):
                return Default(INT, ty=INT)
        if isinstance(s, SeqIndex):
            if isinstance(s.seq, IfThenElse):
                return ite(
                    s.seq.cond,
                    SeqIndex(s.seq.then, s.index, ty=s.ty),
                    SeqIndex(s.seq.els, s.index, ty=s.ty),
                )
            if isinstance(s.seq, Default):
                return Default(s.ty, ty=s.ty)
        if isinstance(s, MapGet):
            if isinstance(s.map, IfThenElse):
                return ite(
                    s.map.cond,
                    MapGet(s.map.then, s.key, ty=s.ty),
                    MapGet(s.map.els, s.key, ty=s.ty),
                )
            if isinstance(s.map, Default):
                return Default(s.ty, ty=s.ty)
        if isinstance(s, MapIndom):
            if isinstance(s.map, IfThenElse):
                return ite(
                    s.map.cond,
                    MapIndom(s.key, s.map.then, ty=BOOL),
                    MapIndom(s.key, s.map.els, ty=BOOL),
                )
            if isinstance(s.map, Default):
                return Default(BOOL, ty=BOOL)
        return None

    # ------------------------------------------------------------------
    # Rule 5: equality expansion

    def expand_equalities_term(self, t: Term) -> Term:
        return self._bottom_up(t, self._equality_rule)

    def _equality_rule(self, s: Term):
        if not isinstance(s, Binop) or s.op not in ("==", "!="):
            return None
        ty = s.left.ty
        if ty is None or is_primitive(ty):
            return None
        if s.op == "!=":
            return not_(Binop("==", s.left, s.right, ty=BOOL))
        for side, other, flip in ((s.left, s.right, False), (s.right, s.left, True)):
            if isinstance(side, IfThenElse):
                l1 = (side.then, other) if not flip else (other, side.then)
                l2 = (side.els, other) if not flip else (other, side.els)
                return ite(
                    side.cond,
                    Binop("==", l1[0], l1[1], ty=BOOL),
                    Binop("==", l2[0], l2[1], ty=BOOL),
                )
        return self._expand_eq(s.left, s.right, ty)

    def _expand_eq(self, l: Term, r: Term, ty: TypeExpr) -> Term:
        struct = self.symbols.struct_of(ty)
        if struct is not None:
            parts = [
                eq(FieldAccess(l, f.name, ty=f.ty), FieldAccess(r, f.name, ty=f.ty))
                for f in struct.fields
            ]
            return and_(*parts) if parts else true_()
        enum = self.symbols.enum_of(ty)
        if enum is not None:
            lid = FieldAccess(l, "id", ty=INT)
            rid = FieldAccess(r, "id", ty=INT)
            parts = [eq(lid, rid)]
            for i, b in enumerate(enum.branches):
                if not b.params:
                    continue
                fields = and_(*[
                    eq(FieldAccess(l, p.name, ty=p.ty), FieldAccess(r, p.name, ty=p.ty))
                    for p in b.params
                ])
                parts.append(implies(eq(lid, int_(i)), fields))
            return and_(*parts)
        if isinstance(ty, SeqType):
            i = self.fresh_avoiding("i", free_vars(l) | free_vars(r))
            vi = Var(i, ty=INT)
            body = implies(
                and_(_le(int_(0), vi), _lt(vi, SeqLength(l, ty=INT))),
                eq(SeqIndex(l, vi, ty=ty.elem), SeqIndex(r, vi, ty=ty.elem)),
            )
            return and_(
                eq(SeqLength(l, ty=INT), SeqLength(r, ty=INT)),
                Quant("forall", i, INT, None, body, ty=BOOL),
            )
        if isinstance(ty, MapType):
            k = self.fresh_avoiding("k", free_vars(l) | free_vars(r))
            vk = Var(k, ty=ty.key)
            dom = Quant(
                "forall", k, ty.key, None,
                eq(MapIndom(vk, l, ty=BOOL), MapIndom(vk, r, ty=BOOL)), ty=BOOL,
            )
            vals = Quant(
                "forall", k, ty.key, None,
                implies(
                    MapIndom(vk, l, ty=BOOL),
                    eq(MapGet(l, vk, ty=ty.value), MapGet(r, vk, ty=ty.value)),
                ),
                ty=BOOL,
            )
            return and_(dom, vals)
        raise NormalizeError(f"cannot expand equality at type {ty}")

    # ------------------------------------------------------------------
    # Rule 8: non-basic operations

    def reduce_nonbasic_term(self, t: Term) -> Term:
        return self._bottom_up(t, lambda s: self._observation_rule(s) or self._nonbasic_rule(s))

    def _nonbasic_rule(self, s: Term):
        if isinstance(s, SeqLength):
            a = s.seq
            if isinstance(a, SeqAppend):
                return _add(SeqLength(a.left, ty=INT), SeqLength(a.right, ty=INT))
            if isinstance(a, SeqCons):
                return _add(int_(1), SeqLength(a.tail, ty=INT))
            if isinstance(a, SeqUpdate):
                return SeqLength(a.seq, ty=INT)
            if isinstance(a, SeqSlice):
                lo = smax(a.lo, int_(0))
                hi = smin(a.hi, SeqLength(a.seq, ty=INT))
                return smax(int_(0), _sub(hi, lo))
            if isinstance(a, SeqRepeat):
                return smax(int_(0), a.count)
            if isinstance(a, SeqRemove):
                return smax(int_(0), _sub(SeqLength(a.seq, ty=INT), int_(1)))
        if isinstance(s, SeqIndex):
            a, i = s.seq, s.index
            elem_ty = s.ty
            dflt = Default(elem_ty, ty=elem_ty)
            if isinstance(a, SeqAppend):
                ll = SeqLength(a.left, ty=INT)
                lr = SeqLength(a.right, ty=INT)
                return ite(
                    and_(_le(int_(0), i), _lt(i, ll)),
                    SeqIndex(a.left, i, ty=elem_ty),
                    ite(
                        and_(_le(ll, i), _lt(i, _add(ll, lr))),
                        SeqIndex(a.right, _sub(i, ll), ty=elem_ty),
                        dflt,
                    ),
                )
            if isinstance(a, SeqCons):
                lt = SeqLength(a.tail, ty=INT)
                return ite(
                    eq(i, int_(0)),
                    a.head,
                    ite(
                        and_(_le(int_(1), i), _lt(i, _add(int_(1), lt))),
                        SeqIndex(a.tail, _sub(i, int_(1)), ty=elem_ty),
                        dflt,
                    ),
                )
            if isinstance(a, SeqUpdate):
                la = SeqLength(a.seq, ty=INT)
                in_range = and_(_le(int_(0), a.index), _lt(a.index, la))
                return ite(
                    and_(eq(i, a.index), in_range),
                    a.value,
                    SeqIndex(a.seq, i, ty=elem_ty),
                )
            if isinstance(a, SeqSlice):
                lo = smax(a.lo, int_(0))
                hi = smin(a.hi, SeqLength(a.seq, ty=INT))
                length = smax(int_(0), _sub(hi, lo))
                return ite(
                    and_(_le(int_(0), i), _lt(i, length)),
                    SeqIndex(a.seq, _add(lo, i), ty=elem_ty),
                    dflt,
                )
            if isinstance(a, SeqRepeat):
                return ite(
                    and_(_le(int_(0), i), _lt(i, a.count)), a.value, dflt
                )
            if isinstance(a, SeqRemove):
                return ite(
                    _lt(i, a.index),
                    SeqIndex(a.seq, i, ty=elem_ty),
                    SeqIndex(a.seq, _add(i, int_(1)), ty=elem_ty),
                )
        if isinstance(s, MapGet):
            m, k = s.map, s.key
            if isinstance(m, MapEmpty):
                return Default(s.ty, ty=s.ty)
            if isinstance(m, MapUpdate):
                return ite(
                    eq(k, m.key), m.value, MapGet(m.map, k, ty=s.ty)
                )
        if isinstance(s, MapIndom):
            m, k = s.map, s.key
            if isinstance(m, MapEmpty):
                return BoolConst(False, ty=BOOL)
            if isinstance(m, MapUpdate):
                return Binop(
                    "||", eq(k, m.key), MapIndom(k, m.map, ty=BOOL), ty=BOOL
                )
        return None

    # ------------------------------------------------------------------
    # Rule 6: bounded quantifiers

    def unbound_quantifiers_term(self, t: Term) -> Term:
        def rule(s: Term):
            if isinstance(s, Quant) and s.bound is not None:
                return self._unbound_one(s)
            return None

        return self._bottom_up(t, rule)

    # ------------------------------------------------------------------
    # Rule 7: prenex + skolemization

    def _unbound_one(self, s: Quant) -> Quant:
        v = Var(s.var, ty=s.var_ty)
        if isinstance(s.bound, RangeBound):
            guard = and_(_le(s.bound.lo, v), _lt(v, s.bound.hi))
        else:
            guard = MapIndom(v, s.bound.map, ty=BOOL)
        body = implies(guard, s.body) if s.kind == "forall" else and_(guard, s.body)
        return replace(s, bound=None, body=body)

    def _find_offending_ite(self, t: Term) -> IfThenElse | None:
        """First non-boolean ite with a quantified condition reachable
        without crossing a boolean-typed subterm."""
        for c in _children(t):
            if c.ty == BOOL:
                continue
            if isinstance(c, IfThenElse) and contains_quant(c.cond):
                return c
            found = self._find_offending_ite(c)
            if found is not None:
                return found
        return None

    def lift_quantified_conditions(self, t: Term) -> Term:
        """Hoist non-boolean ites whose conditions hide quantifiers (for
        example an expanded map equality used as a branch condition) up to
        the nearest boolean context, where prenexing can dissolve them.
        No binder can sit between that context and the ite, because every
        binder is itself boolean-typed."""
        t = map_children(t, self.lift_quantified_conditions)
        if t.ty != BOOL:
            return t
        while True:
            offender = self._find_offending_ite(t)
            if offender is None:
                return t
            self._spend(t)
            t = IfThenElse(
                offender.cond,
                _replace_once(t, offender, offender.then),
                _replace_once(t, offender, offender.els),
                ty=BOOL,
            )

    def prenex_term(self, t: Term) -> Term:
        t = self.lift_quantified_conditions(t)
        return self._prenex(t)

    def _prenex(self, t: Term) -> Term:
        if isinstance(t, Quant):
            if t.bound is not None:
                t = self._unbound_one(t)
            return replace(t, body=self._prenex(t.body))
        if isinstance(t, Unop) and t.op == "!":
            inner = self._prenex(t.arg)
            return self._negate_prenex(inner)
        if isinstance(t, Binop) and t.op in ("&&", "||", "->"):
            l = self._prenex(t.left)
            r = self._prenex(t.right)
            if not isinstance(l, Quant) and not isinstance(r, Quant):
                return replace(t, left=l, right=r)
            return self._pull(t.op, l, r)
        if isinstance(t, IfThenElse) and t.ty == BOOL and contains_quant(t):
            lowered = and_(
                implies(t.cond, t.then), implies(not_(t.cond), t.els)
            )
            return self._prenex(lowered)
        if (
            isinstance(t, Binop)
            and t.op in ("==", "!=")
            and t.left.ty == BOOL
            and (contains_quant(t.left) or contains_quant(t.right))
        ):
            iff = and_(implies(t.left, t.right), implies(t.right, t.left))
            if t.op == "!=":
                iff = not_(iff)
            return self._prenex(iff)
        return t

    def _negate_prenex(self, t: Term) -> Term:
        if isinstance(t, Quant):
            dual = "exists" if t.kind == "forall" else "forall"
            return Quant(dual, t.var, t.var_ty, None, self._negate_prenex(t.body), ty=BOOL)
        return not_(t)

    def _pull(self, op: str, l: Term, r: Term) -> Term:
        # Pull quantifier blocks to the front, renaming on capture.
        if isinstance(l, Quant):
            kind = l.kind
            if op == "->":
                kind = "exists" if kind == "forall" else "forall"
            var, body = l.var, l.body
            if var in free_vars(r) or var in self.used:
                new = self.fresh(var)
                body = subst(body, {var: Var(new, ty=l.var_ty)})
                var = new
            else:
                self.used.add(var)
            return Quant(kind, var, l.var_ty, None,
                         self._pull(op, body, r), ty=BOOL)
        if isinstance(r, Quant):
            var, body = r.var, r.body
            if var in free_vars(l) or var in self.used:
                new = self.fresh(var)
                body = subst(body, {var: Var(new, ty=r.var_ty)})
                var = new
            else:
                self.used.add(var)
            return Quant(r.kind, var, r.var_ty, None,
                         self._pull(op, l, body), ty=BOOL)
        return Binop(op, l, r, ty=BOOL)

    def skolemize_fact(self, t: Term) -> tuple[Term, dict[str, TypeExpr]]:
        """Strip outermost existentials, introducing fresh goal constants."""
        new_vars: dict[str, TypeExpr] = {}
        while isinstance(t, Quant) and t.kind == "exists":
            name = self.fresh(t.var)
            new_vars[name] = t.var_ty
            t = subst(t.body, {t.var: Var(name, ty=t.var_ty)})
        return t, new_vars


def _freshen_binders(t: Term, forbidden: set[str], used: set[str]) -> Term:
    """Rename quantifier binders that collide with goal variables or with
    an enclosing binder; keeps instantiation-time substitution by name safe."""
    if isinstance(t, Quant):
        var, body = t.var, t.body
        if var in forbidden:
            new = fresh_name(var, used)
            body = subst(body, {var: Var(new, ty=t.var_ty)})
            var = new
        else:
            used.add(var)
        body = _freshen_binders(body, forbidden | {var}, used)
        return replace(t, var=var, body=body)
    return map_children(t, lambda c: _freshen_binders(c, forbidden, used))


def nnf_light(t: Term) -> Term:
    """Expose conjunctions hidden under negation at the top of a fact.

    Rewrites only shapes that create further splittable facts:
    double negations, negated implications, and negated disjunctions.
    Quantified bodies are left untouched.
    """
    if isinstance(t, Unop) and t.op == "!":
        a = t.arg
        if isinstance(a, Unop) and a.op == "!":
            return nnf_light(a.arg)
        if isinstance(a, Binop) and a.op == "->":
            return and_(nnf_light(a.left), nnf_light(not_(a.right)))
        if isinstance(a, Binop) and a.op == "||":
            return and_(nnf_light(not_(a.left)), nnf_light(not_(a.right)))
        if isinstance(a, Binop) and a.op == "!=":
            return Binop("==", a.left, a.right, ty=BOOL)
        if isinstance(a, Binop) and a.op == "==" and a.left.ty is not None and is_primitive(a.left.ty):
            return Binop("!=", a.left, a.right, ty=BOOL)
        return t
    if isinstance(t, Binop) and t.op == "&&":
        return and_(nnf_light(t.left), nnf_light(t.right))
    return t


def split_conj(t: Term) -> list[Term]:
    if isinstance(t, Binop) and t.op == "&&":
        return split_conj(t.left) + split_conj(t.right)
    if isinstance(t, BoolConst) and t.value:
        return []
    return [t]


def _replace_once(t: Term, target: Term, repl: Term) -> Term:
    """Replace structural occurrences of `target` (no binder crossing can
    occur for the hoisting use: the path passes only non-boolean nodes)."""
    if t == target:
        return repl
    return map_children(t, lambda c: _replace_once(c, target, repl))


def _rewrite_subterm(t: Term, target: Term, repl: Term) -> Term:
    """Replace occurrences of `target`; skips scopes that rebind its variables."""
    if t == target:
        return repl
    if isinstance(t, Quant) and t.var in free_vars(target):
        bound = t.bound
        if isinstance(bound, RangeBound):
            bound = RangeBound(
                _rewrite_subterm(bound.lo, target, repl),
                _rewrite_subterm(bound.hi, target, repl),
            )
        elif isinstance(bound, KeysBound):
            bound = KeysBound(_rewrite_subterm(bound.map, target, repl))
        return replace(t, bound=bound)
    if isinstance(t, Let) and t.var in free_vars(target):
        return replace(t, rhs=_rewrite_subterm(t.rhs, target, repl))
    return map_children(t, lambda c: _rewrite_subterm(c, target, repl))


def find_defining_equations(
    facts: list[Fact],
) -> tuple[list[tuple[Fact, Term, Term]], list[Fact]]:
    """Split facts into oriented defining equations and the rest.

    A defining equation is an equality whose left side is a generalized
    atomic term with no indices.  When both sides qualify the equation is
    oriented with the lexicographically smaller path on the left.  Cyclic
    definitions are demoted to ordinary facts.
    """
    candidates: list[tuple[Fact, Term, Term]] = []
    rest: list[Fact] = []
    defined: set[str] = set()
    for f in facts:
        t = f.term
        if isinstance(t, Binop) and t.op == "==":
            dl = decompose_atomic(t.left)
            dr = decompose_atomic(t.right)
            lhs = rhs = None
            if dl is not None and not dl.idx and dr is not None and not dr.idx:
                if dl.name == dr.name:
                    continue  # x == x: trivially true, drop
                if dl.name <= dr.name:
                    lhs, rhs = t.left, t.right
                else:
                    lhs, rhs = t.right, t.left
            elif dl is not None and not dl.idx:
                lhs, rhs = t.left, t.right
            elif dr is not None and not dr.idx:
                lhs, rhs = t.right, t.left
            if lhs is not None:
                key = decompose_atomic(lhs).name
                # Reject a second definition of the same atom, and any pair
                # of definitions whose left sides overlap (one a subterm of
                # the other): rewriting by one would hide the other's
                # occurrences and silently lose its content.
                overlaps = any(
                    _occurs(lhs, other) or _occurs(other, lhs)
                    for _, other, _ in candidates
                )
                if key not in defined and not _occurs(lhs, rhs) and not overlaps:
                    defined.add(key)
                    candidates.append((f, lhs, rhs))
                    continue
        rest.append(f)

    # Reject definition cycles (a == f(b), b == g(a)): depth-first search
    # over "lhs occurs in rhs" dependencies, demoting members of cycles.
    deps: dict[int, set[int]] = {}
    for i, (_, _, rhs) in enumerate(candidates):
        deps[i] = {
            j for j, (_, lhs2, _) in enumerate(candidates) if i != j and _occurs(lhs2, rhs)
        }
    order: list[int] = []
    state: dict[int, int] = {}
    cyclic: set[int] = set()

    def visit(i: int, stack: tuple[int, ...]) -> None:
        if state.get(i) == 2:
            return
        if i in stack:
            cyclic.update(stack[stack.index(i):])
            return
        state[i] = 1
        for j in sorted(deps[i]):
            visit(j, stack + (i,))
        state[i] = 2
        if i not in cyclic:
            order.append(i)

    for i in range(len(candidates)):
        visit(i, ())

    defs: list[tuple[Fact, Term, Term]] = []
    for i in order:
        if i in cyclic:
            continue
        f, lhs, rhs = candidates[i]
        for _, dl, dr in defs:
            rhs = _rewrite_subterm(rhs, dl, dr)
        defs.append((f, lhs, rhs))
    for i in sorted(cyclic):
        rest.append(candidates[i][0])
    return defs, rest


def _occurs(needle: Term, hay: Term) -> bool:
    return any(s == needle for s in walk(hay))


DEFAULT_BUDGET = 10000


def normalize(goal: Goal, symbols: SymbolTable, budget: int = DEFAULT_BUDGET) -> NormalGoal:
    """Run the full normalization pipeline on a typed goal."""
    # Only free names block reuse; eliminated binder names may be reused
    # (for example by the skolem constant replacing the binder itself).
    used = set(dict(goal.variables))
    for a in goal.assumptions:
        used |= free_vars(a.prop)
    used |= free_vars(goal.conclusion)

    nz = Normalizer(symbols, used, budget)
    ng = NormalGoal(
        name=goal.name,
        symbols=symbols,
        type_vars=goal.type_vars,
        variables=dict(goal.variables),
        qf_facts=[],
        q_facts=[],
        used_names=used,
    )

    facts: list[tuple[str, Term]] = []
    for idx, a in enumerate(goal.assumptions):
        facts.append((a.label or f"A{idx}", a.prop))

    # Rules 1 and 4 on everything, then 2 and 3; hoist top-level lets.
    staged: list[tuple[str, Term]] = []
    conclusion = goal.conclusion

    def stage_a(t: Term) -> Term:
        t = nz.expand_definitions_term(t)
        return t

    facts = [(lbl, stage_a(t)) for lbl, t in facts]
    conclusion = stage_a(conclusion)

    for lbl, t in facts:
        while isinstance(t, Let):
            name = nz.fresh(t.var)
            ng.variables[name] = t.rhs.ty
            staged.append((f"{lbl}.let", eq(Var(name, ty=t.rhs.ty), t.rhs)))
            t = subst(t.body, {t.var: Var(name, ty=t.rhs.ty)})
        staged.append((lbl, t))
    while isinstance(conclusion, Let):
        name = nz.fresh(conclusion.var)
        ng.variables[name] = conclusion.rhs.ty
        staged.append((f"goal.let", eq(Var(name, ty=conclusion.rhs.ty), conclusion.rhs)))
        conclusion = subst(conclusion.body, {conclusion.var: Var(name, ty=conclusion.rhs.ty)})

    def stage_b(t: Term) -> Term:
        t = nz.inline_lets_term(t)
        t = nz.expand_updates_term(t)
        t = nz.expand_switch_term(t)
        t = nz.reduce_observations_term(t)
        return t

    facts = [(lbl, stage_b(t)) for lbl, t in staged]
    conclusion = stage_b(conclusion)

    # Split top-level conjunctions before looking for defining equations.
    split_facts: list[Fact] = []
    for lbl, t in facts:
        for part in split_conj(t):
            split_facts.append(Fact(ng.new_fid(), lbl, part))

    defs, active = find_defining_equations(split_facts)
    for f, lhs, rhs in defs:
        ng.defining.append((lhs, rhs))
        active = [a.with_term(_rewrite_subterm(a.term, lhs, rhs)) for a in active]
        conclusion = _rewrite_subterm(conclusion, lhs, rhs)

    # Rules 5 and 8 to fixpoint, re-applying defining rewrites.
    def stage_c(t: Term) -> Term:
        while True:
            new = nz.reduce_nonbasic_term(nz.expand_equalities_term(t))
            for lhs, rhs in ng.defining:
                new = _rewrite_subterm(new, lhs, rhs)
            if new == t:
                return t
            t = new

    active = [a.with_term(stage_c(a.term)) for a in active]
    conclusion = stage_c(conclusion)

    # Rule 6, then rule 7 with the negated conclusion folded in.  Guards
    # introduced for keys-bounded quantifiers may observe unreduced map
    # expressions, so the reduction pass runs once more.
    active = [
        a.with_term(nz.reduce_nonbasic_term(nz.unbound_quantifiers_term(a.term)))
        for a in active
    ]
    conclusion = nz.reduce_nonbasic_term(nz.unbound_quantifiers_term(conclusion))

    final: list[Fact] = []
    for a in active:
        parts = split_conj(a.term)
        if len(parts) == 1:
            final.append(a.with_term(parts[0]))
        else:
            final.extend(Fact(ng.new_fid(), a.label, part) for part in parts)
    refutation = [Fact(ng.new_fid(), "goal", not_(conclusion))]

    for f in final + refutation:
        t = nz.prenex_term(f.term)
        t, new_vars = nz.skolemize_fact(t)
        ng.variables.update(new_vars)
        if not isinstance(t, Quant):
            t = nnf_light(t)
        for part in split_conj(t):
            part = _freshen_binders(part, set(ng.variables), nz.used)
            fact = Fact(ng.new_fid(), f.label, part)
            if contains_quant(part):
                if not isinstance(part, Quant):
                    raise NormalizeError(
                        f"quantifier left in non-prenex position: `{print_term(part)[:200]}`"
                    )
                ng.q_facts.append(fact)
            else:
                ng.qf_facts.append(fact)

    ng.used_names = nz.used
    return ng


def renormalize(ng: NormalGoal, new_facts: list[Fact], budget: int = DEFAULT_BUDGET) -> None:
    """Re-normalize facts produced by instantiation and fold them into `ng`.

    Instantiated bodies are already free of switches, updates, and lets;
    what can appear is a defining equation, a compound equality exposed by
    substitution, or an inner quantifier that is now outermost.
    """
    nz = Normalizer(ng.symbols, ng.used_names, budget)

    expanded: list[Fact] = []
    for f in new_facts:
        t = nz.reduce_observations_term(f.term)
        for part in split_conj(t):
            expanded.append(Fact(ng.new_fid(), f.label, part))

    defs, active = find_defining_equations(expanded)
    if defs:
        for f, lhs, rhs in defs:
            ng.defining.append((lhs, rhs))
            active = [a.with_term(_rewrite_subterm(a.term, lhs, rhs)) for a in active]
            ng.qf_facts = [a.with_term(_rewrite_subterm(a.term, lhs, rhs)) for a in ng.qf_facts]
            ng.q_facts = [a.with_term(_rewrite_subterm(a.term, lhs, rhs)) for a in ng.q_facts]

    def stage_c(t: Term) -> Term:
        while True:
            new = nz.reduce_nonbasic_term(nz.expand_equalities_term(t))
            for lhs, rhs in ng.defining:
                new = _rewrite_subterm(new, lhs, rhs)
            if new == t:
                return t
            t = new

    for a in active:
        t = stage_c(a.term)
        t = nz.reduce_nonbasic_term(nz.unbound_quantifiers_term(t))
        t = nz.prenex_term(t)
        t, new_vars = nz.skolemize_fact(t)
        ng.variables.update(new_vars)
        if not isinstance(t, Quant):
            t = nnf_light(t)
        for part in split_conj(t):
            part = _freshen_binders(part, set(ng.variables), nz.used)
            fact = Fact(ng.new_fid(), a.label, part)
            if contains_quant(part):
                ng.q_facts.append(fact)
            else:
                ng.qf_facts.append(fact)


# ---------------------------------------------------------------------------
# Normal-form checking


def check_term_normal(t: Term, violations: list[str]) -> None:
    if isinstance(t, (BoolConst, IntConst)):
        return
    if isinstance(t, Default):
        if not is_primitive(t.of):
            violations.append(f"non-primitive default `{print_term(t)}`")
        return
    d = decompose_atomic(t)
    if d is not None:
        for i in d.idx:
            check_term_normal(i, violations)
        return
    if isinstance(t, Unop):
        check_term_normal(t.arg, violations)
        return
    if isinstance(t, Binop):
        if t.op in ("==", "!=") and not (
            t.left.ty is not None and is_primitive(t.left.ty)
        ):
            violations.append(
                f"equality at non-primitive type {t.left.ty}: `{print_term(t)}`"
            )
            return
        check_term_normal(t.left, violations)
        check_term_normal(t.right, violations)
        return
    if isinstance(t, Convert):
        check_term_normal(t.arg, violations)
        return
    if isinstance(t, IfThenElse):
        check_term_normal(t.cond, violations)
        check_term_normal(t.then, violations)
        check_term_normal(t.els, violations)
        return
    if isinstance(t, Quant):
        if t.bound is not None:
            violations.append(f"bounded quantifier `{print_term(t)}`")
            return
        check_term_normal(t.body, violations)
        return
    violations.append(f"non-normal construct `{print_term(t)[:120]}`")


def check_normal_form(ng: NormalGoal) -> tuple[bool, list[str]]:
    """Theorem-1 shape check: atoms, constants, operators, ite, quantifiers."""
    violations: list[str] = []
    for f in ng.all_facts():
        check_term_normal(f.term, violations)
    return (not violations), violations


# ---------------------------------------------------------------------------
# Single-rule entry points over whole goals (used by rule-preservation tests
# and for inspection; `normalize` composes the same machinery).


def _goal_used_names(goal: Goal) -> set[str]:
    used = set(dict(goal.variables))
    for t in [a.prop for a in goal.assumptions] + [goal.conclusion]:
        used |= free_vars(t)
    return used


def _map_goal(goal: Goal, symbols: SymbolTable, f) -> Goal:
    assumptions = tuple(Assumption(a.label, f(a.prop)) for a in goal.assumptions)
    return replace(goal, assumptions=assumptions, conclusion=f(goal.conclusion))


def expand_definitions(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.expand_definitions_term)


def expand_struct_updates(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.expand_updates_term)


def expand_switch(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.expand_switch_term)


def lift_lets(goal: Goal, symbols: SymbolTable) -> Goal:
    """Hoist top-level lets into fresh variables plus equations; inline the rest."""
    nz = Normalizer(symbols, _goal_used_names(goal))
    variables = list(goal.variables)
    assumptions: list[Assumption] = []
    for a in goal.assumptions:
        t = a.prop
        while isinstance(t, Let):
            name = nz.fresh(t.var)
            variables.append((name, t.rhs.ty))
            assumptions.append(Assumption(None, eq(Var(name, ty=t.rhs.ty), t.rhs)))
            t = subst(t.body, {t.var: Var(name, ty=t.rhs.ty)})
        assumptions.append(Assumption(a.label, nz.inline_lets_term(t)))
    conclusion = goal.conclusion
    while isinstance(conclusion, Let):
        name = nz.fresh(conclusion.var)
        variables.append((name, conclusion.rhs.ty))
        assumptions.append(
            Assumption(None, eq(Var(name, ty=conclusion.rhs.ty), conclusion.rhs))
        )
        conclusion = subst(
            conclusion.body, {conclusion.var: Var(name, ty=conclusion.rhs.ty)}
        )
    return replace(
        goal,
        variables=tuple(variables),
        assumptions=tuple(assumptions),
        conclusion=nz.inline_lets_term(conclusion),
    )


def expand_equalities(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.expand_equalities_term)


def unbound_quantifiers(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.unbound_quantifiers_term)


def reduce_nonbasic(goal: Goal, symbols: SymbolTable) -> Goal:
    nz = Normalizer(symbols, _goal_used_names(goal))
    return _map_goal(goal, symbols, nz.reduce_nonbasic_term)


def prenex_skolemize(goal: Goal, symbols: SymbolTable) -> Goal:
    """Prenex assumptions, skolemizing their outermost existentials;
    conclusion-side outermost universals become fresh goal variables."""
    nz = Normalizer(symbols, _goal_used_names(goal))
    variables = list(goal.variables)
    assumptions = []
    for a in goal.assumptions:
        t, new_vars = nz.skolemize_fact(nz.prenex_term(a.prop))
        variables.extend(new_vars.items())
        assumptions.append(Assumption(a.label, t))
    conclusion = nz.prenex_term(goal.conclusion)
    while isinstance(conclusion, Quant) and conclusion.kind == "forall":
        name = nz.fresh(conclusion.var)
        variables.append((name, conclusion.var_ty))
        conclusion = subst(
            conclusion.body, {conclusion.var: Var(name, ty=conclusion.var_ty)}
        )
    return replace(
        goal,
        variables=tuple(variables),
        assumptions=tuple(assumptions),
        conclusion=conclusion,
    )


def apply_defining_equations(goal: Goal, symbols: SymbolTable) -> Goal:
    """Use index-free atomic equalities as left-to-right rewrites; the used
    equations are dropped from the assumption list."""
    facts = [
        Fact(i, a.label or f"A{i}", a.prop) for i, a in enumerate(goal.assumptions)
    ]
    defs, active = find_defining_equations(facts)
    conclusion = goal.conclusion
    for _, lhs, rhs in defs:
        active = [a.with_term(_rewrite_subterm(a.term, lhs, rhs)) for a in active]
        conclusion = _rewrite_subterm(conclusion, lhs, rhs)
    return replace(
        goal,
        assumptions=tuple(Assumption(a.label, a.term) for a in active),
        conclusion=conclusion,
    )
