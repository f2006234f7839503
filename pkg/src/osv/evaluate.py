"""Reference interpreter over finite models.

Evaluates the full term language on concrete values: sequences as lists,
maps as dicts, structures as field dicts, enumeration values as
(branch, fields) pairs.  Out-of-range reads and missing keys produce the
model's default value for the element type, mirroring the symbolic
semantics where defaults are uninterpreted constants chosen by the model.

This interpreter is deliberately independent of the normalizer and the
SMT encoding; the test suite compares both against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import SpecError
from .terms import (
    App,
    Binop,
    BoolConst,
    Construct,
    Convert,
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
from .types import (
    BitVecType,
    BoolType,
    IntType,
    MapType,
    SeqType,
    SymbolTable,
    TypeExpr,
    TypeVar,
    is_primitive,
)


@dataclass(frozen=True)
class EnumVal:
    branch: int
    fields: tuple[tuple[str, object], ...]

    def field(self, name: str):
        for n, v in self.fields:
            if n == name:
                return v
        return None

    def has_field(self, name: str) -> bool:
        return any(n == name for n, _ in self.fields)


@dataclass(frozen=True)
class DefaultVal:
    """The default value of a compound type; observations reduce to defaults."""

    of: TypeExpr


@dataclass
class Model:
    """A finite model: variable values, default constants, quantifier window."""

    symbols: SymbolTable
    values: dict[str, object] = dc_field(default_factory=dict)
    defaults: dict[str, object] = dc_field(default_factory=dict)
    int_lo: int = -8
    int_hi: int = 8

    def default(self, ty: TypeExpr):
        if is_primitive(ty):
            key = str(ty)
            if key not in self.defaults:
                self.defaults[key] = False if isinstance(ty, BoolType) else 0
            return self.defaults[key]
        return DefaultVal(ty)


def _as_signed(v: int, width: int) -> int:
    half = 1 << (width - 1)
    return v - (1 << width) if v >= half else v


def _bv_value(t: Term, v: int) -> int:
    assert isinstance(t.ty, BitVecType)
    return _as_signed(v, t.ty.width) if t.ty.signed else v


def eval_eq(ty: TypeExpr, a, b, model: Model) -> bool:
    """Observational equality, matching the normalizer's equality expansion."""
    if is_primitive(ty):
        return a == b
    if isinstance(ty, SeqType):
        la = _obs_len(a, ty, model)
        lb = _obs_len(b, ty, model)
        if la != lb:
            return False
        return all(
            eval_eq(ty.elem, _obs_index(a, i, ty, model), _obs_index(b, i, ty, model), model)
            for i in range(max(la, 0))
        )
    if isinstance(ty, MapType):
        ka = _obs_keys(a, ty, model)
        kb = _obs_keys(b, ty, model)
        if ka != kb:
            return False
        return all(
            eval_eq(ty.value, _obs_get(a, k, ty, model), _obs_get(b, k, ty, model), model)
            for k in sorted(ka, key=repr)
        )
    struct = model.symbols.struct_of(ty)
    if struct is not None:
        return all(
            eval_eq(f.ty, _obs_field(a, f.name, f.ty, ty, model),
                    _obs_field(b, f.name, f.ty, ty, model), model)
            for f in struct.fields
        )
    enum = model.symbols.enum_of(ty)
    if enum is not None:
        ida = _obs_id(a, model)
        idb = _obs_id(b, model)
        if ida != idb:
            return False
        for i, branch in enumerate(enum.branches):
            if ida == i:
                return all(
                    eval_eq(p.ty, _obs_field(a, p.name, p.ty, ty, model),
                            _obs_field(b, p.name, p.ty, ty, model), model)
                    for p in branch.params
                )
        return True
    raise SpecError(f"cannot compare values of type {ty}")


# -- observations (uniform over concrete and default values)


def _obs_len(v, ty: SeqType, model: Model) -> int:
    if isinstance(v, DefaultVal):
        return model.default(IntType())
    return len(v)


def _obs_index(v, i: int, ty: SeqType, model: Model):
    if isinstance(v, DefaultVal):
        return model.default(ty.elem)
    if 0 <= i < len(v):
        return v[i]
    return model.default(ty.elem)


def _obs_keys(v, ty: MapType, model: Model) -> frozenset:
    if isinstance(v, DefaultVal):
        return frozenset()
    return frozenset(v.keys())


def _obs_get(v, k, ty: MapType, model: Model):
    if isinstance(v, DefaultVal):
        return model.default(ty.value)
    if k in v:
        return v[k]
    return model.default(ty.value)


def _obs_field(v, name: str, fty: TypeExpr, owner: TypeExpr, model: Model):
    if isinstance(v, DefaultVal):
        return model.default(fty)
    if isinstance(v, EnumVal):
        if v.has_field(name):
            return v.field(name)
        return model.default(fty)
    return v[name]


def _obs_id(v, model: Model) -> int:
    if isinstance(v, DefaultVal):
        return model.default(IntType())
    assert isinstance(v, EnumVal)
    return v.branch


class Evaluator:
    def __init__(self, model: Model, max_enum_width: int = 10):
        self.model = model
        self.symbols = model.symbols
        self.max_enum_width = max_enum_width

    def eval_goal(self, goal: Goal) -> bool:
        env = dict(self.model.values)
        for a in goal.assumptions:
            if not self.eval(a.prop, env):
                return True  # vacuously valid under this model
        return bool(self.eval(goal.conclusion, env))

    def eval_facts(self, facts: list[Term]) -> bool:
        env = dict(self.model.values)
        return all(self.eval(f, env) for f in facts)

    def eval(self, t: Term, env: dict[str, object]):
        m = self.model
        if isinstance(t, Var):
            if t.name not in env:
                raise SpecError(f"model has no value for `{t.name}`")
            return env[t.name]
        if isinstance(t, (BoolConst, IntConst)):
            return t.value
        if isinstance(t, Default):
            return m.default(t.of)
        if isinstance(t, Unop):
            v = self.eval(t.arg, env)
            if t.op == "!":
                return not v
            if isinstance(t.ty, BitVecType):
                return (-v) % (1 << t.ty.width)
            return -v
        if isinstance(t, Binop):
            return self._eval_binop(t, env)
        if isinstance(t, Convert):
            v = self.eval(t.arg, env)
            src = t.arg.ty
            if isinstance(src, BitVecType):
                v = _as_signed(v, src.width) if src.signed else v
            if isinstance(t.ty, BitVecType):
                return v % (1 << t.ty.width)
            return v
        if isinstance(t, App):
            fn = self.symbols.functions.get(t.fn)
            if not isinstance(fn, FunctionDecl):
                raise SpecError(f"cannot evaluate unknown function `{t.fn}`")
            call_env = {
                name: self.eval(a, env) for (name, _), a in zip(fn.params, t.args)
            }
            return self.eval(fn.body, call_env)
        if isinstance(t, Construct):
            decl = self.symbols.enums[t.enum]
            params = decl.branches[t.index].params
            return EnumVal(
                t.index,
                tuple((p.name, self.eval(a, env)) for p, a in zip(params, t.args)),
            )
        if isinstance(t, FieldAccess):
            v = self.eval(t.base, env)
            if t.fld == "id":
                return _obs_id(v, m)
            return _obs_field(v, t.fld, t.ty, t.base.ty, m)
        if isinstance(t, StructLiteral):
            return {name: self.eval(val, env) for name, val in t.assigns}
        if isinstance(t, StructUpdate):
            base = self.eval(t.base, env)
            return self._apply_update(base, t.base.ty, list(t.path), t.value, env)
        if isinstance(t, Switch):
            scrut = self.eval(t.scrutinee, env)
            for c in t.cases:
                bindings = self._match(c.pattern, scrut, t.scrutinee.ty)
                if bindings is not None:
                    return self.eval(c.body, {**env, **bindings})
            if t.default is not None:
                return self.eval(t.default, env)
            raise SpecError("no switch case matched and no default given")
        if isinstance(t, Let):
            return self.eval(t.body, {**env, t.var: self.eval(t.rhs, env)})
        if isinstance(t, Quant):
            return self._eval_quant(t, env)
        if isinstance(t, IfThenElse):
            return self.eval(t.then if self.eval(t.cond, env) else t.els, env)
        if isinstance(t, SeqIndex):
            return _obs_index(self.eval(t.seq, env), self.eval(t.index, env), t.seq.ty, m)
        if isinstance(t, SeqLength):
            return _obs_len(self.eval(t.seq, env), t.seq.ty, m)
        if isinstance(t, SeqAppend):
            l = self._concrete_seq(self.eval(t.left, env), t.ty)
            r = self._concrete_seq(self.eval(t.right, env), t.ty)
            return l + r
        if isinstance(t, SeqCons):
            return [self.eval(t.head, env)] + self._concrete_seq(self.eval(t.tail, env), t.ty)
        if isinstance(t, SeqUpdate):
            seq = self._concrete_seq(self.eval(t.seq, env), t.ty)
            i = self.eval(t.index, env)
            if 0 <= i < len(seq):
                seq = list(seq)
                seq[i] = self.eval(t.value, env)
            return seq
        if isinstance(t, SeqSlice):
            seq = self._concrete_seq(self.eval(t.seq, env), t.ty)
            lo = max(self.eval(t.lo, env), 0)
            hi = max(min(self.eval(t.hi, env), len(seq)), 0)
            return seq[lo:hi] if hi > lo else []
        if isinstance(t, SeqRepeat):
            n = self.eval(t.count, env)
            return [self.eval(t.value, env)] * max(n, 0)
        if isinstance(t, SeqRemove):
            assert isinstance(t.ty, SeqType)
            seq = self._concrete_seq(self.eval(t.seq, env), t.ty)
            k = self.eval(t.index, env)
            out = []
            for i in range(max(0, len(seq) - 1)):
                j = i if i < k else i + 1
                out.append(seq[j] if 0 <= j < len(seq) else m.default(t.ty.elem))
            return out
        if isinstance(t, MapGet):
            return _obs_get(self.eval(t.map, env), self.eval(t.key, env), t.map.ty, m)
        if isinstance(t, MapIndom):
            v = self.eval(t.map, env)
            if isinstance(v, DefaultVal):
                return m.default(BoolType())
            return self.eval(t.key, env) in v
        if isinstance(t, MapEmpty):
            return {}
        if isinstance(t, MapUpdate):
            v = self.eval(t.map, env)
            base = {} if isinstance(v, DefaultVal) else dict(v)
            base[self.eval(t.key, env)] = self.eval(t.value, env)
            return base
        raise SpecError(f"cannot evaluate {type(t).__name__}")

    def _concrete_seq(self, v, ty: TypeExpr) -> list:
        # Non-basic constructors over a default sequence need concrete
        # elements; a default sequence behaves as the sequence whose
        # observations are all defaults, with an unknown (default) length.
        if isinstance(v, DefaultVal):
            assert isinstance(ty, SeqType)
            n = self.model.default(IntType())
            return [self.model.default(ty.elem)] * max(n, 0)
        return v

    def _eval_binop(self, t: Binop, env: dict):
        op = t.op
        if op == "&&":
            return self.eval(t.left, env) and self.eval(t.right, env)
        if op == "||":
            return self.eval(t.left, env) or self.eval(t.right, env)
        if op == "->":
            return (not self.eval(t.left, env)) or self.eval(t.right, env)
        l = self.eval(t.left, env)
        r = self.eval(t.right, env)
        if op == "==":
            return eval_eq(t.left.ty, l, r, self.model)
        if op == "!=":
            return not eval_eq(t.left.ty, l, r, self.model)
        lty = t.left.ty
        if op in ("<", "<=", ">", ">="):
            a, b = l, r
            if isinstance(lty, BitVecType) and lty.signed:
                a, b = _as_signed(l, lty.width), _as_signed(r, lty.width)
            return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
        if isinstance(lty, BitVecType):
            w = lty.width
            mask = (1 << w) - 1
            if op == "+":
                return (l + r) & mask
            if op == "-":
                return (l - r) & mask
            if op == "*":
                return (l * r) & mask
            if op == "|":
                return l | r
            if op == "&":
                return l & r
            if op == "<<":
                return ((l << r) & mask) if r < w else 0
            if op == ">>":
                if not lty.signed:
                    return (l >> r) if r < w else 0
                s = _as_signed(l, w)
                return (s >> min(r, w - 1)) & mask
            raise SpecError(f"bit op `{op}` on {lty}")
        if op == "+":
            return l + r
        if op == "-":
            return l - r
        if op == "*":
            return l * r
        raise SpecError(f"cannot evaluate operator `{op}` at {lty}")

    def _eval_quant(self, t: Quant, env: dict) -> bool:
        want_all = t.kind == "forall"
        for v in self._domain(t, env):
            res = self.eval(t.body, {**env, t.var: v})
            if want_all and not res:
                return False
            if not want_all and res:
                return True
        return want_all

    def _domain(self, t: Quant, env: dict):
        if isinstance(t.bound, RangeBound):
            lo = self.eval(t.bound.lo, env)
            hi = self.eval(t.bound.hi, env)
            if isinstance(t.var_ty, BitVecType) and t.var_ty.signed:
                # Bounds compare as signed; enumerate representatives.
                w = t.var_ty.width
                return [
                    v % (1 << w)
                    for v in range(_as_signed(lo, w), _as_signed(hi, w))
                ]
            return range(lo, hi)
        if isinstance(t.bound, KeysBound):
            v = self.eval(t.bound.map, env)
            if isinstance(v, DefaultVal):
                return []
            return sorted(v.keys(), key=repr)
        ty = t.var_ty
        if isinstance(ty, BoolType):
            return [False, True]
        if isinstance(ty, BitVecType):
            if ty.width > self.max_enum_width:
                raise SpecError(
                    f"cannot enumerate bit-vector width {ty.width} in the evaluator"
                )
            return range(1 << ty.width)
        if isinstance(ty, IntType):
            return range(self.model.int_lo, self.model.int_hi + 1)
        if isinstance(ty, TypeVar):
            return range(3)
        raise SpecError(f"cannot enumerate quantifier domain {ty}")

    def _match(self, p: Pattern, v, ty: TypeExpr | None) -> dict | None:
        if isinstance(p, PatVar):
            return {} if p.name == "_" else {p.name: v}
        if isinstance(p, PatCtor):
            enum = self.symbols.enum_of(ty)
            idx = enum.branch_index(p.constructor)
            if _obs_id(v, self.model) != idx:
                return None
            params = enum.branches[idx].params
            bindings: dict[str, object] = {}
            for sub, prm in zip(p.args, params):
                sub_v = _obs_field(v, prm.name, prm.ty, ty, self.model)
                b = self._match(sub, sub_v, prm.ty)
                if b is None:
                    return None
                bindings.update(b)
            return bindings
        if isinstance(p, PatStruct):
            struct = self.symbols.struct_of(ty)
            bindings = {}
            for fname, sub in p.assigns:
                f = struct.field(fname)
                b = self._match(sub, _obs_field(v, fname, f.ty, ty, self.model), f.ty)
                if b is None:
                    return None
                bindings.update(b)
            return bindings
        if isinstance(p, PatConst):
            return {} if eval_eq(p.value.ty, v, self.eval(p.value, {}), self.model) else None
        raise SpecError(f"cannot match pattern {p!r}")

    def _apply_update(self, base, ty: TypeExpr, path: list, value: Term, env: dict):
        if not path:
            return self.eval(value, env)
        step = path[0]
        m = self.model
        if isinstance(step, FieldStep):
            struct = self.symbols.struct_of(ty)
            if struct is None:
                raise SpecError("deep update through an enumeration branch")
            f = struct.field(step.name)
            old = _obs_field(base, step.name, f.ty, ty, m)
            new = self._apply_update(old, f.ty, path[1:], value, env)
            out = (
                {g.name: _obs_field(base, g.name, g.ty, ty, m) for g in struct.fields}
            )
            out[step.name] = new
            return out
        i = self.eval(step.index, env)
        if isinstance(ty, SeqType):
            seq = self._concrete_seq(base, ty)
            if 0 <= i < len(seq):
                seq = list(seq)
                seq[i] = self._apply_update(
                    seq[i], ty.elem, path[1:], value, env
                )
            return seq
        assert isinstance(ty, MapType)
        mp = {} if isinstance(base, DefaultVal) else dict(base)
        old = mp.get(i, m.default(ty.value))
        mp[i] = self._apply_update(old, ty.value, path[1:], value, env)
        return mp


def eval_term(t: Term, model: Model, env: dict | None = None):
    ev = Evaluator(model)
    full_env = dict(model.values)
    if env:
        full_env.update(env)
    return ev.eval(t, full_env)


def goal_holds(goal: Goal, model: Model) -> bool:
    """True when every assumption holds implies the conclusion holds."""
    return Evaluator(model).eval_goal(goal)
