"""Type checking and elaboration.

Annotates every subterm with its type, resolves overloaded surface forms
(indexing on maps vs sequences, `update` on maps vs sequences, conversion
calls, constructor applications), and adapts integer literals to bit-vector
types from context.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import Loc, TypeCheckError
from .printer import print_term
from .terms import (
    App,
    Assumption,
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
    IndexStep,
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
    SwitchCase,
    Term,
    Unop,
    Var,
)
from .types import (
    BOOL,
    INT,
    BitVecType,
    BoolType,
    MapType,
    NamedType,
    PRIMITIVE_NAMES,
    SeqType,
    SymbolTable,
    TypeExpr,
    TypeVar,
    expand_type,
    is_int_like,
)

_CONVERSION_NAMES = {name for name in PRIMITIVE_NAMES if name != "bool"}

LOGICAL_OPS = ("&&", "||", "->")
COMPARE_OPS = ("<", "<=", ">", ">=")
EQ_OPS = ("==", "!=")
ARITH_OPS = ("+", "-", "*")
BIT_OPS = ("|", "&", "<<", ">>")


class TypeChecker:
    def __init__(self, symbols: SymbolTable, type_vars: set[str] = frozenset()):
        self.symbols = symbols
        self.type_vars = set(type_vars)
        self.loc: Loc | None = None

    # -- helpers

    def err(self, msg: str, term: Term | None = None) -> TypeCheckError:
        if term is not None:
            msg = f"{msg} in `{print_term(term)}`"
        return TypeCheckError(msg, self.loc)

    def resolve(self, ty: TypeExpr) -> TypeExpr:
        return expand_type(
            ty, self.symbols.typedefs,
            set(self.symbols.structs) | set(self.symbols.enums),
            self.type_vars, self.loc,
        )

    def _adapt(self, t: Term, expected: TypeExpr | None) -> Term:
        """Check the inferred type against the expectation."""
        if expected is not None and t.ty != expected:
            raise self.err(f"expected {expected}, got {t.ty}", t)
        return t

    def _is_bare_literal(self, t: Term) -> bool:
        return isinstance(t, IntConst) and t.ty is None

    def check_pair(self, l: Term, r: Term, env: dict) -> tuple[Term, Term]:
        """Check two operands that must agree in type; literals adapt."""
        if self._is_bare_literal(l) and not self._is_bare_literal(r):
            rt = self.check(r, env)
            return self.check(l, env, rt.ty), rt
        lt = self.check(l, env)
        rt = self.check(r, env, lt.ty)
        return lt, rt

    # -- terms

    def check(self, t: Term, env: dict[str, TypeExpr], expected: TypeExpr | None = None) -> Term:
        out = self._check(t, env, expected)
        return self._adapt(out, expected)

    def _check(self, t: Term, env: dict, expected: TypeExpr | None) -> Term:
        if isinstance(t, Var):
            if t.name == "empty" and t.name not in env:
                if not isinstance(expected, MapType):
                    raise self.err("cannot infer the type of `empty` here", t)
                return MapEmpty(ty=expected)
            if t.name not in env:
                if t.name in self.symbols.constructors:
                    return self._check_app(App(t.name, ()), env, expected)
                raise self.err(f"unknown identifier `{t.name}`")
            return replace(t, ty=env[t.name])
        if isinstance(t, BoolConst):
            return replace(t, ty=BOOL)
        if isinstance(t, IntConst):
            if isinstance(t.ty, BitVecType):
                return t
            if isinstance(expected, BitVecType):
                return IntConst(t.value % (1 << expected.width), ty=expected)
            if isinstance(expected, (TypeVar, BoolType, SeqType, MapType, NamedType)):
                raise self.err(f"integer literal where {expected} expected", t)
            return replace(t, ty=INT)
        if isinstance(t, Unop):
            if t.op == "!":
                return replace(t, arg=self.check(t.arg, env, BOOL), ty=BOOL)
            want = expected if expected is not None and is_int_like(expected) else None
            arg = self.check(t.arg, env, want)
            if not is_int_like(arg.ty):
                raise self.err(f"unary `-` applied to {arg.ty}", t)
            return replace(t, arg=arg, ty=arg.ty)
        if isinstance(t, Binop):
            return self._check_binop(t, env, expected)
        if isinstance(t, Convert):
            target = self.resolve(t.target)
            return self._make_convert(target, self.check(t.arg, env), t)
        if isinstance(t, App):
            return self._check_app(t, env, expected)
        if isinstance(t, Construct):
            # Already elaborated (idempotent re-check).
            return self._check_app(App(t.constructor, t.args), env, expected)
        if isinstance(t, FieldAccess):
            base = self.check(t.base, env)
            return replace(t, base=base, ty=self._field_type(base.ty, t.fld, t))
        if isinstance(t, StructLiteral):
            decl = self.symbols.structs.get(t.struct)
            if decl is None:
                raise self.err(f"unknown struct `{t.struct}`")
            given = dict(t.assigns)
            if len(given) != len(t.assigns):
                raise self.err("duplicate field in struct literal", t)
            extra = set(given) - {f.name for f in decl.fields}
            if extra:
                raise self.err(f"unknown field `{sorted(extra)[0]}` in `{t.struct}` literal")
            missing = {f.name for f in decl.fields} - set(given)
            if missing:
                raise self.err(f"missing field `{sorted(missing)[0]}` in `{t.struct}` literal")
            assigns = tuple(
                (f.name, self.check(given[f.name], env, f.ty)) for f in decl.fields
            )
            return replace(t, assigns=assigns, ty=NamedType(t.struct))
        if isinstance(t, StructUpdate):
            return self._check_update(t, env)
        if isinstance(t, Switch):
            return self._check_switch(t, env, expected)
        if isinstance(t, Let):
            rhs = self.check(t.rhs, env)
            body = self.check(t.body, {**env, t.var: rhs.ty}, expected)
            return replace(t, rhs=rhs, body=body, ty=body.ty)
        if isinstance(t, Quant):
            var_ty = self.resolve(t.var_ty)
            bound = t.bound
            if isinstance(bound, RangeBound):
                if not is_int_like(var_ty):
                    raise self.err("range-bounded variable must have integer type", t)
                bound = RangeBound(
                    self.check(bound.lo, env, var_ty), self.check(bound.hi, env, var_ty)
                )
            elif isinstance(bound, KeysBound):
                m = self.check(bound.map, env)
                if not isinstance(m.ty, MapType) or m.ty.key != var_ty:
                    raise self.err(
                        f"keys-bounded variable of type {var_ty} over map {m.ty}", t
                    )
                bound = KeysBound(m)
            body = self.check(t.body, {**env, t.var: var_ty}, BOOL)
            return replace(t, var_ty=var_ty, bound=bound, body=body, ty=BOOL)
        if isinstance(t, IfThenElse):
            cond = self.check(t.cond, env, BOOL)
            if expected is None:
                then, els = self.check_pair(t.then, t.els, env)
            else:
                then = self.check(t.then, env, expected)
                els = self.check(t.els, env, expected)
            if then.ty != els.ty:
                raise self.err(f"branch types differ: {then.ty} vs {els.ty}", t)
            return replace(t, cond=cond, then=then, els=els, ty=then.ty)
        if isinstance(t, SeqIndex):
            base = self.check(t.seq, env)
            if isinstance(base.ty, MapType):
                key = self.check(t.index, env, base.ty.key)
                return MapGet(base, key, ty=base.ty.value)
            if isinstance(base.ty, SeqType):
                return replace(t, seq=base, index=self.check(t.index, env, INT), ty=base.ty.elem)
            raise self.err(f"indexing into {base.ty}", t)
        if isinstance(t, SeqLength):
            base = self.check(t.seq, env)
            if not isinstance(base.ty, SeqType):
                raise self.err(f"len of {base.ty}", t)
            return replace(t, seq=base, ty=INT)
        if isinstance(t, SeqAppend):
            left = self.check(t.left, env, expected)
            right = self.check(t.right, env, left.ty)
            if not isinstance(left.ty, SeqType):
                raise self.err(f"append of {left.ty}", t)
            return replace(t, left=left, right=right, ty=left.ty)
        if isinstance(t, SeqCons):
            tail = self.check(t.tail, env, expected)
            if not isinstance(tail.ty, SeqType):
                raise self.err(f"cons onto {tail.ty}", t)
            head = self.check(t.head, env, tail.ty.elem)
            return replace(t, head=head, tail=tail, ty=tail.ty)
        if isinstance(t, SeqUpdate):
            seq = self.check(t.seq, env, expected)
            if not isinstance(seq.ty, SeqType):
                raise self.err(f"sequence update of {seq.ty}", t)
            return replace(
                t, index=self.check(t.index, env, INT),
                value=self.check(t.value, env, seq.ty.elem), seq=seq, ty=seq.ty,
            )
        if isinstance(t, SeqSlice):
            seq = self.check(t.seq, env, expected)
            if not isinstance(seq.ty, SeqType):
                raise self.err(f"slice of {seq.ty}", t)
            return replace(
                t, lo=self.check(t.lo, env, INT), hi=self.check(t.hi, env, INT),
                seq=seq, ty=seq.ty,
            )
        if isinstance(t, SeqRepeat):
            if isinstance(expected, SeqType):
                value = self.check(t.value, env, expected.elem)
            else:
                value = self.check(t.value, env)
            return replace(
                t, value=value, count=self.check(t.count, env, INT), ty=SeqType(value.ty)
            )
        if isinstance(t, SeqRemove):
            seq = self.check(t.seq, env, expected)
            if not isinstance(seq.ty, SeqType):
                raise self.err(f"remove from {seq.ty}", t)
            return replace(t, index=self.check(t.index, env, INT), seq=seq, ty=seq.ty)
        if isinstance(t, MapGet):
            m = self.check(t.map, env)
            if not isinstance(m.ty, MapType):
                raise self.err(f"get from {m.ty}", t)
            return replace(t, map=m, key=self.check(t.key, env, m.ty.key), ty=m.ty.value)
        if isinstance(t, MapIndom):
            m = self.check(t.map, env)
            if not isinstance(m.ty, MapType):
                raise self.err(f"indom on {m.ty}", t)
            return replace(t, key=self.check(t.key, env, m.ty.key), map=m, ty=BOOL)
        if isinstance(t, MapEmpty):
            if t.ty is None and not isinstance(expected, MapType):
                raise self.err("cannot infer the type of `empty` here", t)
            return replace(t, ty=t.ty or expected)
        if isinstance(t, MapUpdate):
            m = self.check(t.map, env, expected)
            if not isinstance(m.ty, MapType):
                raise self.err(f"map update of {m.ty}", t)
            return replace(
                t, key=self.check(t.key, env, m.ty.key),
                value=self.check(t.value, env, m.ty.value), map=m, ty=m.ty,
            )
        if isinstance(t, Default):
            ty = self.resolve(t.of)
            return Default(ty, ty=ty)
        raise self.err(f"cannot type-check {type(t).__name__}")

    def _check_binop(self, t: Binop, env: dict, expected: TypeExpr | None) -> Term:
        if t.op in LOGICAL_OPS:
            return replace(
                t, left=self.check(t.left, env, BOOL), right=self.check(t.right, env, BOOL),
                ty=BOOL,
            )
        if t.op in EQ_OPS:
            lt, rt = self.check_pair(t.left, t.right, env)
            if lt.ty != rt.ty:
                raise self.err(f"comparing {lt.ty} with {rt.ty}", t)
            return replace(t, left=lt, right=rt, ty=BOOL)
        if t.op in COMPARE_OPS:
            lt, rt = self.check_pair(t.left, t.right, env)
            if lt.ty != rt.ty or not is_int_like(lt.ty):
                raise self.err(f"ordering {lt.ty} against {rt.ty}", t)
            return replace(t, left=lt, right=rt, ty=BOOL)
        if t.op in ARITH_OPS:
            lt, rt = self.check_pair(t.left, t.right, env)
            if lt.ty != rt.ty or not is_int_like(lt.ty):
                raise self.err(f"arithmetic on {lt.ty} and {rt.ty}", t)
            return replace(t, left=lt, right=rt, ty=lt.ty)
        if t.op in BIT_OPS:
            lt, rt = self.check_pair(t.left, t.right, env)
            if lt.ty != rt.ty or not isinstance(lt.ty, BitVecType):
                raise self.err(f"bitwise op on {lt.ty} and {rt.ty}", t)
            return replace(t, left=lt, right=rt, ty=lt.ty)
        raise self.err(f"unknown operator `{t.op}`")

    def _make_convert(self, target: TypeExpr, arg: Term, at: Term) -> Term:
        if not is_int_like(target) or not is_int_like(arg.ty):
            raise self.err(f"cannot convert {arg.ty} to {target}", at)
        if arg.ty == target:
            return arg
        if isinstance(arg, IntConst):
            value = arg.value
            if isinstance(arg.ty, BitVecType) and arg.ty.signed:
                half = 1 << (arg.ty.width - 1)
                if value >= half:
                    value -= 1 << arg.ty.width
            if isinstance(target, BitVecType):
                value %= 1 << target.width
            return IntConst(value, ty=target)
        return Convert(target, arg, ty=target)

    def _check_app(self, t: App, env: dict, expected: TypeExpr | None) -> Term:
        name, args = t.fn, t.args

        def arity(n: int) -> None:
            if len(args) != n:
                raise self.err(f"`{name}` expects {n} argument(s), got {len(args)}", t)

        if name in _CONVERSION_NAMES:
            arity(1)
            return self._make_convert(PRIMITIVE_NAMES[name], self.check(args[0], env), t)
        if name == "len":
            arity(1)
            return self._check(SeqLength(args[0]), env, expected)
        if name == "indom":
            arity(2)
            return self._check(MapIndom(args[0], args[1]), env, expected)
        if name == "get":
            arity(2)
            m = self.check(args[1], env)
            if not isinstance(m.ty, MapType):
                raise self.err(f"get from {m.ty}", t)
            return MapGet(m, self.check(args[0], env, m.ty.key), ty=m.ty.value)
        if name == "append":
            arity(2)
            return self._check(SeqAppend(args[0], args[1]), env, expected)
        if name == "cons":
            arity(2)
            return self._check(SeqCons(args[0], args[1]), env, expected)
        if name == "update":
            arity(3)
            target = self.check(args[2], env, expected)
            if isinstance(target.ty, SeqType):
                return self._check(SeqUpdate(args[0], args[1], target), env, expected)
            if isinstance(target.ty, MapType):
                return self._check(MapUpdate(args[0], args[1], target), env, expected)
            raise self.err(f"update of {target.ty}", t)
        if name == "slice":
            arity(3)
            return self._check(SeqSlice(args[0], args[1], args[2]), env, expected)
        if name == "repeat":
            arity(2)
            return self._check(SeqRepeat(args[0], args[1]), env, expected)
        if name == "remove":
            arity(2)
            return self._check(SeqRemove(args[0], args[1]), env, expected)
        if name in self.symbols.constructors:
            enum_name, index = self.symbols.constructors[name]
            decl = self.symbols.enums[enum_name]
            params = decl.branches[index].params
            if len(args) != len(params):
                raise self.err(
                    f"constructor `{name}` expects {len(params)} argument(s)", t
                )
            checked = tuple(
                self.check(a, env, p.ty) for a, p in zip(args, params)
            )
            return Construct(enum_name, name, index, checked, ty=NamedType(enum_name))
        fn = self.symbols.functions.get(name)
        if fn is not None:
            assert isinstance(fn, FunctionDecl)
            if len(args) != len(fn.params):
                raise self.err(f"`{name}` expects {len(fn.params)} argument(s)", t)
            checked = tuple(
                self.check(a, env, pty) for a, (_, pty) in zip(args, fn.params)
            )
            return App(name, checked, ty=fn.ret)
        raise self.err(f"unknown function or constructor `{name}`")

    def _field_type(self, base_ty: TypeExpr | None, fld: str, at: Term) -> TypeExpr:
        struct = self.symbols.struct_of(base_ty)
        enum = self.symbols.enum_of(base_ty)
        if struct is not None:
            f = struct.field(fld)
            if f is None:
                raise self.err(f"no field `{fld}` in struct `{struct.name}`", at)
            return f.ty
        if enum is not None:
            if fld == "id":
                return INT
            fty = enum.field_type(fld)
            if fty is None:
                raise self.err(f"no field `{fld}` in enum `{enum.name}`", at)
            return fty
        raise self.err(f"field access on {base_ty}", at)

    def _check_update(self, t: StructUpdate, env: dict) -> Term:
        base = self.check(t.base, env)
        ty = base.ty
        path = []
        for step in t.path:
            if isinstance(step, FieldStep):
                ty = self._field_type(ty, step.name, t)
                path.append(step)
            else:
                if isinstance(ty, SeqType):
                    path.append(IndexStep(self.check(step.index, env, INT)))
                    ty = ty.elem
                elif isinstance(ty, MapType):
                    path.append(IndexStep(self.check(step.index, env, ty.key)))
                    ty = ty.value
                else:
                    raise self.err(f"indexed update step on {ty}", t)
        value = self.check(t.value, env, ty)
        return replace(t, base=base, path=tuple(path), value=value, ty=base.ty)

    def _check_switch(self, t: Switch, env: dict, expected: TypeExpr | None) -> Term:
        scrut = self.check(t.scrutinee, env)
        cases = []
        result_ty = expected
        default = None
        for c in t.cases:
            bindings, pat = self.check_pattern(c.pattern, scrut.ty, env)
            body = self.check(c.body, {**env, **bindings}, result_ty)
            result_ty = result_ty or body.ty
            cases.append(SwitchCase(pat, body))
        if t.default is not None:
            default = self.check(t.default, env, result_ty)
            result_ty = result_ty or default.ty
        if result_ty is None:
            raise self.err("switch with no cases", t)
        for c in cases:
            if c.body.ty != result_ty:
                raise self.err(
                    f"switch branches disagree: {c.body.ty} vs {result_ty}", t
                )
        return replace(t, scrutinee=scrut, cases=tuple(cases), default=default, ty=result_ty)

    def check_pattern(
        self, p: Pattern, scrut_ty: TypeExpr | None, env: dict
    ) -> tuple[dict[str, TypeExpr], Pattern]:
        if isinstance(p, PatVar):
            # An identifier that names a nullary constructor of the scrutinee
            # enum is a constructor pattern, not a binder.
            enum = self.symbols.enum_of(scrut_ty)
            if enum is not None and enum.branch_index(p.name) is not None:
                return self.check_pattern(PatCtor(p.name, ()), scrut_ty, env)
            if p.name == "_":
                return {}, p
            return {p.name: scrut_ty}, p
        if isinstance(p, PatCtor):
            enum = self.symbols.enum_of(scrut_ty)
            if enum is None:
                raise self.err(f"constructor pattern against {scrut_ty}")
            idx = enum.branch_index(p.constructor)
            if idx is None:
                raise self.err(
                    f"`{p.constructor}` is not a constructor of `{enum.name}`"
                )
            params = enum.branches[idx].params
            if len(p.args) != len(params):
                raise self.err(
                    f"constructor pattern `{p.constructor}` expects {len(params)} argument(s)"
                )
            bindings: dict[str, TypeExpr] = {}
            args = []
            for a, prm in zip(p.args, params):
                b, pat = self.check_pattern(a, prm.ty, env)
                overlap = set(b) & set(bindings)
                if overlap:
                    raise self.err(f"pattern binds `{sorted(overlap)[0]}` twice")
                bindings.update(b)
                args.append(pat)
            return bindings, PatCtor(p.constructor, tuple(args))
        if isinstance(p, PatStruct):
            struct = self.symbols.struct_of(scrut_ty)
            if struct is None:
                raise self.err(f"structure pattern against {scrut_ty}")
            if p.struct is not None and p.struct != struct.name:
                raise self.err(
                    f"pattern names `{p.struct}` but scrutinee is `{struct.name}`"
                )
            bindings = {}
            assigns = []
            seen: set[str] = set()
            for fname, sub in p.assigns:
                f = struct.field(fname)
                if f is None:
                    raise self.err(f"no field `{fname}` in struct `{struct.name}`")
                if fname in seen:
                    raise self.err(f"field `{fname}` matched twice")
                seen.add(fname)
                b, pat = self.check_pattern(sub, f.ty, env)
                overlap = set(b) & set(bindings)
                if overlap:
                    raise self.err(f"pattern binds `{sorted(overlap)[0]}` twice")
                bindings.update(b)
                assigns.append((fname, pat))
            return bindings, PatStruct(struct.name, tuple(assigns))
        if isinstance(p, PatConst):
            value = self.check(p.value, env, scrut_ty)
            return {}, PatConst(value)
        raise self.err(f"cannot check pattern {p!r}")


def check_functions(symbols: SymbolTable, decls: list) -> None:
    """Type-check function bodies in declaration order.

    Functions may call only previously declared ones, which rules out
    recursion.
    """
    for d in decls:
        if not isinstance(d, FunctionDecl):
            continue
        checker = TypeChecker(symbols)
        checker.loc = d.loc
        if d.name in symbols.functions:
            raise TypeCheckError(f"duplicate function `{d.name}`", d.loc)
        params = tuple((n, checker.resolve(ty)) for n, ty in d.params)
        ret = checker.resolve(d.ret)
        env = dict(params)
        if len(env) != len(params):
            raise TypeCheckError(f"duplicate parameter in `{d.name}`", d.loc)
        body = checker.check(d.body, env, ret)
        symbols.functions[d.name] = FunctionDecl(d.name, params, ret, body, d.loc)


def type_check(goal: Goal, symbols: SymbolTable) -> Goal:
    """Annotate a goal; all free names must be declared, all props boolean."""
    checker = TypeChecker(symbols, set(goal.type_vars))
    checker.loc = goal.loc
    variables = []
    env: dict[str, TypeExpr] = {}
    for name, ty in goal.variables:
        if name in env:
            raise TypeCheckError(f"duplicate variable `{name}`", goal.loc)
        rty = checker.resolve(ty)
        env[name] = rty
        variables.append((name, rty))
    assumptions = tuple(
        Assumption(a.label, checker.check(a.prop, env, BOOL)) for a in goal.assumptions
    )
    conclusion = checker.check(goal.conclusion, env, BOOL)
    return Goal(
        goal.name, goal.type_vars, tuple(variables), assumptions, conclusion, goal.loc
    )
