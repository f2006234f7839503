"""Seeded random generation of types, terms, goals, and finite models.

Two generators:

* `TermGen` produces arbitrary well-typed goals over small randomly
  declared structures and enumerations; used for normal-form and
  rule-preservation properties.
* `QfGen` produces quantifier-free normal-form goals over bounded
  domains together with assumptions that pin every observable value
  inside the bounds, so exhaustive model enumeration and an SMT solver
  must agree on validity.

Model domains follow the bounded-domain convention used by the test
suite: sequence lengths at most 3, integer map keys in {0, 1, 2},
bit-vector widths at most 4, small integer ranges.  Default constants
for integer types are chosen non-negative so that positional sequence
semantics stay coherent; the boolean default is pinned to false.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .evaluate import EnumVal, Model
from .terms import (
    Assumption,
    Binop,
    BoolConst,
    Construct,
    Convert,
    FieldAccess,
    FieldStep,
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
    PatCtor,
    PatVar,
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
    EnumBranch,
    EnumDecl,
    FieldDecl,
    IntType,
    MapType,
    NamedType,
    SeqType,
    StructDecl,
    SymbolTable,
    TypeExpr,
    TypeVar,
    resolve_types,
)


@dataclass
class GenConfig:
    max_depth: int = 4
    max_vars: int = 6
    seq_len: int = 3
    int_lo: int = -2
    int_hi: int = 2
    widths: tuple[int, ...] = (2, 3, 4)
    allow_quant: bool = True
    allow_switch: bool = True
    allow_let: bool = True
    allow_update: bool = True
    allow_nonbasic: bool = True
    allow_structs: bool = True
    allow_calls: bool = False
    quant_budget: int = 2


def gen_symbols(rng: random.Random) -> SymbolTable:
    """A small random set of structure/enumeration declarations."""
    decls: list = []
    n_structs = rng.randint(1, 2)
    prim_pool: list[TypeExpr] = [BOOL, INT, BitVecType(rng.choice((2, 3, 4)), rng.random() < 0.5)]
    for si in range(n_structs):
        fields = tuple(
            FieldDecl(f"f{si}{fi}", rng.choice(prim_pool))
            for fi in range(rng.randint(1, 3))
        )
        decls.append(StructDecl(f"S{si}", fields))
    if rng.random() < 0.8:
        branches = []
        for bi in range(rng.randint(1, 3)):
            params = tuple(
                FieldDecl(f"e{bi}{pi}", rng.choice(prim_pool))
                for pi in range(rng.randint(0, 2))
            )
            branches.append(EnumBranch(f"C{bi}", params))
        decls.append(EnumDecl("E0", tuple(branches)))
    return resolve_types(decls)


class TermGen:
    """Type-directed generation of well-typed (annotation-free) terms."""

    def __init__(self, symbols: SymbolTable, rng: random.Random, config: GenConfig | None = None):
        self.symbols = symbols
        self.rng = rng
        self.cfg = config or GenConfig()
        self.variables: dict[str, TypeExpr] = {}
        self.quant_budget = self.cfg.quant_budget
        self._counter = 0

    # -- types

    def gen_type(self, depth: int = 2, for_var: bool = False) -> TypeExpr:
        rng = self.rng
        prims: list[TypeExpr] = [BOOL, INT, BitVecType(rng.choice(self.cfg.widths), rng.random() < 0.5)]
        choices: list[TypeExpr] = list(prims)
        if self.cfg.allow_structs:
            choices += [NamedType(n) for n in self.symbols.structs]
            choices += [NamedType(n) for n in self.symbols.enums]
        if depth > 0:
            elem = self.gen_type(depth - 1)
            choices.append(SeqType(elem))
            key = rng.choice([INT, BitVecType(rng.choice(self.cfg.widths), False)])
            choices.append(MapType(key, self.gen_type(depth - 1)))
        return rng.choice(choices)

    # -- variables

    def get_var(self, ty: TypeExpr) -> Term:
        matching = [n for n, t in self.variables.items() if t == ty and n.startswith("v")]
        if matching and (self.rng.random() < 0.7 or len(self.variables) >= self.cfg.max_vars):
            return Var(self.rng.choice(matching))
        name = f"v{self._counter}"
        self._counter += 1
        self.variables[name] = ty
        return Var(name)

    # -- terms

    def gen(self, ty: TypeExpr, depth: int) -> Term:
        rng = self.rng
        if depth <= 0:
            return self.leaf(ty)
        options = [lambda: self.leaf(ty)]
        options.append(lambda: IfThenElse(self._gen_cond(depth), self.gen(ty, depth - 1), self.gen(ty, depth - 1)))
        if self.cfg.allow_let:
            options.append(lambda: self._gen_let(ty, depth))
        if isinstance(ty, BoolType):
            options += [
                lambda: Unop("!", self.gen(BOOL, depth - 1)),
                lambda: Binop(rng.choice(("&&", "||", "->")), self.gen(BOOL, depth - 1), self.gen(BOOL, depth - 1)),
                lambda: self._gen_compare(depth),
                lambda: self._gen_equality(depth),
                lambda: self._gen_indom(depth),
            ]
            if self.cfg.allow_quant and self.quant_budget > 0:
                options.append(lambda: self._gen_quant(depth))
        elif isinstance(ty, IntType):
            options += [
                lambda: IntConst(rng.randint(self.cfg.int_lo, self.cfg.int_hi)),
                lambda: Binop(rng.choice(("+", "-", "*")), self.gen(INT, depth - 1), self.gen(INT, depth - 1)),
                lambda: SeqLength(self.get_var(SeqType(self.gen_type(1)))),
                lambda: Convert(INT, self.gen(BitVecType(rng.choice(self.cfg.widths), rng.random() < 0.5), depth - 1)),
            ]
        elif isinstance(ty, BitVecType):
            options += [
                lambda: IntConst(rng.randrange(1 << ty.width), ty=ty),
                lambda: Binop(rng.choice(("+", "-", "*", "|", "&", "<<", ">>")), self.gen(ty, depth - 1), self.gen(ty, depth - 1)),
                lambda: Convert(ty, self.gen(INT, depth - 1)),
            ]
        elif isinstance(ty, SeqType) and self.cfg.allow_nonbasic:
            options += [
                lambda: SeqAppend(self.gen(ty, depth - 1), self.gen(ty, depth - 1)),
                lambda: SeqCons(self.gen(ty.elem, depth - 1), self.gen(ty, depth - 1)),
                lambda: SeqUpdate(self.gen(INT, depth - 1), self.gen(ty.elem, depth - 1), self.gen(ty, depth - 1)),
                lambda: SeqSlice(self.gen(INT, depth - 1), self.gen(INT, depth - 1), self.gen(ty, depth - 1)),
                lambda: SeqRepeat(self.gen(ty.elem, depth - 1), self.gen(INT, depth - 1)),
                lambda: SeqRemove(self.gen(INT, depth - 1), self.gen(ty, depth - 1)),
            ]
        elif isinstance(ty, MapType) and self.cfg.allow_nonbasic:
            options += [
                lambda: MapEmpty(ty=ty),
                lambda: MapUpdate(self.gen(ty.key, depth - 1), self.gen(ty.value, depth - 1), self.gen(ty, depth - 1)),
            ]
        elif isinstance(ty, NamedType):
            struct = self.symbols.struct_of(ty)
            enum = self.symbols.enum_of(ty)
            if struct is not None:
                options.append(lambda: StructLiteral(
                    ty.name, tuple((f.name, self.gen(f.ty, depth - 1)) for f in struct.fields)))
                if self.cfg.allow_update:
                    options.append(lambda: self._gen_update(ty, depth))
            if enum is not None:
                def mk_ctor():
                    bi = rng.randrange(len(enum.branches))
                    b = enum.branches[bi]
                    return Construct(ty.name, b.constructor, bi,
                                     tuple(self.gen(p.ty, depth - 1) for p in b.params))
                options.append(mk_ctor)
        if self.cfg.allow_calls:
            from .terms import App, FunctionDecl

            for fname, fn in self.symbols.functions.items():
                if isinstance(fn, FunctionDecl) and fn.ret == ty:
                    options.append(lambda fn=fn: App(
                        fn.name, tuple(self.gen(pty, depth - 1) for _, pty in fn.params)
                    ))
                    break
        # Reads that produce this type.
        options.append(lambda: self._gen_read(ty, depth))
        if self.cfg.allow_switch and self.symbols.enums:
            options.append(lambda: self._gen_switch(ty, depth))
        return rng.choice(options)()

    def leaf(self, ty: TypeExpr) -> Term:
        rng = self.rng
        if isinstance(ty, BoolType) and rng.random() < 0.4:
            return BoolConst(rng.random() < 0.5)
        if isinstance(ty, IntType) and rng.random() < 0.5:
            return IntConst(rng.randint(self.cfg.int_lo, self.cfg.int_hi))
        if isinstance(ty, BitVecType) and rng.random() < 0.5:
            return IntConst(rng.randrange(1 << ty.width), ty=ty)
        return self.get_var(ty)

    def _gen_cond(self, depth: int) -> Term:
        # Conditions of if-then-else terms stay quantifier-free: a
        # quantifier buried in the condition of a non-boolean ite has no
        # prenex form and the normalizer rejects it.
        saved = self.quant_budget
        self.quant_budget = 0
        out = self.gen(BOOL, depth - 1)
        self.quant_budget = saved
        return out

    def _gen_let(self, ty: TypeExpr, depth: int) -> Term:
        rhs_ty = self.gen_type(1)
        rhs = self.gen(rhs_ty, depth - 1)
        name = f"L{self._counter}"
        self._counter += 1
        saved = self.variables.get(name)
        self.variables[name] = rhs_ty
        body = self.gen(ty, depth - 1)
        if saved is None:
            del self.variables[name]
        else:
            self.variables[name] = saved
        return Let(name, rhs, body)

    def _gen_compare(self, depth: int) -> Term:
        ty = self.rng.choice([INT, BitVecType(self.rng.choice(self.cfg.widths), self.rng.random() < 0.5)])
        return Binop(self.rng.choice(("<", "<=", ">", ">=")), self.gen(ty, depth - 1), self.gen(ty, depth - 1))

    def _gen_equality(self, depth: int) -> Term:
        ty = self.gen_type(1)
        return Binop(self.rng.choice(("==", "!=")), self.gen(ty, depth - 1), self.gen(ty, depth - 1))

    def _gen_indom(self, depth: int) -> Term:
        mty = MapType(INT, self.gen_type(0))
        return MapIndom(self.gen(INT, depth - 1), self.get_var(mty))

    def _gen_quant(self, depth: int) -> Term:
        rng = self.rng
        self.quant_budget -= 1
        kind = rng.choice(("forall", "exists"))
        var = f"q{self._counter}"
        self._counter += 1
        var_ty: TypeExpr = rng.choice([INT, BitVecType(rng.choice((2, 3)), False)])
        bound = None
        style = rng.random()
        if style < 0.4 and isinstance(var_ty, IntType):
            bound = RangeBound(self.gen(INT, 0), self.gen(INT, 0))
        elif style < 0.6:
            mty = MapType(var_ty, self.gen_type(0))
            bound = KeysBound(self.get_var(mty))
        saved = self.variables.get(var)
        self.variables[var] = var_ty
        body = self.gen(BOOL, depth - 1)
        if saved is None:
            del self.variables[var]
        else:
            self.variables[var] = saved
        return Quant(kind, var, var_ty, bound, body)

    def _gen_update(self, ty: NamedType, depth: int) -> Term:
        struct = self.symbols.struct_of(ty)
        f = self.rng.choice(struct.fields)
        base = self.get_var(ty)
        path = [FieldStep(f.name)]
        fty = f.ty
        # Occasionally extend the path through a collection for a deep update.
        if isinstance(fty, SeqType) and self.rng.random() < 0.5:
            path.append(IndexStep(self.gen(INT, 0)))
            fty = fty.elem
        elif isinstance(fty, MapType) and self.rng.random() < 0.5:
            path.append(IndexStep(self.gen(fty.key, 0)))
            fty = fty.value
        return StructUpdate(base, tuple(path), self.gen(fty, depth - 1))

    def _gen_read(self, ty: TypeExpr, depth: int) -> Term:
        rng = self.rng
        kind = rng.random()
        if kind < 0.4:
            seq = self.get_var(SeqType(ty))
            return SeqIndex(seq, self.gen(INT, depth - 1))
        if kind < 0.7:
            mty = MapType(INT, ty)
            return MapGet(self.get_var(mty), self.gen(INT, depth - 1))
        # Read through a struct field of this type, if one exists.
        for sname, s in self.symbols.structs.items():
            for f in s.fields:
                if f.ty == ty:
                    return FieldAccess(self.get_var(NamedType(sname)), f.name)
        return self.leaf(ty)

    def _gen_switch(self, ty: TypeExpr, depth: int) -> Term:
        rng = self.rng
        ename = rng.choice(sorted(self.symbols.enums))
        enum = self.symbols.enums[ename]
        scrut = self.get_var(NamedType(ename))
        cases = []
        for b in rng.sample(list(enum.branches), rng.randint(1, len(enum.branches))):
            pats = []
            for _ in b.params:
                pats.append(PatVar(f"p{self._counter}"))
                self._counter += 1
            pats = tuple(pats)
            shadowed = {p.name: self.variables.get(p.name) for p in pats}
            for p, prm in zip(pats, b.params):
                self.variables[p.name] = prm.ty
            body = self.gen(ty, depth - 1)
            for name, old in shadowed.items():
                if old is None:
                    self.variables.pop(name, None)
                else:
                    self.variables[name] = old
            cases.append(SwitchCase(PatCtor(b.constructor, pats), body))
        default = self.gen(ty, depth - 1)
        return Switch(scrut, tuple(cases), default)

    # -- goals

    def gen_goal(self, name: str = "random_goal") -> Goal:
        n_assume = self.rng.randint(0, 3)
        assumptions = tuple(
            Assumption(None, self.gen(BOOL, self.cfg.max_depth)) for _ in range(n_assume)
        )
        conclusion = self.gen(BOOL, self.cfg.max_depth)
        variables = tuple(
            (n, t) for n, t in self.variables.items() if n.startswith("v")
        )
        return Goal(name, (), variables, assumptions, conclusion)


# ---------------------------------------------------------------------------
# Model generation


def gen_value(ty: TypeExpr, symbols: SymbolTable, rng: random.Random, cfg: GenConfig):
    if isinstance(ty, BoolType):
        return rng.random() < 0.5
    if isinstance(ty, IntType):
        return rng.randint(cfg.int_lo, cfg.int_hi)
    if isinstance(ty, BitVecType):
        return rng.randrange(1 << ty.width)
    if isinstance(ty, TypeVar):
        return rng.randrange(3)
    if isinstance(ty, SeqType):
        return [gen_value(ty.elem, symbols, rng, cfg) for _ in range(rng.randint(0, cfg.seq_len))]
    if isinstance(ty, MapType):
        if isinstance(ty.key, IntType):
            domain = [0, 1, 2]
        else:
            domain = list(range(min(1 << ty.key.width, 4)))
        keys = rng.sample(domain, rng.randint(0, len(domain)))
        return {k: gen_value(ty.value, symbols, rng, cfg) for k in sorted(keys)}
    struct = symbols.struct_of(ty)
    if struct is not None:
        return {f.name: gen_value(f.ty, symbols, rng, cfg) for f in struct.fields}
    enum = symbols.enum_of(ty)
    if enum is not None:
        bi = rng.randrange(len(enum.branches))
        b = enum.branches[bi]
        return EnumVal(bi, tuple((p.name, gen_value(p.ty, symbols, rng, cfg)) for p in b.params))
    raise ValueError(f"cannot generate a value of type {ty}")


def value_space(ty: TypeExpr, symbols: SymbolTable, cfg: GenConfig | None = None) -> list:
    """Every value of a bounded-domain type (sequence lengths and map key
    sets capped by the config); used for exhaustive model enumeration."""
    cfg = cfg or GenConfig()
    if isinstance(ty, BoolType):
        return [False, True]
    if isinstance(ty, IntType):
        return list(range(cfg.int_lo, cfg.int_hi + 1))
    if isinstance(ty, BitVecType):
        return list(range(1 << ty.width))
    if isinstance(ty, TypeVar):
        return [0, 1, 2]
    if isinstance(ty, SeqType):
        elems = value_space(ty.elem, symbols, cfg)
        out: list = []
        for n in range(cfg.seq_len + 1):
            if len(elems) ** n > 4096:
                break
            out.extend([list(v) for v in _tuples(elems, n)])
        return out
    if isinstance(ty, MapType):
        if isinstance(ty.key, IntType):
            keys = [0, 1, 2]
        else:
            keys = list(range(min(1 << ty.key.width, 3)))
        values = value_space(ty.value, symbols, cfg)
        out = [{}]
        for k in keys:
            extended = []
            for m in out:
                extended.append(m)
                for v in values:
                    m2 = dict(m)
                    m2[k] = v
                    extended.append(m2)
            out = extended
            if len(out) > 4096:
                raise ValueError("map value space too large")
        return out
    struct = symbols.struct_of(ty)
    if struct is not None:
        out = [{}]
        for f in struct.fields:
            out = [dict(m, **{f.name: v}) for m in out for v in value_space(f.ty, symbols, cfg)]
        return out
    enum = symbols.enum_of(ty)
    if enum is not None:
        out = []
        for bi, b in enumerate(enum.branches):
            combos = [()]
            for p in b.params:
                combos = [c + (v,) for c in combos for v in value_space(p.ty, symbols, cfg)]
            for c in combos:
                out.append(EnumVal(bi, tuple((p.name, v) for p, v in zip(b.params, c))))
        return out
    raise ValueError(f"cannot enumerate type {ty}")


def _tuples(elems: list, n: int):
    if n == 0:
        yield ()
        return
    for rest in _tuples(elems, n - 1):
        for e in elems:
            yield rest + (e,)


def gen_functions(symbols: SymbolTable, rng: random.Random, count: int = 2) -> None:
    """Attach `count` random function definitions to the symbol table."""
    from .terms import FunctionDecl
    from .typecheck import TypeChecker

    registered = 0
    for _ in range(count * 10):
        if registered >= count:
            break
        gen = TermGen(symbols, rng, GenConfig(max_depth=2, allow_quant=False))
        params = []
        for pi in range(rng.randint(1, 3)):
            ty = gen.gen_type(1)
            name = f"arg{pi}"
            params.append((name, ty))
            gen.variables[name] = ty
        ret = gen.gen_type(1)
        body = gen.gen(ret, 2)
        if any(n not in dict(params) for n in _term_frees(body)):
            continue  # body grabbed a fresh pool variable; try again
        checker = TypeChecker(symbols)
        typed = checker.check(body, dict(params), checker.resolve(ret))
        symbols.functions[f"fn{registered}"] = FunctionDecl(
            f"fn{registered}", tuple(params), checker.resolve(ret), typed
        )
        registered += 1


def _term_frees(t) -> frozenset[str]:
    from .terms import free_vars

    return free_vars(t)


def extend_model_with_definitions(goal: Goal, model: Model, new_vars: dict) -> Model:
    """Pin introduced variables using their defining equations.

    Hoisting a let produces an assumption `v == rhs`; under any model the
    transformed goal holds exactly when it holds with `v` bound to the
    value of `rhs`.  Equations are evaluated in order, so chains of
    hoisted bindings resolve.
    """
    from .evaluate import Evaluator
    from .terms import Binop, Var

    values = dict(model.values)
    ev = Evaluator(Model(symbols=model.symbols, values=values,
                         defaults=model.defaults, int_lo=model.int_lo,
                         int_hi=model.int_hi))
    for a in goal.assumptions:
        t = a.prop
        if (
            isinstance(t, Binop) and t.op == "=="
            and isinstance(t.left, Var) and t.left.name in new_vars
            and t.left.name not in values
        ):
            values[t.left.name] = ev.eval(t.right, dict(values))
    return Model(symbols=model.symbols, values=values, defaults=model.defaults,
                 int_lo=model.int_lo, int_hi=model.int_hi)


def goal_holds_extended(
    goal: Goal,
    model: Model,
    new_vars: dict[str, TypeExpr],
    symbols: SymbolTable,
    cfg: GenConfig | None = None,
    limit: int = 512,
) -> bool | None:
    """Truth of a goal under every extension of `model` to `new_vars`.

    Used to compare rules that introduce variables (hoisted lets, skolem
    constants): the transformed goal holds in a model exactly when it
    holds under all assignments to the introduced variables.  Returns
    None when the extension space exceeds `limit`.
    """
    from .evaluate import Evaluator

    # Skolem constants stand for quantifier witnesses; enumerate them over
    # the same window the evaluator uses for integer quantifiers.
    cfg = cfg or GenConfig()
    from dataclasses import replace as _replace

    cfg = _replace(cfg, int_lo=model.int_lo, int_hi=model.int_hi)
    spaces = []
    total = 1
    for name, ty in new_vars.items():
        try:
            space = value_space(ty, symbols, cfg)
        except ValueError:
            return None
        total *= max(len(space), 1)
        if total > limit:
            return None
        spaces.append((name, space))

    def rec(i: int, values: dict) -> bool:
        if i == len(spaces):
            m = Model(
                symbols=model.symbols,
                values={**model.values, **values},
                defaults=model.defaults,
                int_lo=model.int_lo,
                int_hi=model.int_hi,
            )
            return Evaluator(m).eval_goal(goal)
        name, space = spaces[i]
        return all(rec(i + 1, {**values, name: v}) for v in space)

    return rec(0, {})


def gen_model(goal: Goal, symbols: SymbolTable, rng: random.Random, cfg: GenConfig | None = None) -> Model:
    cfg = cfg or GenConfig()
    values = {n: gen_value(t, symbols, rng, cfg) for n, t in goal.variables}
    defaults: dict[str, object] = {"bool": False}
    for w in (2, 3, 4, 8, 16, 32, 64):
        for s in (True, False):
            defaults[str(BitVecType(w, s))] = rng.randrange(min(1 << w, 4))
    defaults["int"] = rng.randint(0, 2)
    for tv in goal.type_vars:
        defaults[tv] = rng.randrange(3)
    return Model(symbols=symbols, values=values, defaults=defaults,
                 int_lo=cfg.int_lo - 6, int_hi=cfg.int_hi + 6)
