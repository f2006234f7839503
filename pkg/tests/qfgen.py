"""Generator of quantifier-free normal goals over bounded domains.

Every observable value is pinned inside the enumerated space by explicit
assumptions (exact sequence length, map domain membership per key,
variable ranges, element-value bounds), so exhaustive model enumeration
and an SMT solver must agree on validity.  Used by the finite-model
equivalence tests.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from osv.evaluate import Evaluator, Model
from osv.normalize import NormalGoal, normalize
from osv.terms import (
    Assumption,
    Binop,
    Goal,
    IntConst,
    IfThenElse,
    MapGet,
    MapIndom,
    SeqIndex,
    SeqLength,
    Term,
    Unop,
    Var,
)
from osv.typecheck import type_check
from osv.types import BOOL, INT, BitVecType, MapType, SeqType, SymbolTable

ELEM_DOMAIN = (0, 1)


@dataclass
class QfShape:
    seq_len: int
    map_dom: tuple[int, ...]
    int_vars: tuple[str, ...]
    bool_vars: tuple[str, ...]
    bv_var: str | None
    bv_width: int


def _int_pool(shape: QfShape, rng: random.Random) -> list[Term]:
    pool: list[Term] = [IntConst(rng.randint(-1, 2)) for _ in range(2)]
    pool.append(SeqLength(Var("a")))
    for v in shape.int_vars:
        pool.append(Var(v))
    for _ in range(2):
        idx = rng.choice(
            [IntConst(rng.randrange(shape.seq_len))]
            + [Var(v) for v in shape.int_vars]
        )
        pool.append(SeqIndex(Var("a"), idx))
    for k in shape.map_dom:
        pool.append(MapGet(Var("m"), IntConst(k)))
    return pool


def _gen_int(shape, rng, depth) -> Term:
    pool = _int_pool(shape, rng)
    t = rng.choice(pool)
    if depth > 0 and rng.random() < 0.5:
        op = rng.choice(("+", "-", "*"))
        other = IntConst(rng.randint(-1, 2)) if op == "*" else _gen_int(shape, rng, depth - 1)
        return Binop(op, t, other)
    return t


def _gen_bool(shape: QfShape, rng: random.Random, depth: int) -> Term:
    if depth <= 0:
        kind = rng.random()
        if kind < 0.3 and shape.bool_vars:
            return Var(rng.choice(shape.bool_vars))
        if kind < 0.4:
            return MapIndom(IntConst(rng.randrange(3)), Var("m"))
        if kind < 0.5 and shape.bv_var:
            return Binop(
                rng.choice(("<", "<=", "==", "!=")),
                Var(shape.bv_var),
                IntConst(rng.randrange(1 << shape.bv_width)),
            )
        return Binop(
            rng.choice(("<", "<=", ">", ">=", "==", "!=")),
            _gen_int(shape, rng, 1),
            _gen_int(shape, rng, 1),
        )
    kind = rng.random()
    if kind < 0.2:
        return Unop("!", _gen_bool(shape, rng, depth - 1))
    if kind < 0.8:
        return Binop(
            rng.choice(("&&", "||", "->")),
            _gen_bool(shape, rng, depth - 1),
            _gen_bool(shape, rng, depth - 1),
        )
    return IfThenElse(
        _gen_bool(shape, rng, depth - 1),
        _gen_bool(shape, rng, depth - 1),
        _gen_bool(shape, rng, depth - 1),
    )


def gen_qf_goal(symbols: SymbolTable, rng: random.Random) -> tuple[Goal, NormalGoal, QfShape]:
    shape = QfShape(
        seq_len=rng.randint(1, 3),
        map_dom=tuple(sorted(rng.sample([0, 1, 2], rng.randint(0, 2)))),
        int_vars=("x",),
        bool_vars=("p",) if rng.random() < 0.7 else (),
        bv_var="w" if rng.random() < 0.4 else None,
        bv_width=rng.choice((2, 3)),
    )
    variables: list[tuple[str, object]] = [
        ("a", SeqType(INT)),
        ("m", MapType(INT, INT)),
    ]
    for v in shape.int_vars:
        variables.append((v, INT))
    for v in shape.bool_vars:
        variables.append((v, BOOL))
    if shape.bv_var:
        variables.append((shape.bv_var, BitVecType(shape.bv_width, False)))

    pins: list[Term] = [Binop("==", SeqLength(Var("a")), IntConst(shape.seq_len))]
    for k in range(3):
        ind = MapIndom(IntConst(k), Var("m"))
        pins.append(ind if k in shape.map_dom else Unop("!", ind))
    for v in shape.int_vars:
        pins.append(Binop("<=", IntConst(0), Var(v)))
        pins.append(Binop("<", Var(v), IntConst(shape.seq_len)))
    # Bound every element read by the enumerated element domain.
    reads: list[Term] = [
        SeqIndex(Var("a"), IntConst(i)) for i in range(shape.seq_len)
    ] + [SeqIndex(Var("a"), Var(v)) for v in shape.int_vars] + [
        MapGet(Var("m"), IntConst(k)) for k in shape.map_dom
    ]
    for r in reads:
        pins.append(Binop("<=", IntConst(min(ELEM_DOMAIN)), r))
        pins.append(Binop("<=", r, IntConst(max(ELEM_DOMAIN))))

    assumptions = [Assumption(None, p) for p in pins]
    if rng.random() < 0.6:
        assumptions.append(Assumption(None, _gen_bool(shape, rng, 2)))
    conclusion = _gen_bool(shape, rng, rng.randint(1, 3))

    goal = Goal(f"qf{rng.randrange(10**9)}", (), tuple(variables), tuple(assumptions), conclusion)
    typed = type_check(goal, symbols)
    ng = normalize(typed, symbols)
    return typed, ng, shape


def enumerate_goal_models(shape: QfShape, symbols: SymbolTable):
    """All models of the pinned bounded domains (pins hold by construction)."""
    seq_space = list(itertools.product(ELEM_DOMAIN, repeat=shape.seq_len))
    map_space = list(itertools.product(ELEM_DOMAIN, repeat=len(shape.map_dom)))
    int_space = list(itertools.product(range(shape.seq_len), repeat=len(shape.int_vars)))
    bool_space = list(itertools.product((False, True), repeat=len(shape.bool_vars)))
    bv_space = range(1 << shape.bv_width) if shape.bv_var else [0]
    for seq in seq_space:
        for mvals in map_space:
            for ints in int_space:
                for bools in bool_space:
                    for bv in bv_space:
                        values: dict[str, object] = {
                            "a": list(seq),
                            "m": dict(zip(shape.map_dom, mvals)),
                        }
                        values.update(zip(shape.int_vars, ints))
                        values.update(zip(shape.bool_vars, bools))
                        if shape.bv_var:
                            values[shape.bv_var] = bv
                        yield Model(symbols=symbols, values=values)


def goal_valid_bruteforce(shape: QfShape, ng: NormalGoal, symbols: SymbolTable) -> bool:
    """True when no bounded model satisfies the whole refutation set."""
    facts = [f.term for f in ng.qf_facts]
    assert not ng.q_facts
    for model in enumerate_goal_models(shape, symbols):
        if Evaluator(model).eval_facts(facts):
            return False
    return True
