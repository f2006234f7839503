"""SMT encoding and solver driving."""

import pytest

from osv.errors import SolverError
from osv.normalize import Normalizer, normalize
from osv.parser import parse_expr, parse_query
from osv.smt import (
    ConsistencyOracle,
    EncodingTable,
    check_consistency,
    encode_goal,
    encode_term,
    run_solver,
)
from osv.typecheck import TypeChecker, type_check
from osv.types import BOOL, INT, BitVecType, NamedType, SeqType, TypeVar, resolve_types


def enc(shapes, text, env):
    t = TypeChecker(shapes).check(parse_expr(text), env)
    table = EncodingTable()
    return encode_term(t, table), table


def test_shape_equality_encoding_symbols(shapes):
    # the equality s == t over Shape expands to twelve names, four of
    # which are unary integer functions over the point sequence
    tc = TypeChecker(shapes)
    env = {"s": NamedType("Shape"), "t": NamedType("Shape")}
    e = tc.check(parse_expr("s == t"), env)
    nz = Normalizer(shapes, {"s", "t"})
    expanded = nz.expand_equalities_term(e)

    from osv.terms import IntConst, Quant, map_children, subst

    def close(t):
        if isinstance(t, Quant):
            return close(subst(t.body, {t.var: IntConst(0, ty=INT)}))
        return map_children(t, close)

    table = EncodingTable()
    encode_term(close(expanded), table)
    assert list(table.symbols) == [
        "s.id", "t.id", "s.pts.length", "t.pts.length",
        "s.pts.index.x", "t.pts.index.x", "s.pts.index.y", "t.pts.index.y",
        "s.pt.x", "t.pt.x", "s.pt.y", "t.pt.y",
    ]
    unary = [n for n, (_, args, _) in table.symbols.items() if args]
    assert unary == ["s.pts.index.x", "t.pts.index.x", "s.pts.index.y", "t.pts.index.y"]


def test_length_atom_is_plain_constant(shapes):
    s, table = enc(shapes, "len(s.pts)", {"s": NamedType("Shape")})
    assert s == "s!pts!length"
    assert table.decls == ["(declare-const s!pts!length Int)"]


def test_boolean_operators(shapes):
    s, _ = enc(shapes, "true && x", {"x": BOOL})
    assert s == "(and true x)"


def test_bitvector_operators(shapes):
    env = {"x": BitVecType(8, False), "y": BitVecType(8, True)}
    s, _ = enc(shapes, "x < int8u(3)", env)
    assert s == "(bvult x (_ bv3 8))"
    s, _ = enc(shapes, "y < int8(3)", env)
    assert s == "(bvslt y (_ bv3 8))"
    s, _ = enc(shapes, "y >> int8(1)", env)
    assert s == "(bvashr y (_ bv1 8))"
    s, _ = enc(shapes, "int(x)", env)
    assert s == "(bv2nat x)"
    s, _ = enc(shapes, "int8u(z)", {"z": INT})
    assert s == "((_ int2bv 8) z)"


def test_type_variables_as_sorts(shapes):
    tc = TypeChecker(shapes, {"T"})
    t = tc.check(parse_expr("x == y"), {"x": TypeVar("T"), "y": TypeVar("T")})
    table = EncodingTable()
    s = encode_term(t, table)
    assert s == "(= x y)"
    assert "(declare-sort tv!T 0)" in table.decls


def test_quantifier_rejected_by_encoder(shapes):
    tc = TypeChecker(shapes)
    t = tc.check(parse_expr("forall (int i) { i == i }"), {})
    with pytest.raises(SolverError, match="quantifier"):
        encode_term(t, EncodingTable())


def test_deterministic_scripts():
    sym = resolve_types([])
    text = """query q { Seq<int> a; int k;
        assumes 0 <= k && k < len(a);
        shows a[k] == a[k] }"""
    s1 = encode_goal(normalize(type_check(parse_query(text), sym), sym))
    s2 = encode_goal(normalize(type_check(parse_query(text), sym), sym))
    assert s1 == s2


def test_run_solver_verdicts(solver_argv):
    assert run_solver("(assert false)\n(check-sat)\n", solver=solver_argv).status == "unsat"
    v = run_solver(
        "(declare-const x Int)\n(assert (> x 5))\n(check-sat)\n", solver=solver_argv
    )
    assert v.status == "sat"
    assert "x" in v.model


def test_consistency_examples(shapes, solver_argv):
    tc = TypeChecker(shapes)
    env = {"k": INT, "g0": SeqType(INT), "x": INT}
    lo = tc.check(parse_expr("0 <= k + len(g0)"), env)
    hi = tc.check(parse_expr("k + len(g0) < len(g0)"), env)
    k_pos = tc.check(parse_expr("0 <= k"), env)
    # lengths are non-negative; with 0 <= k the pair is contradictory
    assert check_consistency([lo, hi], [k_pos], solver=solver_argv) == "unsat"
    assert check_consistency([], [k_pos], solver=solver_argv) == "sat"
    a = tc.check(parse_expr("x > 0"), env)
    b = tc.check(parse_expr("x < 10"), env)
    assert check_consistency([a, b], [], solver=solver_argv) == "sat"


def test_oracle_scoping(solver_argv, shapes):
    tc = TypeChecker(shapes)
    env = {"x": INT}
    oracle = ConsistencyOracle(solver_argv)
    try:
        oracle.set_base([tc.check(parse_expr("x > 0"), env)])
        assert oracle.check([tc.check(parse_expr("x < 0"), env)]) == "unsat"
        # the previous check's assertions must not leak
        assert oracle.check([tc.check(parse_expr("x == 5"), env)]) == "sat"
        oracle.set_base([tc.check(parse_expr("x > 7"), env)])
        assert oracle.check([tc.check(parse_expr("x == 5"), env)]) == "unsat"
    finally:
        oracle.close()


def test_solver_verdict_matches_bruteforce_sample(solver_argv):
    # small pilot of the acceptance-criterion equivalence run
    from tests.qfgen import gen_qf_goal, goal_valid_bruteforce

    import random

    from osv.smt import SolverProcess, run_script_in_session

    sym = resolve_types([])
    session = SolverProcess(solver_argv)
    try:
        for seed in range(40):
            rng = random.Random(seed)
            goal, ng, shape = gen_qf_goal(sym, rng)
            expected = goal_valid_bruteforce(shape, ng, sym)
            status = run_script_in_session(session, encode_goal(ng))
            assert (status == "unsat") == expected, (seed, status)
    finally:
        session.kill()
