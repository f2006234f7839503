import random

import pytest

from osv.errors import TypeCheckError
from osv.parser import parse, parse_expr, parse_query
from osv.randgen import TermGen, gen_symbols
from osv.typecheck import TypeChecker, check_functions, type_check
from osv.types import BitVecType, INT, MapType, NamedType, SeqType, resolve_types


@pytest.fixture(scope="module")
def env():
    return {
        "s": NamedType("Shape"),
        "m": MapType(INT, NamedType("Shape")),
        "p": NamedType("Point"),
        "i": INT,
        "k": INT,
        "a": SeqType(INT),
    }


def check(shapes, text, env, expected=None):
    return TypeChecker(shapes).check(parse_expr(text), env, expected)


def test_constructor_field_access(shapes):
    sym = resolve_types(parse("""
        typedef address = int32u;
        enum addrval = Vnull | Vptr(address addr);
    """))
    tc = TypeChecker(sym)
    assert tc.check(parse_expr("Vptr(10).addr"), {}).ty == BitVecType(32, False)
    assert str(tc.check(parse_expr("Vnull.id"), {}).ty) == "int"


def test_branch_index_values(shapes):
    sym = resolve_types(parse("enum addrval = Vnull | Vptr(int32u addr);"))
    tc = TypeChecker(sym)
    assert tc.check(parse_expr("Vnull"), {}).index == 0
    assert tc.check(parse_expr("Vptr(10)"), {}).index == 1


def test_update_field_type_mismatch(shapes, env):
    with pytest.raises(TypeCheckError, match="expected int, got bool"):
        check(shapes, "p{x := true}", env)


def test_literal_adapts_to_bitvector(shapes):
    t = check(shapes, "x < 64", {"x": BitVecType(8, False)})
    assert t.right.ty == BitVecType(8, False)
    assert t.right.value == 64


def test_index_on_map_becomes_get(shapes, env):
    from osv.terms import MapGet

    t = check(shapes, "m[k]", env)
    assert isinstance(t, MapGet)
    assert t.ty == NamedType("Shape")


def test_update_dispatches_on_collection(shapes, env):
    from osv.terms import MapUpdate, SeqUpdate

    assert isinstance(check(shapes, "update(0, 1, a)", env), SeqUpdate)
    m_env = {**env, "sm": MapType(INT, INT)}
    assert isinstance(check(shapes, "update(0, 1, sm)", m_env), MapUpdate)


def test_unknown_identifier(shapes, env):
    with pytest.raises(TypeCheckError, match="unknown identifier"):
        check(shapes, "zzz + 1", env)


def test_unknown_field(shapes, env):
    with pytest.raises(TypeCheckError, match="no field"):
        check(shapes, "p.z", env)


def test_arity_error(shapes, env):
    with pytest.raises(TypeCheckError, match="argument"):
        check(shapes, "len(a, a)", env)


def test_recursion_rejected_by_order():
    decls = parse("function f(int x) -> int { f(x) }")
    sym = resolve_types(decls)
    with pytest.raises(TypeCheckError, match="unknown function"):
        check_functions(sym, decls)


def test_quantifier_body_must_be_bool(shapes, env):
    with pytest.raises(TypeCheckError):
        check(shapes, "forall (int q) { q + 1 }", env)


def test_switch_branches_must_agree(shapes, env):
    with pytest.raises(TypeCheckError):
        check(shapes, "switch (s) { case polygon(ps): 1; default: true; }", env)


def test_goal_free_names_must_be_declared(shapes):
    g = parse_query("query q { shows x == 1 }")
    with pytest.raises(TypeCheckError, match="unknown identifier"):
        type_check(g, shapes)


def test_type_check_deterministic_and_idempotent():
    # Spec property, full-strength version lives in the acceptance suite.
    for seed in range(200):
        rng = random.Random(seed)
        sym = gen_symbols(rng)
        goal = TermGen(sym, rng).gen_goal(f"g{seed}")
        once = type_check(goal, sym)
        assert type_check(goal, sym) == once
        assert type_check(once, sym) == once
