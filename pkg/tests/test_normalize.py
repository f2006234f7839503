"""Normalization rules: worked examples and model-preservation checks.

The full 500-goals-per-rule preservation run lives in the acceptance
suite; here each rule gets a smaller randomized pass plus its specific
worked examples.
"""

import random

import pytest

from osv.errors import NormalizeError
from osv.evaluate import goal_holds
from osv.normalize import (
    Normalizer,
    apply_defining_equations,
    check_normal_form,
    expand_definitions,
    expand_equalities,
    expand_struct_updates,
    expand_switch,
    lift_lets,
    normalize,
    prenex_skolemize,
    reduce_nonbasic,
    unbound_quantifiers,
)
from osv.parser import parse, parse_query
from osv.printer import print_term
from osv.randgen import (
    GenConfig,
    TermGen,
    extend_model_with_definitions,
    gen_functions,
    gen_model,
    gen_symbols,
    goal_holds_extended,
)
from osv.terms import Binop, Let, Var, walk
from osv.typecheck import check_functions, type_check
from osv.types import INT, resolve_types


def typed_goal(sym, text):
    return type_check(parse_query(text), sym)


# ---------------------------------------------------------------------------
# Worked examples


def test_equality_expansion_matches_shape_example(shapes):
    g = typed_goal(shapes, "query q { Shape s; Shape t; assumes s == t; shows true }")
    out = expand_equalities(g, shapes).assumptions[0].prop
    expected = (
        "s.id == t.id"
        " && (s.id == 0 -> len(s.pts) == len(t.pts)"
        " && forall (int i) { 0 <= i && i < len(s.pts) ->"
        " s.pts[i].x == t.pts[i].x && s.pts[i].y == t.pts[i].y })"
        " && (s.id == 1 -> s.pt.x == t.pt.x && s.pt.y == t.pt.y)"
    )
    assert print_term(out) == expected


def test_sequence_self_equality_is_valid_on_finite_models(shapes):
    g = typed_goal(shapes, "query q { Seq<int> a; shows a == a }")
    g2 = expand_equalities(g, shapes)
    rng = random.Random(7)
    for _ in range(40):
        m = gen_model(g, shapes, rng)
        assert goal_holds(g2, m)


def test_switch_compiles_to_ite():
    sym = resolve_types(parse("enum addrval = Vnull | Vptr(int32u n);"))
    g = typed_goal(sym, """query q { addrval a;
        shows switch (a) { case Vnull: 0; case Vptr(n): int(n) + 1; } == 0 }""")
    out = expand_switch(g, sym).conclusion
    assert print_term(out.left) == "if (a.id == 0) { 0 } else { int(a.n) + 1 }"


def test_switch_without_default_needs_coverage():
    sym = resolve_types(parse("enum E = A | B;"))
    g = typed_goal(sym, "query q { E e; shows switch (e) { case A: true; } }")
    with pytest.raises(NormalizeError, match="non-exhaustive"):
        expand_switch(g, sym)


def test_struct_update_expansion(shapes):
    g = typed_goal(shapes, "query q { Point p; shows p{x := 5} == p }")
    out = expand_struct_updates(g, shapes).conclusion
    assert print_term(out.left) == "Point{x: 5, y: p.y}"


def test_deep_update_expansion(tcb_symbols):
    g = typed_goal(tcb_symbols, """query q { AbsGlobal absG; int8u prio;
        shows absG{|tcbMap[prio].sus := true|} == absG }""")
    out = expand_struct_updates(g, tcb_symbols).conclusion.left
    printed = print_term(out)
    assert printed.startswith("AbsGlobal{tcbMap: update(prio, AbsTCB{")
    assert "sus: true" in printed


def test_update_through_enum_branch_rejected():
    sym = resolve_types(parse("enum E = A(int x); struct S { E e; }"))
    g = typed_goal(sym, "query q { S s; shows s{|e.x := 1|} == s }")
    with pytest.raises(NormalizeError, match="enumeration"):
        expand_struct_updates(g, sym)


def test_let_hoisting_and_inlining(shapes):
    g = typed_goal(shapes, """query q { int x; Map<int,int> f;
        assumes let t = f[x] in t > 0 end;
        shows f[let v = 1 in v + v end] == f[2] }""")
    out = lift_lets(g, shapes)
    assert any(
        isinstance(a.prop, Binop) and a.prop.op == "==" and isinstance(a.prop.left, Var)
        for a in out.assumptions
    )
    assert not any(isinstance(s, Let) for a in out.assumptions for s in walk(a.prop))
    assert print_term(out.conclusion) == "f[1 + 1] == f[2]"


def test_let_shadowing_inner_wins(shapes):
    g = typed_goal(shapes, "query q { shows (let v = 1 in let v = 2 in v end end) == 2 }")
    out = lift_lets(g, shapes)
    assert print_term(out.conclusion) == "2 == 2"


def test_bounded_quantifier_forms(shapes):
    g = typed_goal(shapes, """query q { Seq<int> a; Map<int,int> m;
        assumes forall (int i in 0 .. len(a)) { a[i] > 0 };
        assumes exists (int k in keys(m)) { m[k] == 0 };
        shows true }""")
    out = unbound_quantifiers(g, shapes)
    assert print_term(out.assumptions[0].prop) == (
        "forall (int i) { 0 <= i && i < len(a) -> a[i] > 0 }"
    )
    assert print_term(out.assumptions[1].prop) == (
        "exists (int k) { indom(k, m) && m[k] == 0 }"
    )


def test_prenex_skolemize_assumption_exists(shapes):
    g = typed_goal(shapes, """query q { Map<int,int> m;
        assumes exists (int v) { m[v] == 0 };
        shows true }""")
    out = prenex_skolemize(g, shapes)
    assert dict(out.variables).get("v") == INT
    assert print_term(out.assumptions[0].prop) == "m[v] == 0"


def test_prenex_skolemize_conclusion_forall(shapes):
    g = typed_goal(shapes, """query q { Seq<int> d; Map<int, bool> P;
        shows forall (int k) { 0 <= k && k < len(d) -> P[d[k]] } }""")
    out = prenex_skolemize(g, shapes)
    assert dict(out.variables).get("k") == INT
    assert print_term(out.conclusion) == "0 <= k && k < len(d) -> P[d[k]]"


def test_append_index_reduction(shapes):
    g = typed_goal(shapes, """query q { Seq<int> a; Seq<int> b; int i;
        shows append(a, b)[i] == 0 }""")
    out = reduce_nonbasic(g, shapes).conclusion.left
    assert print_term(out) == (
        "if (0 <= i && i < len(a)) { a[i] }"
        " else if (len(a) <= i && i < len(a) + len(b)) { b[i - len(a)] }"
        " else { default(int) }"
    )


def test_remove_reduction_matches_positional_form(shapes):
    g = typed_goal(shapes, """query q { Seq<int> a; int k; int m;
        shows remove(k, a)[m] == 0 && len(remove(k, a)) == 0 }""")
    out = reduce_nonbasic(g, shapes).conclusion
    index_part = print_term(out.left.left)
    len_part = print_term(out.right.left)
    assert index_part == "if (m < k) { a[m] } else { a[m + 1] }"
    assert len_part == "if (0 >= len(a) - 1) { 0 } else { len(a) - 1 }"


def test_defining_equation_direct(shapes):
    g = typed_goal(shapes, """query q { Seq<int> a; Seq<int> b; Seq<int> c; int i;
        assumes c == append(a, b);
        shows c[i] == c[i] }""")
    out = apply_defining_equations(g, shapes)
    assert out.assumptions == ()
    assert print_term(out.conclusion) == "append(a, b)[i] == append(a, b)[i]"


def test_indexed_equality_is_not_defining(shapes):
    # An equality whose atomic side carries indices cannot rewrite; with a
    # non-atomic other side it stays a quantifier-producing fact.
    g = typed_goal(shapes, """query q { Map<int, Seq<int32u>> g; Seq<int32u> a; Seq<int32u> b;
        assumes g[2] == append(a, b);
        shows true }""")
    out = apply_defining_equations(g, shapes)
    assert len(out.assumptions) == 1  # kept as an ordinary fact


def test_self_equality_dropped(shapes):
    g = typed_goal(shapes, "query q { int x; assumes x == x; shows true }")
    out = apply_defining_equations(g, shapes)
    assert out.assumptions == ()


def test_cyclic_definitions_demoted(shapes):
    g = typed_goal(shapes, """query q { Map<int,int> f; int a; int b;
        assumes a == f[b];
        assumes b == f[a];
        shows true }""")
    out = apply_defining_equations(g, shapes)
    # one of the two can be used; the cycle must not loop forever
    assert len(out.assumptions) >= 1


def test_function_expansion_nested(shapes):
    sym = resolve_types(parse("""
        function inc(int x) -> int { x + 1 }
        function twice(int x) -> int { inc(inc(x)) }
    """))
    decls = parse("""
        function inc(int x) -> int { x + 1 }
        function twice(int x) -> int { inc(inc(x)) }
    """)
    check_functions(sym, decls)
    g = typed_goal(sym, "query q { int y; shows twice(y) == y + 1 + 1 }")
    out = expand_definitions(g, sym)
    assert print_term(out.conclusion.left) == "y + 1 + 1"


def test_normalize_full_pipeline_normal_form(tcb_symbols):
    from tests.conftest import CORPUS

    decls = parse((CORPUS / "tcb.osv").read_text(), "tcb.osv")
    check_functions(tcb_symbols, decls)
    from osv.terms import Goal

    for goal in [d for d in decls if isinstance(d, Goal)][:6]:
        ng = normalize(type_check(goal, tcb_symbols), tcb_symbols)
        ok, violations = check_normal_form(ng)
        assert ok, (goal.name, violations[:2])


def test_check_normal_form_flags_nonbasic(shapes):
    g = typed_goal(shapes, """query q { Seq<int> a; Seq<int> b;
        shows len(append(a, b)) == 0 }""")
    from osv.normalize import check_term_normal

    violations = []
    check_term_normal(g.conclusion, violations)
    assert violations and "append" in violations[0]


def test_check_normal_form_flags_compound_equality(shapes):
    g = typed_goal(shapes, "query q { Shape s; Shape t; shows s == t }")
    from osv.normalize import check_term_normal

    violations = []
    check_term_normal(g.conclusion, violations)
    assert violations and "non-primitive" in violations[0]


def test_normalize_deterministic(tcb_symbols):
    from tests.conftest import CORPUS

    text = (CORPUS / "unique_remove.osv").read_text()
    sym = resolve_types([])
    g = type_check(parse_query(text), sym)
    a = normalize(g, sym)
    b = normalize(g, sym)
    assert [f.term for f in a.all_facts()] == [f.term for f in b.all_facts()]


def test_normalize_idempotent_on_output(shapes):
    # Re-running the reduction rules on normal facts changes nothing.
    sym = resolve_types([])
    g = type_check(parse_query("""
        query q { Seq<int> a; Seq<int> b; Seq<int> c;
          assumes c == append(a, b);
          assumes forall (int j) { 0 <= j && j < len(c) -> c[j] > 0 };
          shows forall (int k) { 0 <= k && k < len(a) -> a[k] > 0 } }"""), sym)
    ng = normalize(g, sym)
    nz = Normalizer(sym, set(ng.used_names))
    for f in ng.all_facts():
        t = nz.reduce_nonbasic_term(nz.expand_equalities_term(f.term))
        t = nz.unbound_quantifiers_term(t)
        t = nz.prenex_term(t)
        assert t == f.term


def test_rewrite_budget_exhaustion(shapes):
    g = typed_goal(shapes, "query q { Seq<int> a; Seq<int> b; shows a == b }")
    with pytest.raises(NormalizeError, match="budget"):
        normalize(g, shapes, budget=0)


# ---------------------------------------------------------------------------
# Model preservation (smaller randomized pass; acceptance runs 500/rule)

RULES = {
    "definitions": (expand_definitions, GenConfig(allow_calls=True)),
    "updates": (expand_struct_updates, GenConfig()),
    "switch": (expand_switch, GenConfig()),
    "lets": (lift_lets, GenConfig()),
    "equalities": (expand_equalities, GenConfig()),
    "bounds": (unbound_quantifiers, GenConfig()),
    "prenex": (prenex_skolemize, GenConfig()),
    "nonbasic": (reduce_nonbasic, GenConfig()),
    "defining": (apply_defining_equations, GenConfig()),
}


def check_rule_preservation(rule_name, goals_count, models_per_goal, seed_base=0):
    rule, cfg = RULES[rule_name]
    discrepancies = []
    for i in range(goals_count):
        rng = random.Random(seed_base + i)
        sym = gen_symbols(rng)
        if cfg.allow_calls:
            gen_functions(sym, rng)
        goal = type_check(TermGen(sym, rng, cfg).gen_goal(f"g{i}"), sym)
        transformed = rule(goal, sym)
        new_vars = {
            n: t for n, t in transformed.variables if n not in dict(goal.variables)
        }
        for _ in range(models_per_goal):
            model = gen_model(goal, sym, rng)
            before = goal_holds(goal, model)
            if rule_name == "lets":
                extended = extend_model_with_definitions(transformed, model, new_vars)
                after = goal_holds(transformed, extended)
            elif new_vars:
                after = goal_holds_extended(transformed, model, new_vars, sym)
                if after is None:
                    continue
            else:
                after = goal_holds(transformed, model)
            if before != after:
                discrepancies.append((rule_name, i))
                break
    return discrepancies


@pytest.mark.parametrize("rule_name", sorted(RULES))
def test_rule_preserves_models(rule_name):
    assert check_rule_preservation(rule_name, 60, 3) == []
