#!/usr/bin/env python3
"""Watching the normalizer reduce a goal, rule by rule.

A goal is reduced until only path-decomposable atoms, constants,
operators, if-then-else, and quantifiers remain, with equalities applied
only at primitive types.  Function bodies inline, deep updates flatten,
switches compile to if-then-else, compound equalities expand
observationally, and non-basic sequence operations reduce to index and
length.  Index-free atomic equalities act as rewrite rules on the way.
"""

from osv.normalize import (
    check_normal_form,
    expand_equalities,
    expand_switch,
    normalize,
)
from osv.parser import parse, parse_query
from osv.printer import print_term
from osv.prove import dump_normal
from osv.typecheck import type_check
from osv.types import resolve_types

symbols = resolve_types(parse("""
    struct Point { int x; int y; }
    enum Shape = polygon(Seq<Point> pts) | single(Point pt);
"""))

# Rule 5 in isolation: equality at an enumeration type becomes a branch
# analysis over observations.
goal = type_check(parse_query(
    "query eq_demo { Shape s; Shape t; assumes s == t; shows true }"
), symbols)
print("s == t at type Shape expands to:\n")
print(" ", print_term(expand_equalities(goal, symbols).assumptions[0].prop))

# Rule 3: a switch compiles to branch-number tests.
goal2 = type_check(parse_query("""
    query switch_demo { Shape s;
      shows switch (s) { case polygon(ps): len(ps); case single(pt): 1; } >= 0 }
"""), symbols)
print("\nswitch compiles to:\n")
print(" ", print_term(expand_switch(goal2, symbols).conclusion.left))

# The full pipeline, with a defining equation doing the heavy lifting:
# `c == append(a, b)` rewrites c away, then the appended reads reduce to
# case-split indexing; the conclusion is negated into the fact set and
# its quantifier becomes a fresh constant.
goal3 = type_check(parse_query("""
    query pipeline_demo {
      Seq<int> a; Seq<int> b; Seq<int> c;
      Map<int, bool> P;
      assumes C: c == append(a, b);
      assumes H: forall (int j) { 0 <= j && j < len(c) -> P[c[j]] };
      shows forall (int k) { 0 <= k && k < len(a) -> P[a[k]] }
    }
"""), symbols)
ng = normalize(goal3, symbols)
print("\nfull pipeline output:\n")
print(dump_normal(ng))
ok, _ = check_normal_form(ng)
print("\nnormal-form check:", ok)
