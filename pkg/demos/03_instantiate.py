#!/usr/bin/env python3
"""The quantifier-instantiation engine, traced round by round.

Universally quantified facts die one quantifier per round.  A graph
connects each fact's outermost bound variable to the sequence/map atoms
it indexes, with the additive offset of each read on the edge; values of
interest flow along the edges (forward with the offset, backward against
it, across same-named atoms under index-equality conditions), and every
candidate's accumulated guard conditions are checked against the
quantifier-free facts by the solver -- contradictory candidates are
pruned, which is what keeps offset chains from running away.
"""

from osv.instantiate import InstConfig, instantiate_all
from osv.normalize import normalize
from osv.parser import parse_query
from osv.smt import ConsistencyOracle, encode_goal, run_solver
from osv.typecheck import type_check
from osv.types import resolve_types

symbols = resolve_types([])

# Removing the k'th element of a duplicate-free sequence: the conclusion
# witness m and its shifted neighbour m+1 drive the instantiations.
goal = type_check(parse_query("""
    query unique_remove {
      type T;
      Seq<T> a; Seq<T> b; int k;
      assumes bound: 0 <= k && k < len(a);
      assumes B: b == remove(k, a);
      assumes U: forall (int i, int j) {
        0 <= i && i < len(a) && 0 <= j && j < len(a) && i != j -> a[i] != a[j]
      };
      shows forall (int m) { 0 <= m && m < len(b) -> b[m] != a[k] }
    }
"""), symbols)

ng = normalize(goal, symbols)
oracle = ConsistencyOracle()
trace = instantiate_all(ng, oracle, InstConfig())
oracle.close()

print(f"{trace.rounds} rounds; instantiations per round: {trace.insts_per_round}")
print(f"facts produced per round: {trace.facts_per_round}\n")
for e in trace.events:
    mark = "accepted" if e.accepted else f"rejected ({e.reason})"
    conds = f"  under {list(e.conditions)}" if e.conditions else ""
    print(f"  round {e.round}  {e.rule:<16} {e.node:<8} := {e.value:<8} {mark}{conds}")

verdict = run_solver(encode_goal(ng), timeout_s=30)
print(f"\nsolver verdict on the quantifier-free remainder: {verdict.status}"
      f"  ({'proved' if verdict.proved else 'not proved'})")
