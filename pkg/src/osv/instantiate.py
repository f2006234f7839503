"""Quantifier elimination by condition-tracking instantiation.

Universally quantified facts are eliminated round by round using a
classification graph.  Nodes are the outermost bound variables of
quantified facts plus the free sequence/map atoms of the goal; edges
record how bound variables index those atoms, either with an additive
offset (weight edges) or a more complex shape with a single hole
(pattern edges).  Edges and instantiations carry the if-then-else and
implication guards under which their inducing occurrence is relevant;
candidates whose accumulated conditions contradict the quantifier-free
facts are pruned by the SMT oracle.  Generation numbers bound how far
new index terms may drift from the original goal.

Each round removes the outermost quantifier of every quantified fact,
adding back one guarded instance per surviving instantiation of its
bound variable.  The graph and the instantiation sets persist across
rounds; each round re-propagates over the extended graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

from .atoms import decompose_atomic
from .errors import SpecError
from .normalize import Fact, NormalGoal, renormalize, split_conj
from .printer import print_term
from .smt import ConsistencyOracle
from .terms import (
    Binop,
    BoolConst,
    IfThenElse,
    IntConst,
    MapGet,
    MapIndom,
    Quant,
    SeqIndex,
    Term,
    Unop,
    Var,
    eq,
    free_vars,
    implies_all,
    map_children,
    not_,
    subst,
)
from .types import INT, BitVecType, MapType, SeqType, TypeExpr, is_int_like

HOLE = "?"


# ---------------------------------------------------------------------------
# Linear index arithmetic: canonical `base + offset` forms


@dataclass(frozen=True)
class Linear:
    parts: tuple[tuple[Term, int], ...]  # (opaque term, coefficient), sorted
    const: int
    ty: TypeExpr


def to_linear(t: Term) -> Linear:
    ty = t.ty or INT
    if isinstance(t, IntConst):
        return Linear((), t.value, ty)
    if isinstance(t, Binop) and t.op in ("+", "-"):
        l = to_linear(t.left)
        r = to_linear(t.right)
        sign = 1 if t.op == "+" else -1
        acc: dict[Term, int] = {}
        for base, c in l.parts:
            acc[base] = acc.get(base, 0) + c
        for base, c in r.parts:
            acc[base] = acc.get(base, 0) + sign * c
        parts = tuple(
            sorted(((b, c) for b, c in acc.items() if c != 0), key=lambda p: print_term(p[0]))
        )
        return Linear(parts, l.const + sign * r.const, ty)
    if isinstance(t, Unop) and t.op == "-":
        inner = to_linear(t.arg)
        return Linear(
            tuple((b, -c) for b, c in inner.parts), -inner.const, ty
        )
    if isinstance(t, Binop) and t.op == "*":
        if isinstance(t.left, IntConst):
            k, other = t.left.value, t.right
        elif isinstance(t.right, IntConst):
            k, other = t.right.value, t.left
        else:
            return Linear(((t, 1),), 0, ty)
        inner = to_linear(other)
        return Linear(
            tuple((b, c * k) for b, c in inner.parts if c * k != 0), inner.const * k, ty
        )
    return Linear(((t, 1),), 0, ty)


def from_linear(lin: Linear) -> Term:
    const = lin.const
    if isinstance(lin.ty, BitVecType):
        const %= 1 << lin.ty.width
    out: Term | None = None

    def lit(v: int) -> Term:
        return IntConst(v, ty=lin.ty)

    for base, coeff in lin.parts:
        piece = base if abs(coeff) == 1 else Binop("*", lit(abs(coeff)), base, ty=lin.ty)
        if out is None:
            out = piece if coeff > 0 else Unop("-", piece, ty=lin.ty)
        else:
            out = Binop("+" if coeff > 0 else "-", out, piece, ty=lin.ty)
    if out is None:
        return lit(const)
    if const > 0:
        out = Binop("+", out, lit(const), ty=lin.ty)
    elif const < 0:
        out = Binop("-", out, lit(-const), ty=lin.ty)
    return out


def canon(t: Term) -> Term:
    if t.ty is not None and is_int_like(t.ty):
        return from_linear(to_linear(t))
    return t


def lin_add(a: Term, b: Term) -> Term:
    la, lb = to_linear(a), to_linear(b)
    acc: dict[Term, int] = dict(la.parts)
    for base, c in lb.parts:
        acc[base] = acc.get(base, 0) + c
    parts = tuple(
        sorted(((x, c) for x, c in acc.items() if c != 0), key=lambda p: print_term(p[0]))
    )
    return from_linear(Linear(parts, la.const + lb.const, la.ty))


def lin_sub(a: Term, b: Term) -> Term:
    lb = to_linear(b)
    neg = Linear(tuple((x, -c) for x, c in lb.parts), -lb.const, lb.ty)
    return lin_add(a, from_linear(neg))


def const_fold(t: Term) -> Term:
    """Fold ground integer comparisons and trivial boolean shapes."""
    if isinstance(t, Unop) and t.op == "!":
        inner = const_fold(t.arg)
        if isinstance(inner, BoolConst):
            return BoolConst(not inner.value, ty=t.ty)
        return not_(inner) if inner is not t.arg else t
    if isinstance(t, Binop) and t.op in ("==", "!=", "<", "<=", ">", ">="):
        if t.left.ty is not None and is_int_like(t.left.ty):
            diff = to_linear(Binop("-", t.left, t.right, ty=t.left.ty))
            if not diff.parts and not isinstance(t.left.ty, BitVecType):
                v = diff.const
                res = {
                    "==": v == 0, "!=": v != 0, "<": v < 0,
                    "<=": v <= 0, ">": v > 0, ">=": v >= 0,
                }[t.op]
                return BoolConst(res, ty=t.ty)
    if isinstance(t, Binop) and t.op == "&&":
        l, r = const_fold(t.left), const_fold(t.right)
        if isinstance(l, BoolConst):
            return r if l.value else l
        if isinstance(r, BoolConst):
            return l if r.value else r
        if l is not t.left or r is not t.right:
            return replace(t, left=l, right=r)
    return t


# ---------------------------------------------------------------------------
# Graph structures


@dataclass(frozen=True)
class BoundVarNode:
    fid: int
    var: str

    def __str__(self) -> str:
        return f"{self.var}@{self.fid}"


@dataclass(frozen=True)
class AtomNode:
    name: str
    idx: tuple[Term, ...]

    def __str__(self) -> str:
        if not self.idx:
            return self.name
        return f"{self.name}[{', '.join(print_term(i) for i in self.idx)}]"


@dataclass(frozen=True)
class Edge:
    src: BoundVarNode
    target: AtomNode
    kind: str  # "weight" | "pattern"
    payload: Term  # offset term, or pattern with the hole variable `?`
    conditions: tuple[Term, ...]
    var_ty: TypeExpr


@dataclass
class Inst:
    node: object
    value: Term
    conditions: tuple[Term, ...]
    generation: int
    round: int
    rule: str


@dataclass
class TraceEvent:
    round: int
    rule: str
    node: str
    value: str
    conditions: tuple[str, ...]
    generation: int
    accepted: bool
    reason: str = ""
    node_obj: object = None
    value_term: Term | None = None
    condition_terms: tuple[Term, ...] = ()
    src_node: str = ""

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "rule": self.rule,
            "node": self.node,
            "value": self.value,
            "conditions": list(self.conditions),
            "generation": self.generation,
            "accepted": self.accepted,
            "reason": self.reason,
            "src": self.src_node,
        }


@dataclass
class FactEvent:
    round: int
    src_fid: int
    label: str
    var: str
    value: str
    new_fid: int
    value_term: Term | None = None
    conditions: tuple[Term, ...] = ()
    body: Term | None = None

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "fact": self.src_fid,
            "label": self.label,
            "var": self.var,
            "value": self.value,
            "new_fact": self.new_fid,
        }


@dataclass
class Trace:
    events: list[TraceEvent] = field(default_factory=list)
    fact_events: list[FactEvent] = field(default_factory=list)
    rounds: int = 0
    capped: bool = False
    divergent: bool = False
    dropped_facts: list[int] = field(default_factory=list)
    insts_per_round: list[int] = field(default_factory=list)
    facts_per_round: list[int] = field(default_factory=list)

    def accepted(self) -> list[TraceEvent]:
        return [e for e in self.events if e.accepted]

    def to_json_lines(self) -> list[dict]:
        return [e.to_json() for e in self.events]


@dataclass
class InstConfig:
    gen_cutoff: int = 2
    node_cap: int = 200
    round_cap: int = 2000
    max_rounds: int = 8
    smt_timeout_ms: int = 2000
    deadline_s: float | None = None  # wall-clock budget for all rounds


class Graph:
    def __init__(self) -> None:
        self.nodes: dict[object, int] = {}  # node -> round of creation
        self.edges: list[Edge] = []
        self._edge_keys: set = set()
        # node -> value -> entries; at most one entry per value that did
        # not arrive by same-name copying, plus same-name copies with
        # their own (index-equality) conditions.
        self.insts: dict[object, dict[Term, list[Inst]]] = {}
        self.by_name: dict[str, list[AtomNode]] = {}
        self.term_gen: dict[Term, int] = {}

    def ensure_node(self, node, rnd: int) -> None:
        if node not in self.nodes:
            self.nodes[node] = rnd
            self.insts[node] = {}
            if isinstance(node, AtomNode):
                self.by_name.setdefault(node.name, []).append(node)

    def all_insts(self, node) -> list[Inst]:
        out: list[Inst] = []
        for entries in self.insts.get(node, {}).values():
            out.extend(entries)
        return out

    def add_edge(self, edge: Edge) -> bool:
        key = (edge.src, edge.target, edge.kind, edge.payload, edge.conditions)
        if key in self._edge_keys:
            return False
        self._edge_keys.add(key)
        self.edges.append(edge)
        return True

    def edges_into(self, node: AtomNode) -> list[Edge]:
        return [e for e in self.edges if e.target == node]

    def edges_from(self, src: BoundVarNode) -> list[Edge]:
        return [e for e in self.edges if e.src == src]

    def register_term(self, value: Term, gen: int) -> int:
        key = canon(value)
        if key in self.term_gen:
            return self.term_gen[key]
        self.term_gen[key] = gen
        return gen


# ---------------------------------------------------------------------------
# Scanning facts for nodes, edges, and initial instantiations


def subterm_conditions(t: Term, path: tuple[int, ...]) -> list[Term]:
    """Conditions of the subterm at a child-index path from the root.

    Empty at the root; descending into the branches of an if-then-else
    prepends the condition (negated for the else branch); descending into
    the consequent of an implication prepends the antecedent; all other
    constructs inherit.
    """
    conds: list[Term] = []
    cur = t
    for step in path:
        kids = _children_list(cur)
        if step < 0 or step >= len(kids):
            raise SpecError(f"invalid position {path} in `{print_term(t)[:80]}`")
        if isinstance(cur, IfThenElse):
            if step == 1:
                conds = [cur.cond] + conds
            elif step == 2:
                conds = [not_(cur.cond)] + conds
        elif isinstance(cur, Binop) and cur.op == "->" and step == 1:
            conds = [cur.left] + conds
        cur = kids[step]
    return conds


def _children_list(t: Term) -> list[Term]:
    out: list[Term] = []

    def grab(x: Term) -> Term:
        out.append(x)
        return x

    map_children(t, grab)
    return out


@dataclass
class Occurrence:
    atom: AtomNode
    index: Term
    conditions: tuple[Term, ...]
    bound_in_index: frozenset[str]


def _free_atom(t: Term, bound: frozenset[str]):
    d = decompose_atomic(t)
    if d is None:
        return None
    for i in d.idx:
        if free_vars(i) & bound:
            return None
    root = d.name.split(".")[0]
    if root in bound:
        return None
    return AtomNode(d.name, tuple(canon(i) for i in d.idx))


def scan_fact(term: Term):
    """Walk a fact collecting free seq/map atoms and index occurrences.

    Yields ("node", atom) for free sequence/map-typed atoms and
    ("occ", Occurrence) for each index application on a free atom.
    Conditions follow the ite/implication descent rules, split into
    conjuncts; they may mention bound variables (callers filter).
    """
    results: list = []

    def walk(t: Term, conds: tuple[Term, ...], bound: frozenset[str]) -> None:
        if t.ty is not None and isinstance(t.ty, (SeqType, MapType)):
            atom = _free_atom(t, bound)
            if atom is not None:
                results.append(("node", atom, bound))
        base_index = None
        if isinstance(t, (SeqIndex, MapGet, MapIndom)):
            if isinstance(t, SeqIndex):
                base, index = t.seq, t.index
            elif isinstance(t, MapGet):
                base, index = t.map, t.key
            else:
                base, index = t.map, t.key
            atom = _free_atom(base, bound)
            if atom is not None:
                results.append(
                    ("occ", Occurrence(atom, index, conds, frozenset(free_vars(index) & bound)), bound)
                )
        if isinstance(t, IfThenElse):
            walk(t.cond, conds, bound)
            walk(t.then, conds + tuple(split_conj(t.cond)), bound)
            walk(t.els, conds + (not_(t.cond),), bound)
            return
        if isinstance(t, Binop) and t.op == "->":
            walk(t.left, conds, bound)
            walk(t.right, conds + tuple(split_conj(t.left)), bound)
            return
        if isinstance(t, Quant):
            walk(t.body, conds, bound | {t.var})
            return
        for c in _children_list(t):
            walk(c, conds, bound)

    walk(term, (), frozenset())
    return results


def extract_edge_payload(index: Term, var: str) -> tuple[str, Term]:
    """Classify an index occurrence of `var` as an offset or a pattern.

    Returns ("weight", c) when the index is `var + c` with `c` free of
    bound variables, else ("pattern", shape) with `var` replaced by the
    hole variable.
    """
    lin = to_linear(index)
    var_coeff = 0
    others: list[tuple[Term, int]] = []
    opaque_with_var = False
    for base, coeff in lin.parts:
        if isinstance(base, Var) and base.name == var:
            var_coeff += coeff
        else:
            if var in free_vars(base):
                opaque_with_var = True
            others.append((base, coeff))
    if var_coeff == 1 and not opaque_with_var:
        offset = from_linear(Linear(tuple(others), lin.const, lin.ty))
        return "weight", offset
    hole = subst(canon(index), {var: Var(HOLE, ty=index.ty)})
    return "pattern", hole


def match_pattern(value: Term, pattern: Term) -> Term | None:
    """First-order match of `value` against a single-hole pattern."""
    captures: list[Term] = []

    def go(v: Term, p: Term) -> bool:
        if isinstance(p, Var) and p.name == HOLE:
            captures.append(v)
            return True
        if type(v) is not type(p):
            return False
        vk = _children_list(v)
        pk = _children_list(p)
        if len(vk) != len(pk):
            return False
        # Compare non-term fields by rebuilding with placeholder children.
        if _shape_key(v) != _shape_key(p):
            return False
        return all(go(a, b) for a, b in zip(vk, pk))

    if not go(canon(value), pattern):
        return None
    if not captures:
        return None
    first = canon(captures[0])
    for c in captures[1:]:
        if canon(c) != first:
            return None
    return first


def _shape_key(t: Term):
    if isinstance(t, Binop):
        return ("binop", t.op)
    if isinstance(t, Unop):
        return ("unop", t.op)
    if isinstance(t, IntConst):
        return ("int", t.value)
    if isinstance(t, BoolConst):
        return ("bool", t.value)
    if isinstance(t, Var):
        return ("var", t.name)
    from .terms import Convert, Default, FieldAccess

    if isinstance(t, FieldAccess):
        return ("field", t.fld)
    if isinstance(t, Convert):
        return ("convert", str(t.ty))
    if isinstance(t, Default):
        return ("default", str(t.of))
    return (type(t).__name__,)


# ---------------------------------------------------------------------------
# The engine


class InstantiationState:
    def __init__(self, ng: NormalGoal, oracle: ConsistencyOracle, config: InstConfig):
        self.ng = ng
        self.oracle = oracle
        self.config = config
        self.graph = Graph()
        self.trace = Trace()
        self.round = 0
        self._round_accepted = 0
        self._worklist: deque[Inst] = deque()

    # -- helpers

    def _conds_str(self, conds: tuple[Term, ...]) -> tuple[str, ...]:
        return tuple(print_term(c) for c in conds)

    def _clean_conditions(self, conds: list[Term]) -> tuple[Term, ...] | None:
        """Fold constants, deduplicate; None means definitely inconsistent."""
        out: list[Term] = []
        seen: set[Term] = set()
        for c in conds:
            f = const_fold(c)
            if isinstance(f, BoolConst):
                if not f.value:
                    return None
                continue
            if f in seen:
                continue
            neg = const_fold(not_(f))
            if neg in seen:
                return None
            seen.add(f)
            out.append(f)
        # Complementary pair check against the accumulated set.
        for c in out:
            if not_(c) in seen:
                return None
        return tuple(out)

    def build_graph(self) -> None:
        """Add nodes and edges for the current fact set (monotone)."""
        g = self.graph
        for fact in self.ng.q_facts:
            assert isinstance(fact.term, Quant) and fact.term.kind == "forall"
            g.ensure_node(BoundVarNode(fact.fid, fact.term.var), self.round)
        for fact in self.ng.all_facts():
            outer = fact.term.var if isinstance(fact.term, Quant) else None
            src = BoundVarNode(fact.fid, outer) if outer else None
            for item in scan_fact(fact.term):
                kind = item[0]
                if kind == "node":
                    g.ensure_node(item[1], self.round)
                    continue
                occ: Occurrence = item[1]
                g.ensure_node(occ.atom, self.round)
                if occ.bound_in_index == frozenset() and outer is None:
                    continue  # initial instantiation, handled separately
                if outer is None or occ.bound_in_index != {outer}:
                    continue
                payload_kind, payload = extract_edge_payload(occ.index, outer)
                conds = tuple(
                    c for c in occ.conditions if free_vars(c) - self.ng.variables.keys() <= {outer}
                )
                edge = Edge(src, occ.atom, payload_kind, payload, conds, fact.term.var_ty)
                g.add_edge(edge)

    def initial_instantiations(self) -> list[Inst]:
        out: list[Inst] = []
        for fact in self.ng.all_facts():
            for item in scan_fact(fact.term):
                if item[0] != "occ":
                    continue
                occ: Occurrence = item[1]
                if occ.bound_in_index:
                    continue
                conds = tuple(
                    c for c in occ.conditions
                    if not (free_vars(c) - self.ng.variables.keys())
                )
                value = canon(occ.index)
                gen = self.graph.term_gen.get(value, 0)
                out.append(Inst(occ.atom, value, conds, gen, self.round, "init"))
        return out

    # -- candidate admission

    def _offer(self, node, value: Term, conds: list[Term], gen: int, rule: str,
               src_node: str = "") -> None:
        g = self.graph
        value = canon(value)
        known = g.term_gen.get(value)
        if known is not None:
            gen = min(gen, known)
        cleaned = self._clean_conditions(conds)
        ev = TraceEvent(
            round=self.round, rule=rule, node=str(node), value=print_term(value),
            conditions=self._conds_str(cleaned if cleaned is not None else tuple(conds)),
            generation=gen, accepted=False, node_obj=node, value_term=value,
            condition_terms=cleaned if cleaned is not None else tuple(conds),
            src_node=src_node,
        )
        existing = g.insts.get(node, {}).get(value, [])
        if rule == "same-name":
            # A copy is redundant when an entry with conditions at least
            # as weak already exists.
            cand_conds = set(cleaned) if cleaned is not None else None
            if cand_conds is not None and any(
                set(e.conditions) <= cand_conds for e in existing
            ):
                return
        else:
            # Values arrived at directly are deduplicated by value alone.
            # A second arrival from a different context weakens the stored
            # entry's conditions to those common to both: an instance of a
            # universal fact is sound unconditionally, so intersecting
            # only ever strengthens the produced instance.
            direct = next((e for e in existing if e.rule != "same-name"), None)
            if direct is not None:
                if cleaned is not None:
                    common = tuple(c for c in direct.conditions if c in set(cleaned))
                    if len(common) < len(direct.conditions):
                        direct.conditions = common
                        self._worklist.append(direct)
                return
        if gen >= self.config.gen_cutoff:
            ev.reason = "generation"
            self.trace.events.append(ev)
            return
        if sum(len(v) for v in g.insts.get(node, {}).values()) >= self.config.node_cap:
            ev.reason = "cap"
            self.trace.capped = True
            self.trace.events.append(ev)
            return
        if self._round_accepted >= self.config.round_cap:
            ev.reason = "cap"
            self.trace.capped = True
            self.trace.events.append(ev)
            return
        if cleaned is None:
            ev.reason = "inconsistent"
            self.trace.events.append(ev)
            return
        if rule != "init" and cleaned:
            verdict = self.oracle.check(list(cleaned))
            if verdict == "unsat":
                ev.reason = "inconsistent"
                self.trace.events.append(ev)
                return
        inst = Inst(node, value, cleaned, gen, self.round, rule)
        g.ensure_node(node, self.round)
        g.insts[node].setdefault(value, []).append(inst)
        g.register_term(value, gen)
        ev.accepted = True
        ev.conditions = self._conds_str(cleaned)
        ev.condition_terms = cleaned
        self.trace.events.append(ev)
        self._round_accepted += 1
        self._worklist.append(inst)

    # -- propagation rules

    def _propagate_from(self, inst: Inst) -> None:
        g = self.graph
        node = inst.node
        if isinstance(node, BoundVarNode):
            # Forward along weight edges: value + c lands on the atom.
            for e in g.edges_from(node):
                if e.kind != "weight":
                    continue
                value = lin_add(inst.value, e.payload)
                conds = list(inst.conditions) + [
                    subst(c, {node.var: inst.value}) for c in e.conditions
                ]
                self._offer(e.target, value, conds, inst.generation + self._gen_bump(value),
                            "forward", src_node=str(node))
            return
        assert isinstance(node, AtomNode)
        # Reverse along weight edges of every bound variable that reads
        # this atom: a value of interest for one read is tried for each
        # of the variable's reads, adjusted by that read's offset.
        linked_srcs: list[BoundVarNode] = []
        for e in g.edges_into(node):
            if e.kind == "weight" and e.src not in linked_srcs:
                linked_srcs.append(e.src)
        for src in linked_srcs:
            for e2 in g.edges_from(src):
                if e2.kind != "weight":
                    continue
                value = lin_sub(inst.value, e2.payload)
                conds = list(inst.conditions) + [
                    subst(c, {src.var: value}) for c in e2.conditions
                ]
                rule = "reverse" if e2.target == node else "reverse-sibling"
                self._offer(src, value, conds, inst.generation + self._gen_bump(value),
                            rule, src_node=str(node))
        # Pattern edges: match the instantiation against the index shape.
        for e in g.edges_into(node):
            if e.kind != "pattern":
                continue
            captured = match_pattern(inst.value, e.payload)
            if captured is None:
                continue
            conds = list(inst.conditions) + [
                subst(c, {e.src.var: captured}) for c in e.conditions
            ]
            self._offer(e.src, captured, conds,
                        inst.generation + self._gen_bump(captured), "pattern",
                        src_node=str(node))
        # Same-name propagation with index-equality conditions.
        for other in g.by_name.get(node.name, ()):  # insertion order
            if other == node:
                continue
            conds = list(inst.conditions) + [
                eq(a, b) for a, b in zip(node.idx, other.idx)
            ]
            self._offer(other, inst.value, conds, inst.generation, "same-name",
                        src_node=str(node))

    def _gen_bump(self, value: Term) -> int:
        return 0 if canon(value) in self.graph.term_gen else 1

    def propagate(self) -> None:
        """Worklist fixpoint over the four propagation rules."""
        while self._worklist:
            if self._round_accepted >= self.config.round_cap:
                self.trace.capped = True
                self._worklist.clear()
                return
            inst = self._worklist.popleft()
            self._propagate_from(inst)

    # -- rounds

    def register_initial_terms(self) -> None:
        for fact in self.ng.all_facts():
            for item in scan_fact(fact.term):
                if item[0] == "occ" and not item[1].bound_in_index:
                    self.graph.register_term(item[1].index, 0)

    def instantiate_round(self) -> None:
        self.round += 1
        self._round_accepted = 0
        self.oracle.set_base([f.term for f in self.ng.qf_facts])
        self.build_graph()

        # Re-propagate every existing instantiation over the (possibly
        # extended) graph, then feed the new initial ones.
        self._worklist = deque()
        for node in self.graph.nodes:
            for inst in self.graph.all_insts(node):
                self._worklist.append(inst)
        for inst in self.initial_instantiations():
            self._offer(inst.node, inst.value, list(inst.conditions),
                        inst.generation, "init")
        self.propagate()
        self.trace.insts_per_round.append(self._round_accepted)

        new_facts: list[Fact] = []
        remaining: list[Fact] = []
        for fact in self.ng.q_facts:
            q = fact.term
            assert isinstance(q, Quant)
            node = BoundVarNode(fact.fid, q.var)
            insts = self.graph.all_insts(node)
            if not insts:
                self.trace.dropped_facts.append(fact.fid)
                self.ng.dropped.append(fact)
                continue
            for inst in insts:
                body = subst(q.body, {q.var: inst.value})
                guarded = implies_all(list(inst.conditions), body)
                nf = Fact(self.ng.new_fid(), fact.label, guarded)
                new_facts.append(nf)
                self.trace.fact_events.append(FactEvent(
                    round=self.round, src_fid=fact.fid, label=fact.label,
                    var=q.var, value=print_term(inst.value), new_fid=nf.fid,
                    value_term=inst.value, conditions=inst.conditions, body=q.body,
                ))
                # Index terms first appearing in this instance get the
                # next generation after the value that produced them.
                for item in scan_fact(guarded):
                    if item[0] == "occ" and not item[1].bound_in_index:
                        key = canon(item[1].index)
                        if key not in self.graph.term_gen:
                            self.graph.term_gen[key] = inst.generation + 1
            # the quantified fact is removed; instances replace it
        self.ng.q_facts = remaining
        self.trace.facts_per_round.append(len(new_facts))
        renormalize(self.ng, new_facts)

    def run(self) -> Trace:
        import time

        deadline = (
            time.monotonic() + self.config.deadline_s
            if self.config.deadline_s
            else None
        )
        self.register_initial_terms()
        while self.ng.q_facts and self.round < self.config.max_rounds:
            if deadline is not None and time.monotonic() > deadline:
                break
            self.instantiate_round()
        if self.ng.q_facts:
            self.trace.divergent = True
            for fact in self.ng.q_facts:
                self.trace.dropped_facts.append(fact.fid)
                self.ng.dropped.append(fact)
            self.ng.q_facts = []
        self.trace.rounds = self.round
        return self.trace


def instantiate_all(
    ng: NormalGoal,
    oracle: ConsistencyOracle,
    config: InstConfig | None = None,
) -> Trace:
    """Eliminate all universal quantifiers in place; returns the trace.

    On cap/generation divergence the remaining quantified facts are
    dropped (sound: instances only ever weaken the refutation set) and
    the trace is marked divergent.
    """
    state = InstantiationState(ng, oracle, config or InstConfig())
    return state.run()
