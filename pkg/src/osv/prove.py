"""Batch driver: load specification files, run queries, report results.

Pipeline per query: type check, normalize, instantiate quantifiers away,
encode, and hand the quantifier-free goal to the solver.  A query is
proved when the solver finds the assumptions plus the negated conclusion
unsatisfiable.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SpecError
from .instantiate import InstConfig, Trace, instantiate_all
from .normalize import NormalGoal, check_normal_form, normalize
from .parser import parse
from .printer import print_term
from .smt import ConsistencyOracle, SolverVerdict, encode_goal, run_solver
from .terms import Goal, term_size
from .typecheck import check_functions, type_check
from .types import SymbolTable, resolve_types

VERDICTS = ("Proved", "Refuted", "Unknown", "Timeout", "Divergence", "Error")


@dataclass
class ProveConfig:
    solver: list[str] | None = None
    timeout_s: float = 60.0
    smt_timeout_ms: int = 2000
    gen_cutoff: int = 2
    node_cap: int = 200
    round_cap: int = 2000
    max_rounds: int = 8
    jobs: int = 1
    dump_normal: bool = False
    dump_insts: bool = False
    dump_smt: Path | None = None

    def inst_config(self) -> InstConfig:
        return InstConfig(
            gen_cutoff=self.gen_cutoff,
            node_cap=self.node_cap,
            round_cap=self.round_cap,
            max_rounds=self.max_rounds,
            smt_timeout_ms=self.smt_timeout_ms,
            deadline_s=self.timeout_s,
        )


@dataclass
class QueryReport:
    name: str
    verdict: str
    file: str = ""
    time_s: float = 0.0
    normalize_s: float = 0.0
    instantiate_s: float = 0.0
    solve_s: float = 0.0
    rounds: int = 0
    insts_per_round: list[int] = field(default_factory=list)
    facts_per_round: list[int] = field(default_factory=list)
    qf_facts: int = 0
    normal_size: int = 0
    countermodel: str = ""
    error: str = ""

    def to_json(self, with_timing: bool = True) -> dict:
        out = {
            "name": self.name,
            "file": self.file,
            "verdict": self.verdict,
            "rounds": self.rounds,
            "insts_per_round": self.insts_per_round,
            "facts_per_round": self.facts_per_round,
            "qf_facts": self.qf_facts,
            "normal_size": self.normal_size,
            "countermodel": self.countermodel,
            "error": self.error,
        }
        if with_timing:
            out["time_s"] = round(self.time_s, 4)
            out["normalize_s"] = round(self.normalize_s, 4)
            out["instantiate_s"] = round(self.instantiate_s, 4)
            out["solve_s"] = round(self.solve_s, 4)
        return out


@dataclass
class QueryArtifacts:
    normal: NormalGoal | None = None
    trace: Trace | None = None
    script: str = ""
    solver_verdict: SolverVerdict | None = None


def load_files(paths: list[str | Path]):
    """Parse and resolve declarations from a set of files.

    Declarations share one namespace across files; queries keep file
    order.
    """
    decls: list = []
    origin: dict[str, str] = {}
    for p in paths:
        text = Path(p).read_text()
        for d in parse(text, str(p)):
            decls.append(d)
            if isinstance(d, Goal):
                if d.name in origin:
                    raise SpecError(
                        f"query `{d.name}` declared in both {origin[d.name]} and {Path(p).name}"
                    )
                origin[d.name] = Path(p).name
    symbols = resolve_types(decls)
    check_functions(symbols, decls)
    goals = [d for d in decls if isinstance(d, Goal)]
    return symbols, goals, origin


def dump_normal(ng: NormalGoal) -> str:
    lines = [f"// normal form of query {ng.name}"]
    for name, ty in ng.variables.items():
        lines.append(f"{ty} {name};")
    for lhs, rhs in ng.defining:
        lines.append(f"// defining: {print_term(lhs)} == {print_term(rhs)}")
    for f in ng.qf_facts:
        lines.append(f"fact {f.label}: {print_term(f.term)};")
    for f in ng.q_facts:
        lines.append(f"fact {f.label}: {print_term(f.term)};")
    return "\n".join(lines)


def run_query(
    symbols: SymbolTable, goal: Goal, config: ProveConfig
) -> tuple[QueryReport, QueryArtifacts]:
    report = QueryReport(name=goal.name, verdict="Error")
    art = QueryArtifacts()
    start = time.monotonic()
    oracle = ConsistencyOracle(config.solver, config.smt_timeout_ms)
    try:
        typed = type_check(goal, symbols)
        t0 = time.monotonic()
        ng = normalize(typed, symbols)
        report.normalize_s = time.monotonic() - t0
        art.normal = ng

        t0 = time.monotonic()
        trace = instantiate_all(ng, oracle, config.inst_config())
        report.instantiate_s = time.monotonic() - t0
        art.trace = trace
        report.rounds = trace.rounds
        report.insts_per_round = list(trace.insts_per_round)
        report.facts_per_round = list(trace.facts_per_round)
        report.qf_facts = len(ng.qf_facts)
        report.normal_size = sum(term_size(f.term) for f in ng.qf_facts)

        ok, violations = check_normal_form(ng)
        if not ok:
            raise SpecError(f"normal-form violation: {violations[0]}")

        art.script = encode_goal(ng)
        t0 = time.monotonic()
        verdict = run_solver(art.script, timeout_s=config.timeout_s, solver=config.solver)
        report.solve_s = time.monotonic() - t0
        art.solver_verdict = verdict

        if verdict.status == "unsat":
            report.verdict = "Proved"
        elif trace.divergent or trace.capped:
            report.verdict = "Divergence"
        elif verdict.status == "sat":
            report.verdict = "Refuted"
            report.countermodel = verdict.model
        elif verdict.status == "timeout":
            report.verdict = "Timeout"
        else:
            report.verdict = "Unknown"
    except SpecError as e:
        report.verdict = "Error"
        report.error = str(e)
    finally:
        oracle.close()
    report.time_s = time.monotonic() - start
    return report, art


def run(
    paths: list[str | Path],
    query_filter: str | None = None,
    config: ProveConfig | None = None,
    expected: dict[str, str] | None = None,
) -> tuple[list[QueryReport], dict[str, QueryArtifacts], int]:
    """Run selected queries; returns reports (in file order), artifacts,
    and the exit code (0 iff every expectation is met).

    Without explicit expectations every query is expected to prove.
    """
    config = config or ProveConfig()
    symbols, goals, origin = load_files(paths)
    if query_filter is not None:
        goals = [g for g in goals if g.name == query_filter]
        if not goals:
            raise SpecError(f"no query named `{query_filter}`")

    results: dict[str, tuple[QueryReport, QueryArtifacts]] = {}
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {g.name: pool.submit(run_query, symbols, g, config) for g in goals}
            for name, fut in futures.items():
                results[name] = fut.result()
    else:
        for g in goals:
            results[g.name] = run_query(symbols, g, config)

    reports = [results[g.name][0] for g in goals]
    for r in reports:
        r.file = origin.get(r.name, "")
    artifacts = {g.name: results[g.name][1] for g in goals}

    exit_code = 0
    for r in reports:
        want = (expected or {}).get(r.name, "Proved")
        if want == "Proved" and r.verdict != "Proved":
            exit_code = 1
        if want != "Proved" and r.verdict == "Proved" and want != "any":
            exit_code = 1
    return reports, artifacts, exit_code


def query_table(reports: list[QueryReport]) -> str:
    """Detailed table: one row per query."""
    header = f"{'Query':40s} {'Verdict':12s} {'Rounds':>6s} {'Time (s)':>9s}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(f"{r.name:40s} {r.verdict:12s} {r.rounds:>6d} {r.time_s:>9.2f}")
    return "\n".join(lines)


def stats(reports: list[QueryReport]) -> str:
    """Summary: one row per source file with goal count and total time."""
    header = f"{'File':30s} {'#Goals':>7s} {'Total Time (s)':>15s}"
    lines = [header, "-" * len(header)]
    per_file: dict[str, list[QueryReport]] = {}
    for r in reports:
        per_file.setdefault(r.file or "<input>", []).append(r)
    total = 0.0
    for fname, rs in per_file.items():
        t = sum(r.time_s for r in rs)
        total += t
        lines.append(f"{fname:30s} {len(rs):>7d} {t:>15.1f}")
    lines.append("-" * len(header))
    lines.append(f"{'Total':30s} {len(reports):>7d} {total:>15.1f}")
    return "\n".join(lines)


def reports_to_json(reports: list[QueryReport], with_timing: bool = True) -> str:
    return json.dumps(
        [r.to_json(with_timing=with_timing) for r in reports], indent=2
    ) + "\n"


def load_manifest(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text())
