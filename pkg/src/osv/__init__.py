"""Automatic prover for functional specifications of kernel data structures."""

from .errors import NormalizeError, ParseError, SolverError, SpecError, TypeCheckError
from .parser import parse, parse_expr, parse_query
from .normalize import check_normal_form, normalize
from .instantiate import InstConfig, instantiate_all
from .prove import ProveConfig, QueryReport, run, run_query, stats
from .smt import ConsistencyOracle, check_consistency, encode_goal, run_solver
from .typecheck import check_functions, type_check
from .types import resolve_types

__all__ = [
    "ConsistencyOracle", "InstConfig", "NormalizeError", "ParseError",
    "ProveConfig", "QueryReport", "SolverError", "SpecError", "TypeCheckError",
    "check_consistency", "check_functions", "check_normal_form", "encode_goal",
    "instantiate_all", "normalize", "parse", "parse_expr", "parse_query",
    "resolve_types", "run", "run_query", "run_solver", "stats", "type_check",
]
