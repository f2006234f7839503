import pytest

from osv.parser import parse
from osv.smt import default_solver
from osv.types import resolve_types

CORPUS = __import__("pathlib").Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def solver_argv():
    return default_solver()


@pytest.fixture(scope="session")
def shapes():
    """Symbol table with the Point/Shape declarations used across tests."""
    return resolve_types(parse("""
        struct Point { int x; int y; }
        enum Shape = polygon(Seq<Point> pts) | single(Point pt);
    """))


@pytest.fixture(scope="session")
def tcb_symbols():
    return resolve_types(parse((CORPUS / "tcb.osv").read_text(), "tcb.osv"))
