"""Decomposition of generalized atomic terms and the (name, idx) algebra."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from osv.atoms import atom_type, decompose_atomic, default_value, reconstruct
from osv.errors import SpecError
from osv.terms import Default
from osv.parser import parse_expr
from osv.typecheck import TypeChecker
from osv.types import BOOL, INT, MapType, NamedType, SeqType


ENV = {
    "s": NamedType("Shape"),
    "m": MapType(INT, NamedType("Shape")),
    "i": INT,
    "k": INT,
}


def typed(shapes, text):
    return TypeChecker(shapes).check(parse_expr(text), ENV)


@pytest.mark.parametrize("text,name,nidx", [
    ("s.pt.y", "s.pt.y", 0),
    ("s.pts[i].x", "s.pts.index.x", 1),
    ("len(s.pts)", "s.pts.length", 0),
    ("m[k].id", "m.get.id", 1),
    ("m[k].pts[i].y", "m.get.pts.index.y", 2),
    ("indom(k, m)", "m.indom", 1),
])
def test_decompositions(shapes, text, name, nidx):
    d = decompose_atomic(typed(shapes, text))
    assert d is not None
    assert d.name == name
    assert len(d.idx) == nidx


def test_non_basic_root_is_not_atomic(shapes):
    t = TypeChecker(shapes).check(
        parse_expr("append(a, b)[i]"),
        {"a": SeqType(INT), "b": SeqType(INT), "i": INT},
    )
    assert decompose_atomic(t) is None


def test_atom_type_examples(shapes):
    rty, idx = atom_type("m.get.pts.index.y", shapes, ENV)
    assert rty == INT and idx == [INT, INT]
    rty, idx = atom_type("s.pts.length", shapes, ENV)
    assert rty == INT and idx == []
    with pytest.raises(SpecError):
        atom_type("s.pt.y.length", shapes, ENV)


def test_indices_typed_left_to_right(shapes):
    rty, idx = atom_type("m.indom", shapes, ENV)
    assert rty == BOOL and idx == [INT]


def test_reconstruct_round_trip(shapes):
    for text in ["s.pt.y", "s.pts[i].x", "len(s.pts)", "m[k].pts[i].y", "indom(k, m)"]:
        t = typed(shapes, text)
        d = decompose_atomic(t)
        assert reconstruct(d, shapes, ENV) == t


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_round_trip_on_generated_atoms(shapes, data):
    """decompose . reconstruct is the identity on generated atoms."""
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    # Build a random path by walking the types.
    name_parts = [rng.choice(["s", "m"])]
    ty = ENV[name_parts[0]]
    idx = []
    for _ in range(rng.randint(0, 4)):
        if isinstance(ty, SeqType):
            part = rng.choice(["index", "length"])
            if part == "index":
                idx.append(rng.choice(["i", "k"]))
                ty = ty.elem
            else:
                ty = INT
        elif isinstance(ty, MapType):
            part = rng.choice(["get", "indom"])
            idx.append(rng.choice(["i", "k"]))
            ty = ty.value if part == "get" else BOOL
        elif ty == NamedType("Shape"):
            part = rng.choice(["pts", "pt", "id"])
            ty = {"pts": SeqType(NamedType("Point")), "pt": NamedType("Point"), "id": INT}[part]
        elif ty == NamedType("Point"):
            part = rng.choice(["x", "y"])
            ty = INT
        else:
            break
        name_parts.append(part)
    name = ".".join(name_parts)
    try:
        atom_type(name, shapes, ENV)
    except SpecError:
        return  # path ended at a primitive; not a valid atom extension
    from osv.atoms import AtomDecomposition
    from osv.terms import Var

    d = AtomDecomposition(name, tuple(Var(v, ty=INT) for v in idx))
    t = reconstruct(d, shapes, ENV)
    assert decompose_atomic(t) == d


def test_default_values():
    assert default_value(BOOL) == Default(BOOL)
    d = default_value(SeqType(INT))
    assert d.of == SeqType(INT)


def test_default_observations_reduce(shapes):
    from osv.normalize import Normalizer

    nz = Normalizer(shapes, set())
    t = TypeChecker(shapes).check(parse_expr("default(Shape).id"), {})
    assert nz.reduce_observations_term(t) == Default(INT)
    t2 = TypeChecker(shapes).check(parse_expr("len(default(Seq<int>))"), {})
    assert nz.reduce_observations_term(t2) == Default(INT)
