"""Generalized atomic terms and their (name, indices) decomposition.

A generalized atomic term is built from a variable by field accesses
(including `.id`) and the four basic collection operations: sequence
`index`/`length` and map `get`/`indom`.  Every such term decomposes into a
dot-separated path name plus the ordered list of index/key terms; the path
alone determines the result type and the type of every index slot.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SpecError
from .terms import (
    Default,
    FieldAccess,
    MapGet,
    MapIndom,
    SeqIndex,
    SeqLength,
    Term,
    Var,
)
from .types import (
    BOOL,
    INT,
    MapType,
    NamedType,
    SeqType,
    SymbolTable,
    TypeExpr,
)

BASIC_OPS = ("index", "length", "get", "indom")


@dataclass(frozen=True)
class AtomDecomposition:
    """A generalized atomic term as a (path name, index list) pair."""

    name: str
    idx: tuple[Term, ...]

    @property
    def parts(self) -> tuple[str, ...]:
        return tuple(self.name.split("."))

    def __str__(self) -> str:
        if not self.idx:
            return self.name
        return f"{self.name}[{', '.join(map(repr, self.idx))}]"


def decompose_atomic(term: Term) -> AtomDecomposition | None:
    """Decompose a typed term into (name, idx), or None if not atomic.

    Requires type annotations on the bases of field accesses and
    collection operations (produced by the type checker).
    """
    if isinstance(term, Var):
        return AtomDecomposition(term.name, ())
    if isinstance(term, FieldAccess):
        base = decompose_atomic(term.base)
        if base is None or not isinstance(term.base.ty, NamedType):
            return None
        return AtomDecomposition(f"{base.name}.{term.fld}", base.idx)
    if isinstance(term, SeqIndex):
        base = decompose_atomic(term.seq)
        if base is None or not isinstance(term.seq.ty, SeqType):
            return None
        return AtomDecomposition(f"{base.name}.index", base.idx + (term.index,))
    if isinstance(term, SeqLength):
        base = decompose_atomic(term.seq)
        if base is None or not isinstance(term.seq.ty, SeqType):
            return None
        return AtomDecomposition(f"{base.name}.length", base.idx)
    if isinstance(term, MapGet):
        base = decompose_atomic(term.map)
        if base is None or not isinstance(term.map.ty, MapType):
            return None
        return AtomDecomposition(f"{base.name}.get", base.idx + (term.key,))
    if isinstance(term, MapIndom):
        base = decompose_atomic(term.map)
        if base is None or not isinstance(term.map.ty, MapType):
            return None
        return AtomDecomposition(f"{base.name}.indom", base.idx + (term.key,))
    return None


def atom_type(
    name: str, symbols: SymbolTable, var_types: dict[str, TypeExpr]
) -> tuple[TypeExpr, list[TypeExpr]]:
    """Result type and index-slot types of an atom path.

    Walks the dot-separated path left to right; raises on ill-formed paths
    (e.g. `length` applied to a non-sequence).
    """
    parts = name.split(".")
    if not parts or parts[0] not in var_types:
        raise SpecError(f"atom path `{name}` does not start with a declared variable")
    ty: TypeExpr = var_types[parts[0]]
    idx_types: list[TypeExpr] = []
    for part in parts[1:]:
        if part == "index":
            if not isinstance(ty, SeqType):
                raise SpecError(f"`index` applied to non-sequence in `{name}`")
            idx_types.append(INT)
            ty = ty.elem
        elif part == "length":
            if not isinstance(ty, SeqType):
                raise SpecError(f"`length` applied to non-sequence in `{name}`")
            ty = INT
        elif part == "get":
            if not isinstance(ty, MapType):
                raise SpecError(f"`get` applied to non-map in `{name}`")
            idx_types.append(ty.key)
            ty = ty.value
        elif part == "indom":
            if not isinstance(ty, MapType):
                raise SpecError(f"`indom` applied to non-map in `{name}`")
            idx_types.append(ty.key)
            ty = BOOL
        elif part == "id":
            if symbols.enum_of(ty) is None:
                raise SpecError(f"`.id` applied to non-enumeration in `{name}`")
            ty = INT
        else:
            struct = symbols.struct_of(ty)
            enum = symbols.enum_of(ty)
            if struct is not None:
                f = struct.field(part)
                if f is None:
                    raise SpecError(f"no field `{part}` in struct `{struct.name}`")
                ty = f.ty
            elif enum is not None:
                fty = enum.field_type(part)
                if fty is None:
                    raise SpecError(f"no field `{part}` in enum `{enum.name}`")
                ty = fty
            else:
                raise SpecError(f"field access `{part}` on non-structure in `{name}`")
    return ty, idx_types


def reconstruct(
    decomp: AtomDecomposition, symbols: SymbolTable, var_types: dict[str, TypeExpr]
) -> Term:
    """Rebuild the typed term denoted by a decomposition (inverse of decompose)."""
    parts = decomp.name.split(".")
    ty: TypeExpr = var_types[parts[0]]
    term: Term = Var(parts[0], ty=ty)
    idx = list(decomp.idx)
    for part in parts[1:]:
        if part == "index":
            assert isinstance(ty, SeqType)
            term = SeqIndex(term, idx.pop(0), ty=ty.elem)
            ty = term.ty
        elif part == "length":
            term = SeqLength(term, ty=INT)
            ty = INT
        elif part == "get":
            assert isinstance(ty, MapType)
            term = MapGet(term, idx.pop(0), ty=ty.value)
            ty = term.ty
        elif part == "indom":
            term = MapIndom(idx.pop(0), term, ty=BOOL)
            ty = BOOL
        else:
            if part == "id":
                new_ty: TypeExpr = INT
            else:
                struct = symbols.struct_of(ty)
                enum = symbols.enum_of(ty)
                if struct is not None:
                    new_ty = struct.field(part).ty  # type: ignore[union-attr]
                else:
                    new_ty = enum.field_type(part)  # type: ignore[union-attr,assignment]
            term = FieldAccess(term, part, ty=new_ty)
            ty = new_ty
    assert not idx, "leftover indices after reconstruction"
    return term


def default_value(ty: TypeExpr) -> Term:
    """The designated default value of a type.

    For primitive types this is an uninterpreted constant (one per type);
    for compound types it is the value all of whose observations reduce to
    defaults, represented symbolically.
    """
    return Default(ty, ty=ty)
