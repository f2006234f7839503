"""Type expressions, type-level declarations, and the resolved symbol table.

The specification language has primitive types (bool, int, fixed-width
bit-vectors), sequences, finite maps, and named structures/enumerations.
Type aliases introduced by `typedef` are expanded away during resolution
and never appear in resolved types.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .errors import Loc, SpecError


@dataclass(frozen=True)
class BoolType:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class IntType:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BitVecType:
    width: int
    signed: bool

    def __str__(self) -> str:
        return f"int{self.width}{'' if self.signed else 'u'}"


@dataclass(frozen=True)
class SeqType:
    elem: "TypeExpr"

    def __str__(self) -> str:
        return f"Seq<{self.elem}>"


@dataclass(frozen=True)
class MapType:
    key: "TypeExpr"
    value: "TypeExpr"

    def __str__(self) -> str:
        return f"Map<{self.key}, {self.value}>"


@dataclass(frozen=True)
class NamedType:
    """A reference to a declared structure or enumeration (post-resolution)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TypeVar:
    """A query-level type variable; behaves as an opaque primitive type."""

    name: str

    def __str__(self) -> str:
        return self.name


TypeExpr = Union[BoolType, IntType, BitVecType, SeqType, MapType, NamedType, TypeVar]

BOOL = BoolType()
INT = IntType()

# Surface names of the fixed-width integer types.
BITVEC_NAMES = {
    f"int{w}{suffix}": BitVecType(w, signed)
    for w in (8, 16, 32, 64)
    for suffix, signed in (("", True), ("u", False))
}

PRIMITIVE_NAMES = {"bool": BOOL, "int": INT, **BITVEC_NAMES}


def is_primitive(ty: TypeExpr) -> bool:
    """True for types whose values the SMT backend represents directly.

    Type variables count as primitive: they are encoded as uninterpreted
    sorts and support equality.
    """
    return isinstance(ty, (BoolType, IntType, BitVecType, TypeVar))


def is_int_like(ty: TypeExpr) -> bool:
    return isinstance(ty, (IntType, BitVecType))


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class FieldDecl:
    name: str
    ty: TypeExpr


@dataclass(frozen=True)
class TypedefDecl:
    name: str
    ty: TypeExpr
    loc: Loc | None = None


@dataclass(frozen=True)
class StructDecl:
    name: str
    fields: tuple[FieldDecl, ...]
    loc: Loc | None = None

    def field(self, name: str) -> FieldDecl | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class EnumBranch:
    """One alternative of an enumeration; the branch index is its `.id` value."""

    constructor: str
    params: tuple[FieldDecl, ...]


@dataclass(frozen=True)
class EnumDecl:
    name: str
    branches: tuple[EnumBranch, ...]
    loc: Loc | None = None

    def branch_index(self, constructor: str) -> int | None:
        for i, b in enumerate(self.branches):
            if b.constructor == constructor:
                return i
        return None

    def field_type(self, name: str) -> TypeExpr | None:
        for b in self.branches:
            for p in b.params:
                if p.name == name:
                    return p.ty
        return None


class SymbolTable:
    """Resolved type declarations; aliases are gone, named types are concrete."""

    def __init__(self) -> None:
        self.typedefs: dict[str, TypeExpr] = {}
        self.structs: dict[str, StructDecl] = {}
        self.enums: dict[str, EnumDecl] = {}
        # constructor name -> (enum name, branch index)
        self.constructors: dict[str, tuple[str, int]] = {}
        # user functions are attached by the type checker
        self.functions: dict[str, object] = {}

    def struct_of(self, ty: TypeExpr) -> StructDecl | None:
        if isinstance(ty, NamedType):
            return self.structs.get(ty.name)
        return None

    def enum_of(self, ty: TypeExpr) -> EnumDecl | None:
        if isinstance(ty, NamedType):
            return self.enums.get(ty.name)
        return None


def _named_refs(ty: TypeExpr) -> Iterator[str]:
    if isinstance(ty, NamedType):
        yield ty.name
    elif isinstance(ty, SeqType):
        yield from _named_refs(ty.elem)
    elif isinstance(ty, MapType):
        yield from _named_refs(ty.key)
        yield from _named_refs(ty.value)


def expand_type(
    ty: TypeExpr,
    typedefs: dict[str, TypeExpr],
    known_names: set[str],
    type_vars: set[str] = frozenset(),
    loc: Loc | None = None,
) -> TypeExpr:
    """Substitute aliases in `ty`; named types must be declared or be type variables."""
    if isinstance(ty, (BoolType, IntType, BitVecType, TypeVar)):
        return ty
    if isinstance(ty, SeqType):
        return SeqType(expand_type(ty.elem, typedefs, known_names, type_vars, loc))
    if isinstance(ty, MapType):
        key = expand_type(ty.key, typedefs, known_names, type_vars, loc)
        value = expand_type(ty.value, typedefs, known_names, type_vars, loc)
        if not is_int_like(key):
            raise SpecError(f"map key type must be int or a bit-vector type, got {key}", loc)
        return MapType(key, value)
    if isinstance(ty, NamedType):
        if ty.name in typedefs:
            return typedefs[ty.name]
        if ty.name in type_vars:
            return TypeVar(ty.name)
        if ty.name in known_names:
            return ty
        raise SpecError(f"unknown type name `{ty.name}`", loc)
    raise SpecError(f"cannot resolve type {ty!r}", loc)


def resolve_types(decls: list) -> SymbolTable:
    """Build a symbol table from parsed declarations.

    Expands typedef aliases (rejecting cycles), resolves every named type,
    rejects recursive structures/enumerations, and registers constructors.
    Function and query declarations are passed through untouched; the type
    checker handles their bodies.
    """
    table = SymbolTable()
    raw_typedefs: dict[str, TypeExpr] = {}
    raw_structs: dict[str, StructDecl] = {}
    raw_enums: dict[str, EnumDecl] = {}
    locs: dict[str, Loc | None] = {}

    for d in decls:
        if isinstance(d, TypedefDecl):
            target = raw_typedefs
        elif isinstance(d, StructDecl):
            target = raw_structs
        elif isinstance(d, EnumDecl):
            target = raw_enums
        else:
            continue
        for existing in (raw_typedefs, raw_structs, raw_enums):
            if d.name in existing:
                raise SpecError(f"duplicate type declaration `{d.name}`", d.loc)
        if d.name in PRIMITIVE_NAMES:
            raise SpecError(f"`{d.name}` shadows a primitive type", d.loc)
        target[d.name] = d  # type: ignore[assignment]
        locs[d.name] = d.loc

    known_names = set(raw_structs) | set(raw_enums)

    # Expand alias chains, detecting cycles.
    resolved_aliases: dict[str, TypeExpr] = {}

    def resolve_alias(name: str, chain: tuple[str, ...]) -> TypeExpr:
        if name in resolved_aliases:
            return resolved_aliases[name]
        if name in chain:
            raise SpecError(f"cyclic typedef `{name}`", locs.get(name))
        ty = raw_typedefs[name].ty
        out = _expand_with_aliases(ty, chain + (name,))
        resolved_aliases[name] = out
        return out

    def _expand_with_aliases(ty: TypeExpr, chain: tuple[str, ...]) -> TypeExpr:
        if isinstance(ty, NamedType) and ty.name in raw_typedefs:
            return resolve_alias(ty.name, chain)
        if isinstance(ty, SeqType):
            return SeqType(_expand_with_aliases(ty.elem, chain))
        if isinstance(ty, MapType):
            return MapType(
                _expand_with_aliases(ty.key, chain), _expand_with_aliases(ty.value, chain)
            )
        return ty

    for name in raw_typedefs:
        resolve_alias(name, ())
    table.typedefs = resolved_aliases

    def resolve_field_type(ty: TypeExpr, loc: Loc | None) -> TypeExpr:
        return expand_type(ty, resolved_aliases, known_names, frozenset(), loc)

    for s in raw_structs.values():
        seen: set[str] = set()
        fields = []
        for f in s.fields:
            if f.name in seen:
                raise SpecError(f"duplicate field `{f.name}` in struct `{s.name}`", s.loc)
            seen.add(f.name)
            fields.append(FieldDecl(f.name, resolve_field_type(f.ty, s.loc)))
        table.structs[s.name] = StructDecl(s.name, tuple(fields), s.loc)

    for e in raw_enums.values():
        branches = []
        field_types: dict[str, TypeExpr] = {}
        for b in e.branches:
            params = []
            for p in b.params:
                ty = resolve_field_type(p.ty, e.loc)
                if p.name in field_types and field_types[p.name] != ty:
                    raise SpecError(
                        f"field `{p.name}` has conflicting types across branches of `{e.name}`",
                        e.loc,
                    )
                field_types[p.name] = ty
                params.append(FieldDecl(p.name, ty))
            branches.append(EnumBranch(b.constructor, tuple(params)))
        decl = EnumDecl(e.name, tuple(branches), e.loc)
        table.enums[e.name] = decl
        for i, b in enumerate(decl.branches):
            if b.constructor in table.constructors:
                raise SpecError(
                    f"constructor `{b.constructor}` declared more than once", e.loc
                )
            if b.constructor in known_names:
                raise SpecError(
                    f"constructor `{b.constructor}` shadows a type name", e.loc
                )
            table.constructors[b.constructor] = (decl.name, i)

    # Recursion ban: no struct/enum may reach itself through field types.
    def check_recursion(name: str, stack: tuple[str, ...]) -> None:
        if name in stack:
            raise SpecError(f"recursive type `{name}`", locs.get(name))
        refs: list[str] = []
        if name in table.structs:
            for f in table.structs[name].fields:
                refs.extend(_named_refs(f.ty))
        elif name in table.enums:
            for b in table.enums[name].branches:
                for p in b.params:
                    refs.extend(_named_refs(p.ty))
        for r in refs:
            check_recursion(r, stack + (name,))

    for name in known_names:
        check_recursion(name, ())

    return table
