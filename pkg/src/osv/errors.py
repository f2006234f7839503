"""Errors raised while processing specification files."""

from __future__ import annotations


class Loc:
    """Source location: file, 1-based line and column."""

    __slots__ = ("path", "line", "col")

    def __init__(self, path: str, line: int, col: int):
        self.path = path
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}"

    def __repr__(self) -> str:
        return f"Loc({self.path!r}, {self.line}, {self.col})"


class SpecError(Exception):
    """Base class; formats as `file:line:col: message` when a location is known."""

    def __init__(self, message: str, loc: Loc | None = None):
        self.message = message
        self.loc = loc
        super().__init__(f"{loc}: {message}" if loc is not None else message)


class ParseError(SpecError):
    pass


class TypeCheckError(SpecError):
    pass


class NormalizeError(SpecError):
    pass


class SolverError(SpecError):
    pass
