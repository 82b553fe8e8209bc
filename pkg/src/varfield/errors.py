"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class VarfieldError(Exception):
    """Base class. ``line``/``col`` are set when the error has a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}, column {self.col}: {self.message}"


class ParseError(VarfieldError):
    pass


class UnknownIdentifier(ParseError):
    pass


class ShapeError(ParseError):
    """Arity or component-count mismatch (curl of a scalar, vector * vector, ...)."""


class NonConstantDivisor(ParseError):
    pass


class FirstOrderViolation(ParseError):
    pass


class MixedMap(ParseError):
    """A coordinate map references fields, or a field map references coordinates."""


class MissingComponent(ParseError):
    pass


class UnsupportedForm(VarfieldError):
    """The result would leave the polynomial expression class."""


class MissingBinding(VarfieldError):
    def __init__(self, atom, message: str | None = None):
        super().__init__(message or f"no value bound for {atom!r}")
        self.atom = atom


class UnknownField(VarfieldError, KeyError):
    def __str__(self) -> str:
        return VarfieldError.__str__(self)


class SingularMap(VarfieldError):
    pass


class OrientationFlip(VarfieldError):
    pass


class GridTooCoarse(VarfieldError):
    pass
