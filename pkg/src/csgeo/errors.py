"""Exception hierarchy shared by every csgeo module."""

from __future__ import annotations


class CsgeoError(Exception):
    """Base class for all errors raised by csgeo."""


class SpecError(CsgeoError):
    """Malformed surface spec document (bad JSON, wrong keys, bad params)."""


class ParseError(SpecError):
    """Syntax error in a surface expression.

    ``offset`` is the byte offset into the UTF-8 encoded source and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class UnknownIdentifier(SpecError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class DomainError(CsgeoError):
    """Expression evaluated outside the smooth domain of one of its functions."""


class NotOnSphere(CsgeoError):
    pass


class NotTangent(CsgeoError):
    pass


class DegenerateMetric(CsgeoError):
    pass


class GridMismatch(CsgeoError):
    pass


class ContactAngleZero(CsgeoError):
    """The Reeb field is tangent to the surface, so sin(beta) vanishes."""


class HolomorphicAngleDegenerate(CsgeoError):
    """sin(alpha) vanishes, so e3 and e4 are undefined."""


class GaugeFlip(CsgeoError):
    pass


class DomainGuard(CsgeoError):
    """A trigonometric factor of an identity is singular at the point."""


class NotMinimal(CsgeoError):
    pass


class NonConstantBeta(CsgeoError):
    pass


class GaugeNotDiagonal(CsgeoError):
    pass


class AlphaOutOfRange(CsgeoError):
    pass


class NotFlat(CsgeoError):
    pass


class NonConstantA(CsgeoError):
    pass


class NoBranch(CsgeoError):
    pass


class IncompatibleConnection(CsgeoError):
    pass
