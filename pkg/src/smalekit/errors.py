"""Exception hierarchy shared by all smalekit modules."""

from __future__ import annotations


class SmalekitError(Exception):
    """Base class for every error raised by the library."""


class UsageError(SmalekitError):
    """Caller supplied arguments outside an operation's domain."""


# expression core


class DenominatorVanishes(SmalekitError):
    def __init__(self, component: int, message: str = ""):
        self.component = component
        super().__init__(message or f"denominator vanishes in component {component}")


class ParseError(SmalekitError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ArityError(SmalekitError):
    pass


# degree engines


class DegreeError(SmalekitError):
    pass


class NotIsolatedZero(DegreeError):
    pass


class NoConvergence(DegreeError):
    pass


class NonRegularValueExhausted(DegreeError):
    pass


class ZeroOnSphere(DegreeError):
    pass


class NoStabilization(DegreeError):
    pass


class NotHolomorphic(DegreeError):
    pass


class EngineDisagreement(DegreeError):
    def __init__(self, results: dict):
        self.results = results
        summary = ", ".join(f"{name}={res.degree}" for name, res in results.items())
        super().__init__(f"degree engines disagree: {summary}")


# rank-2 points


class NotRankTwo(SmalekitError):
    pass


class ShearNotInvertible(SmalekitError):
    pass


class SymmetryViolation(SmalekitError):
    pass


# bundle maps


class NotOnBoundary(UsageError):
    pass


class EpsilonOutOfRange(UsageError):
    pass


class NonFiberedMap(SmalekitError):
    pass


class NonIsolatedLocus(SmalekitError):
    pass


class Unsupported(SmalekitError):
    pass


# integer invariants


class NotDivisible(UsageError):
    pass


class OddH(UsageError):
    pass


class ParityError(UsageError):
    pass
