"""Exception hierarchy shared by every module.

All domain errors derive from :class:`IdagoError` so callers (notably the CLI)
can separate them from programming errors.  The class name doubles as the
machine-parsable reason code.
"""

from __future__ import annotations


class IdagoError(Exception):
    """Base class for domain errors."""

    @property
    def reason(self) -> str:
        return type(self).__name__


# cloudnet
class DuplicateNodeId(IdagoError):
    pass


class DanglingLinkEndpoint(IdagoError):
    pass


class NegativeCapacityOrCost(IdagoError):
    pass


# servicegraph
class UnknownCommodity(IdagoError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class InvalidDag(IdagoError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# transform
class InconsistentEmbedding(IdagoError):
    pass


# formulation
class UnresolvableEndpoint(IdagoError):
    pass


class ZeroBlockCapacity(IdagoError):
    pass


class UnsupportedPlacement(IdagoError):
    pass


class UnknownVariable(IdagoError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


# lpsolve
class ParseError(IdagoError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


# decompose
class NoPositivePath(IdagoError):
    pass


class NonConvergence(IdagoError):
    pass


# rounding
class LpInfeasible(IdagoError):
    pass


class MissingTreeEmbedding(IdagoError):
    pass


# analysis
class ZeroBaselineCost(IdagoError):
    pass


class NonpositiveBeta(IdagoError):
    pass


class NonpositiveAlpha(IdagoError):
    pass


class NonpositiveArgument(IdagoError):
    pass


class InvalidTheta(IdagoError):
    pass


class MissingDecomposition(IdagoError):
    pass


# scenarios
class SchemaError(IdagoError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnknownScenario(IdagoError):
    pass
