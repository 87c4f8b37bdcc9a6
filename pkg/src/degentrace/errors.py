"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: structure/domain/hypothesis problems
exit 2, convergence failures exit 3, internal invariant breaches exit 4.
"""


class DegentraceError(Exception):
    """Base class for all package-specific errors."""


class StructureError(DegentraceError, ValueError):
    """Operands are structurally incompatible (dimension or order mismatch)."""


class DomainError(DegentraceError, ValueError):
    """Input lies outside an operation's mathematical domain."""


class HypothesisViolation(DegentraceError, ValueError):
    """A model fails one of the admissibility hypotheses.

    ``hypothesis`` names the violated condition ("H2", "H4", or
    "period-protection"); ``direction`` optionally carries an offending
    phase-space direction for definiteness failures.
    """

    def __init__(self, hypothesis, message, direction=None):
        self.hypothesis = hypothesis
        self.direction = direction
        super().__init__(f"({hypothesis}) {message}")


class ConvergenceError(DegentraceError, RuntimeError):
    """An adaptive or iterative numerical procedure failed to reach tolerance."""


class ResolutionError(ConvergenceError):
    """Sampled data is too coarse for the requested transform (aliasing)."""


class InternalError(DegentraceError, RuntimeError):
    """An invariant that must hold by construction was violated."""
