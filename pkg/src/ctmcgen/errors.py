"""Exception types shared across the package."""


class CtmcgenError(Exception):
    """Base class for all package-specific errors."""


class InvalidMatrix(CtmcgenError):
    """Input matrix is not square or contains non-finite entries."""


class DimensionError(CtmcgenError):
    """Matrix operands have incompatible shapes."""


class LogUndefined(CtmcgenError):
    """Matrix logarithm undefined (eigenvalue at or numerically near zero)."""


class LogFailed(CtmcgenError):
    """All matrix-logarithm strategies failed to produce a finite result."""


class GeneratorValidationError(CtmcgenError):
    """A raw matrix violates the generator constraints.

    Carries the full violation list so callers can report every offending
    entry, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NegativeOffDiagonal(GeneratorValidationError):
    pass


class NonzeroRowSum(GeneratorValidationError):
    pass


class NonAbsorbingLastRow(GeneratorValidationError):
    pass


class InvalidTransitionMatrix(CtmcgenError):
    """A raw matrix violates the stochastic-matrix constraints."""


class AbsorbingStateQuery(CtmcgenError):
    """Default probabilities were requested for the absorbing state itself."""


class MisspecifiedGenerator(CtmcgenError):
    """An observed transition has zero probability under the model."""


class ZeroHoldingTime(CtmcgenError):
    """Expected holding time vanished for a state with expected jumps."""


class DisallowedPair(CtmcgenError):
    """Hessian entry requested for a pair outside the allowed set."""


class SingularInformation(CtmcgenError):
    """Information matrix too ill-conditioned for variance estimates."""


class RejectionBudgetExceeded(CtmcgenError):
    """Endpoint-conditioned rejection sampler ran out of attempts.

    Attributes carry the offending endpoint pair and the attempt count so a
    partially completed chain can still be diagnosed.
    """

    def __init__(self, pair, attempts, completed_runs=0):
        self.pair = pair
        self.attempts = attempts
        self.completed_runs = completed_runs
        super().__init__(
            f"no accepted path for endpoints {pair} after {attempts} attempts "
            f"({completed_runs} completed sweeps)"
        )


class ZeroTruePd(CtmcgenError):
    """Relative default-probability error undefined for zero true PD."""
