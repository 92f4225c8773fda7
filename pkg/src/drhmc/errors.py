"""Exception hierarchy.

Anything deriving from :class:`DivergentEvaluation` is recoverable inside a
sampler: the proposal is rejected and counted as a divergence.
"""


class DRHMCError(Exception):
    """Base class for all package errors."""


class DivergentEvaluation(DRHMCError):
    """A density or gradient evaluation that a sampler should reject."""


class EvaluationError(DivergentEvaluation, ArithmeticError):
    """Non-finite intermediate value on the AD tape."""

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


class DomainError(EvaluationError):
    """Argument outside the domain of an elementary function (log, sqrt)."""


class NotSPDError(DivergentEvaluation, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot at ``index``."""

    def __init__(self, index, message=None):
        super().__init__(message or f"matrix not positive definite at pivot {index}")
        self.index = index


class TransformError(DivergentEvaluation):
    """The blockwise transform failed for block ``block``."""

    def __init__(self, block, cause):
        super().__init__(f"transform failed in block {block}: {cause}")
        self.block = block
        self.cause = cause


class InvalidParameterization(DRHMCError, ValueError):
    """A parameter is outside the range required by a parameterization."""


class InvalidPrior(DRHMCError, ValueError):
    """Prior hyperparameters are out of range."""


class InvalidData(DRHMCError, ValueError):
    """Observed data violate model assumptions (e.g. negative counts)."""


class ConvergenceError(DRHMCError):
    """An iterative numerical routine failed to converge."""


class ConfigError(DRHMCError, ValueError):
    """Bad run configuration."""


class RunAborted(DRHMCError):
    """A run stopped early, typically because of too many divergences."""
