"""Exception hierarchy.

Two broad families: configuration/model problems (bad input, malformed
models) and numerical failures (singular matrices, non-convergence).
The CLI maps the former to exit code 2 and the latter to exit code 3.
"""


class QnuisError(Exception):
    """Base class for all package errors."""


# -- configuration / model problems ------------------------------------------

class ConfigError(QnuisError):
    """Unknown or malformed configuration."""


class DomainError(QnuisError):
    """Parameter value outside the declared domain."""


class ModelError(QnuisError):
    """State family violates its invariants (Hermiticity, trace, positivity)."""


class RegularityError(QnuisError):
    """Derivatives are linearly dependent; the model is not regular."""


class DimensionError(QnuisError):
    """Inconsistent matrix or vector dimensions."""


class RankError(QnuisError):
    """A matrix that must have full (row) rank does not."""


class ModelShapeError(QnuisError):
    """Operation requires a specific Hilbert-space/parameter shape."""


class InvalidPOVMError(QnuisError):
    """Effects are not positive semidefinite or do not sum to identity."""


# -- numerical failures -------------------------------------------------------

class SingularStateError(QnuisError):
    """Density matrix is (numerically) rank deficient."""


class SingularQFIMError(QnuisError):
    """Fisher information matrix is singular or too ill-conditioned to invert."""


class SingularOutcomeError(QnuisError):
    """An outcome with vanishing probability carries derivative weight."""


class OptimizerError(QnuisError):
    """Numerical minimization failed to converge on all starts."""


class InfeasibleError(QnuisError):
    """Linear constraints of an optimization are inconsistent."""


class StepError(QnuisError):
    """ODE integration left the model domain or hit an ill-conditioned block."""


class ConvergenceError(QnuisError):
    """Iterative solver exceeded its iteration budget."""


class ConsistencyError(QnuisError):
    """Two redundant computations of the same quantity disagree."""
