"""Exception hierarchy shared by all solver modules.

The CLI maps these onto exit codes: configuration and expression errors
give 1, failed hypothesis checks or certificates give 2, and numerical
non-convergence gives 3.
"""


class SubSuperError(Exception):
    """Base class for every error raised by the package."""


class GridMismatchError(SubSuperError, ValueError):
    """Binary operation on grid functions that live on different grids."""


class DomainError(SubSuperError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(SubSuperError):
    """A problem file is malformed or incomplete."""


class HypothesisError(SubSuperError):
    """A structural hypothesis of the method could not be certified.

    ``hypothesis`` names the condition (e.g. ``"H2"`` or ``"a3"``) and
    ``margin`` is the signed amount by which the check failed, if known.
    """

    def __init__(self, hypothesis, message, margin=None, worst_node=None):
        super().__init__(f"({hypothesis}) {message}")
        self.hypothesis = hypothesis
        self.margin = margin
        self.worst_node = worst_node


class CertificateError(HypothesisError):
    """A nodewise order certificate failed."""


class ConvergenceError(SubSuperError):
    """An iterative method stopped without meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
