"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ExzoneError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ExzoneError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class HypothesisError(ExzoneError, ValueError):
    """Growth-function parameters violate a structural hypothesis (e.g. positive total growth)."""


class SizeMismatch(ExzoneError, ValueError):
    pass


class SolverError(ExzoneError, RuntimeError):
    """A numerical solver failed; the CLI maps these to exit code 1."""


class StiffnessFailure(SolverError):
    pass


class NonFiniteState(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class ConvergenceFailure(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class NoBranch(SolverError):
    """The requested length is below the start of the monotone solution branch."""


class IntegrationFailure(SolverError):
    pass


class InsufficientTail(ExzoneError, ValueError):
    pass


class ConfigError(ExzoneError, ValueError):
    """Invalid run configuration. ``errors`` holds one message per offending field."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
