"""
Exception hierarchy shared by the solvers, services and the CLI.

Every error carries a human-readable ``detail`` and the process ``exit_code``
the command line maps it to.
"""
from typing import Any, Optional


class SimulationError(Exception):
    """Base class for all simulator errors."""

    exit_code: int = 1
    status: str = "error"

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = context

    def to_dict(self) -> dict:
        return {"status": self.status, "detail": self.detail, **self.context}


class ConfigurationError(SimulationError):
    """Invalid configuration, with optional field and line diagnostics."""

    exit_code = 2
    status = "config_error"

    def __init__(self, detail: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(detail, field=field, line=line)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field is not None:
            where.append(f"field '{self.field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        return f"{prefix}{self.detail}"


class UnstableStepError(ConfigurationError):
    """Requested step size exceeds the hierarchy stability bound."""


class DivergenceError(SimulationError):
    """An auxiliary density operator blew up or became non-finite."""

    exit_code = 3
    status = "divergence"


class DegeneracyEncountered(SimulationError):
    """The reduced state passed through (near) maximal mixedness."""

    exit_code = 4
    status = "degeneracy"


class NotConvergedError(SimulationError):
    """Truncation depth scan failed the consecutive-depth threshold."""

    exit_code = 5
    status = "not_converged"


class OverlapTooSmall(SimulationError):
    """Adjacent eigenvector overlap fell below the sampling threshold."""

    exit_code = 4
    status = "overlap"


class NonHermitianInput(SimulationError):
    """Matrix handed to the Hermitian eigensolver is not Hermitian."""

    status = "non_hermitian"


class PreconditionViolated(SimulationError):
    """Diagnostic called on a trajectory it is not defined for."""

    status = "precondition"


class TruncationInsufficient(SimulationError):
    """Pseudomode Fock truncation escalation exceeded its cap."""

    exit_code = 5
    status = "truncation"
