"""Exception hierarchy for causal-cde."""

from typing import Any


class CausalCdeError(Exception):
    """Base class for all package errors."""


class ContractViolation(CausalCdeError, ValueError):
    """An input broke a documented precondition or type invariant."""


class ConfigError(CausalCdeError):
    """Invalid or missing configuration."""


class EnumerationCapError(CausalCdeError):
    """Exhaustive DAG enumeration was requested above the configured cap."""

    def __init__(self, dim: int, cap: int):
        self.dim = dim
        self.cap = cap
        super().__init__(
            f"refusing to enumerate DAGs on {dim} nodes (cap is {cap}); "
            "the number of labelled DAGs grows super-exponentially "
            "(543 at 4 nodes, 29281 at 5)"
        )


class NumericalError(CausalCdeError):
    """A numerical routine failed (factorization, non-finite values, non-PD step)."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        self.diagnostics = diagnostics or {}
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class AllRestartsFailed(CausalCdeError):
    """Every fallible unit of a batch failed."""

    def __init__(self, errors: dict[int, str]):
        self.errors = errors
        lines = "; ".join(f"seed {seed}: {err}" for seed, err in sorted(errors.items()))
        super().__init__(f"all {len(errors)} restarts failed: {lines}")
