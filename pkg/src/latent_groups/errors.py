"""Exception hierarchy.

Every error carries a short ``category`` string so the CLI can emit a
machine-readable error object without inspecting exception types.
"""

from __future__ import annotations


class LatentGroupsError(Exception):
    category = "error"

    def to_dict(self) -> dict:
        return {"category": self.category, "message": str(self)}


class ConfigurationError(LatentGroupsError):
    category = "configuration"


class ParseError(LatentGroupsError):
    category = "parse"


class DataValidationError(LatentGroupsError):
    category = "validation"


class ContractViolation(LatentGroupsError, ValueError):
    category = "contract"


class RankDeficiencyError(LatentGroupsError):
    category = "numerical"

    def __init__(self, message: str, block: str | None = None):
        super().__init__(message)
        self.block = block


class DegenerateFitError(LatentGroupsError):
    category = "degenerate-fit"


class InsufficientDataError(LatentGroupsError):
    category = "insufficient-data"


class ApproximationError(LatentGroupsError):
    """Mode search or curvature check failed inside a Laplace approximation."""

    category = "approximation"

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["diagnostics"] = {k: _jsonable(v) for k, v in self.diagnostics.items()}
        return out


class ConvergenceError(ApproximationError):
    category = "non-convergence"


class NoValidModelError(LatentGroupsError):
    category = "no-valid-model"


class UndefinedBayesFactorError(LatentGroupsError):
    category = "undefined-bayes-factor"


def _jsonable(value):
    try:
        return value.tolist()
    except AttributeError:
        return value
