"""Model priors, posterior normalization and aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import ModelSpec, class_order
from .errors import ConfigurationError, NoValidModelError, UndefinedBayesFactorError


@dataclass
class PosteriorEntry:
    spec: ModelSpec
    log_q: float
    prior: float
    posterior: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def model_class(self) -> str:
        return self.spec.model_class

    @property
    def scheme(self) -> str:
        return self.spec.label


@dataclass
class PosteriorTable:
    entries: list[PosteriorEntry]
    class_aggregates: dict[str, float]
    scheme_aggregates: dict[str, float]
    metadata: dict = field(default_factory=dict)

    def sorted_entries(self) -> list[PosteriorEntry]:
        """Entries by posterior, descending; ties by class order then scheme label."""
        layout = self.entries[0].spec.layout if self.entries else "ancova"
        rank = {c: i for i, c in enumerate(class_order(layout))}
        return sorted(self.entries, key=lambda e: (-e.posterior, rank[e.model_class], e.scheme))

    def top(self) -> PosteriorEntry:
        return self.sorted_entries()[0]

    def find(self, model_class: str, scheme: str = "-") -> PosteriorEntry:
        for e in self.entries:
            if e.model_class == model_class and e.scheme == scheme:
                return e
        raise KeyError(f"{model_class}[{scheme}]")


def model_priors(classes, scheme_counts: dict[str, int]) -> dict[str, float]:
    """Per-model prior for each class: 1/C, split evenly over the class's schemes.

    Classes missing from ``scheme_counts`` hold a single unschemed model.
    """
    classes = list(classes)
    if not classes:
        raise ConfigurationError("no model classes selected")
    C = len(classes)
    out = {}
    for c in classes:
        S = scheme_counts.get(c)
        if S is None:
            out[c] = 1.0 / C
        elif S < 1:
            raise ConfigurationError(f"class {c} has no admissible grouping schemes")
        else:
            out[c] = 1.0 / (C * S)
    return out


def posterior_probs(specs, log_qs, priors, warnings=None) -> PosteriorTable:
    """Posterior probabilities ∝ exp(log_q - max log_q) * prior."""
    log_qs = np.asarray(log_qs, dtype=float)
    priors = np.asarray(priors, dtype=float)
    finite = np.isfinite(log_qs)
    if not finite.any():
        raise NoValidModelError("every candidate model failed to produce a finite marginal likelihood")
    top = log_qs[finite].max()
    weights = np.where(finite, np.exp(np.where(finite, log_qs - top, 0.0)) * priors, 0.0)
    post = weights / weights.sum()
    warnings = warnings or [[] for _ in log_qs]
    entries = [
        PosteriorEntry(spec=s, log_q=float(lq), prior=float(pr), posterior=float(po), warnings=list(w))
        for s, lq, pr, po, w in zip(specs, log_qs, priors, post, warnings)
    ]
    table = PosteriorTable(entries=entries, class_aggregates={}, scheme_aggregates={})
    table.class_aggregates = aggregate(table, "class")
    table.scheme_aggregates = aggregate(table, "scheme")
    return table


def aggregate(table: PosteriorTable, by: str) -> dict[str, float]:
    """Sum posteriors per model class or per scheme label (scheme-free models excluded)."""
    out: dict[str, float] = {}
    if by == "class":
        if table.entries:
            for c in class_order(table.entries[0].spec.layout):
                out[c] = 0.0
        for e in table.entries:
            out[e.model_class] = out.get(e.model_class, 0.0) + e.posterior
    elif by == "scheme":
        for e in table.entries:
            if e.spec.scheme is not None:
                out[e.scheme] = out.get(e.scheme, 0.0) + e.posterior
    else:
        raise ValueError(f"aggregate by 'class' or 'scheme', not {by!r}")
    return out


def bayes_factor(m1: PosteriorEntry, m2: PosteriorEntry) -> float:
    if not (math.isfinite(m1.log_q) and math.isfinite(m2.log_q)):
        raise UndefinedBayesFactorError("Bayes factor needs finite marginal likelihoods for both models")
    return math.exp(m1.log_q - m2.log_q)
