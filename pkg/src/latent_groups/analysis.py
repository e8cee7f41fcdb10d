"""Enumerate candidate models for a dataset and compute their posterior table."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .data import Dataset, TwoWayLayout
from .design import (
    ANCOVA_CLASSES,
    ONEWAY_CLASSES,
    TWOWAY_CLASSES,
    ModelSpec,
    build_model_matrix,
    class_order,
    is_scheme_indexed,
    sufficient_stats,
)
from .errors import ConfigurationError, LatentGroupsError
from .marginal_flat import (
    FractionalConfig,
    fbf_exponent,
    logq_flat_hetero_laplace,
    logq_flat_hetero_separable,
    logq_flat_homoscedastic,
)
from .marginal_gprior import logq_gprior_hetero, logq_gprior_homoscedastic
from .posterior import PosteriorTable, model_priors, posterior_probs
from .schemes import enumerate_schemes

log = logging.getLogger(__name__)

DEFAULT_PRIOR = {"ancova": "flat", "twoway": "gprior"}
DEFAULT_MIN_GROUP = {"ancova": 1, "twoway": 2}


def layout_of(data) -> str:
    return "twoway" if isinstance(data, TwoWayLayout) else "ancova"


def default_classes(data) -> tuple[str, ...]:
    if isinstance(data, TwoWayLayout):
        return TWOWAY_CLASSES
    return ANCOVA_CLASSES if data.covariate is not None else ONEWAY_CLASSES


def candidate_models(data, classes=None, min_group_size: int | None = None, drop_empty: bool = False):
    """Model specs in class order, schemes in enumeration order, plus per-class scheme counts."""
    layout = layout_of(data)
    classes = default_classes(data) if classes is None else tuple(classes)
    unknown = [c for c in classes if c not in class_order(layout)]
    if unknown:
        raise ConfigurationError(f"unknown {layout} classes: {', '.join(unknown)}")
    classes = [c for c in class_order(layout) if c in classes]
    m = DEFAULT_MIN_GROUP[layout] if min_group_size is None else min_group_size
    schemes = enumerate_schemes(data.K, m)
    specs, counts, kept = [], {}, []
    for c in classes:
        if is_scheme_indexed(layout, c):
            if not schemes:
                if drop_empty:
                    continue
                raise ConfigurationError(f"class {c}: no grouping scheme with groups of at least {m} levels")
            counts[c] = len(schemes)
            specs.extend(ModelSpec(layout, c, s) for s in schemes)
        else:
            specs.append(ModelSpec(layout, c))
        kept.append(c)
    return specs, kept, counts


def common_fraction(data, specs, prior_system: str) -> tuple[float, dict]:
    """One fraction b for every candidate: the largest minimal training size over N.

    Bayes factors between models fitted with different b pick up a factor
    proportional to a power of the residual scale, so the fraction must be
    shared.  Models whose own training size is infeasible are returned in
    the second element (spec -> error message) and do not set b.
    """
    best = 0.0
    failed = {}
    for spec in specs:
        if prior_system == "gprior" and data.N > 1 + spec.n_variances:
            # the training size does not depend on the design here
            best = max(best, 1 + spec.n_variances)
            continue
        try:
            dm = build_model_matrix(data, spec)
            best = max(best, fbf_exponent(dm, prior_system).m0)
        except LatentGroupsError as exc:
            failed[spec] = f"{exc.category}: {exc}"
    if best == 0.0:
        return float("nan"), failed
    return best / data.N, failed


def log_fractional_marginal(data, spec: ModelSpec, prior_system: str, b: float | None = None) -> float:
    """log q^b for one model; raises the module error on failure."""
    dm = build_model_matrix(data, spec)
    stats = sufficient_stats(dm)
    cfg = fbf_exponent(dm, prior_system) if b is None else FractionalConfig(m0=b * dm.N, b=b)
    if prior_system == "flat":
        if not spec.heteroscedastic:
            return logq_flat_homoscedastic(stats, cfg)
        if stats.separable:
            return logq_flat_hetero_separable(stats, cfg)
        return logq_flat_hetero_laplace(dm, dm.y, cfg)
    if not spec.heteroscedastic:
        return logq_gprior_homoscedastic(stats, cfg)
    return logq_gprior_hetero(dm, dm.y, cfg)


def evaluate_model(data, spec: ModelSpec, prior_system: str, b: float | None = None) -> tuple[float, list[str]]:
    """Like :func:`log_fractional_marginal` but maps failures to -inf plus a warning."""
    try:
        value = log_fractional_marginal(data, spec, prior_system, b)
    except LatentGroupsError as exc:
        return -math.inf, [f"{exc.category}: {exc}"]
    if not math.isfinite(value):
        return -math.inf, ["numerical: non-finite marginal likelihood"]
    return value, []


def _evaluate_chunk(args):
    data, specs, prior_system, b = args
    return [evaluate_model(data, s, prior_system, b) for s in specs]


def analyze(
    data: Dataset | TwoWayLayout,
    prior_system: str | None = None,
    classes=None,
    min_group_size: int | None = None,
    b: float | None = None,
    threads: int = 1,
    drop_empty: bool = False,
) -> PosteriorTable:
    """Evaluate every candidate model and return the normalized posterior table.

    ``b`` defaults to the shared fraction from :func:`common_fraction`.
    """
    layout = layout_of(data)
    prior_system = prior_system or DEFAULT_PRIOR[layout]
    if prior_system not in ("flat", "gprior"):
        raise ConfigurationError(f"unknown prior system {prior_system!r}")
    specs, kept, counts = candidate_models(data, classes, min_group_size, drop_empty)
    per_class = model_priors(kept, counts)
    priors = [per_class[s.model_class] for s in specs]
    failed = {}
    if b is None:
        b, failed = common_fraction(data, specs, prior_system)
    todo = [s for s in specs if s not in failed]
    done = dict(zip(todo, evaluate_many(data, todo, prior_system, b, threads))) if todo else {}
    results = [done[s] if s in done else (-math.inf, [failed[s]]) for s in specs]
    for spec, (lq, w) in zip(specs, results):
        for msg in w:
            log.warning("model %s: %s", spec, msg)
    table = posterior_probs(specs, [r[0] for r in results], priors, [r[1] for r in results])
    table.metadata = {
        "layout": layout,
        "prior_system": prior_system,
        "b": b,
        "min_group_size": DEFAULT_MIN_GROUP[layout] if min_group_size is None else min_group_size,
        "classes": list(kept),
        "N": data.N,
    }
    return table


def evaluate_many(data, specs, prior_system, b=None, threads: int = 1):
    if threads <= 1 or len(specs) < 2:
        return _evaluate_chunk((data, specs, prior_system, b))
    chunks = [c.tolist() for c in np.array_split(np.array(specs, dtype=object), threads) if len(c)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(_evaluate_chunk, [(data, c, prior_system, b) for c in chunks])
        return [r for part in parts for r in part]
