"""Monte Carlo data generation under each model class and the study runner.

Every replicate draws from its own stream: ``Philox(key=seed)`` jumped
``rep`` times, so (seed, rep) fixes the dataset regardless of how many
replicates run or in which order.

ANCOVA parameter mapping (K levels, reference level 1):

* ``nu`` holds effects of levels 2..K (full-factor classes) or a single
  group-2 effect (group-based classes).
* ``tau`` is the common slope.  For class V, ``rho`` has one entry per level
  and level k has slope ``tau + rho[k-1]``; in treatment coding the first
  entry is absorbed into the common slope.  For classes VI and VIII, ``rho``
  has one entry per group with the same reading.
* ``sigma2`` is a scalar or a (group 1, group 2) pair.

Two-way mapping (R x C table): cell (r, c) = alpha + nu_r + tau_c + noise,
with nu_1 = 0 and ``nu`` holding rows 2..R.  Interaction classes replace
``tau`` by ``tau1`` for group-1 rows and ``tau2`` for group-2 rows.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import analyze
from .data import Dataset, TwoWayLayout
from .design import ANCOVA_CLASSES, TWOWAY_CLASSES, is_heteroscedastic, is_scheme_indexed
from .errors import ConfigurationError, LatentGroupsError
from .schemes import GroupingScheme

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.0
    nu: tuple[float, ...] = ()
    tau: tuple[float, ...] = ()
    rho: tuple[float, ...] = ()
    sigma2: float | tuple[float, float] = 1.0
    tau2: tuple[float, ...] = ()

    def variances(self) -> tuple[float, float]:
        s = self.sigma2
        pair = (float(s), float(s)) if np.isscalar(s) else tuple(float(v) for v in s)
        if len(pair) != 2 or min(pair) <= 0:
            raise ConfigurationError(f"variances must be positive, got {self.sigma2}")
        return pair


@dataclass(frozen=True)
class StudyConfig:
    layout: str
    true_class: str
    params: ModelParams
    replicates: int = 100
    n_per_level: int = 90
    K: int = 4
    shape: tuple[int, int] = (10, 5)
    seed: int = 20240601
    prior_system: str | None = None
    scheme: GroupingScheme | None = field(default=None)

    def __post_init__(self):
        if self.layout not in ("ancova", "twoway"):
            raise ConfigurationError(f"unknown layout {self.layout!r}")
        classes = ANCOVA_CLASSES if self.layout == "ancova" else TWOWAY_CLASSES
        if self.true_class not in classes:
            raise ConfigurationError(f"class {self.true_class!r} is not a {self.layout} class")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        self.params.variances()

    @property
    def n_levels(self) -> int:
        return self.K if self.layout == "ancova" else self.shape[0]

    def generating_scheme(self) -> GroupingScheme:
        """The group split used to generate data: first half of the levels vs the rest."""
        if self.scheme is not None:
            return self.scheme
        K = self.n_levels
        return GroupingScheme.from_groups(K, range(1, K // 2 + 1))


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(rep))


def _need(name, values, n, cls):
    if len(values) != n:
        raise ConfigurationError(f"class {cls}: {name} needs {n} entries, got {len(values)}")
    return np.asarray(values, dtype=float)


def _noise(rng, group, params, hetero):
    s1, s2 = params.variances()
    if not hetero and s1 != s2:
        raise ConfigurationError("homoscedastic class given two different variances")
    sd = np.where(group == 1, np.sqrt(s1), np.sqrt(s2))
    return rng.standard_normal(group.size) * sd


def simulate_ancova(cfg: StudyConfig, rep: int) -> Dataset:
    if cfg.layout != "ancova":
        raise ConfigurationError("simulate_ancova needs an ancova study")
    rng = replicate_rng(cfg.seed, rep)
    p, c, K, n = cfg.params, cfg.true_class, cfg.K, cfg.n_per_level
    scheme = cfg.generating_scheme()
    level = np.repeat(np.arange(1, K + 1), n)
    x = rng.uniform(0.0, 10.0, size=level.size)
    group = scheme.membership(level)
    mean = np.full(level.size, p.alpha)
    if c in ("III", "V"):
        nu = np.r_[0.0, _need("nu", p.nu, K - 1, c)]
        mean += nu[level - 1]
    elif c in ("IV", "VI", "VII", "VIII"):
        mean += _need("nu", p.nu, 1, c)[0] * (group == 2)
    if c != "I":
        slope = np.full(level.size, _need("tau", p.tau, 1, c)[0])
        if c == "V":
            slope += _need("rho", p.rho, K, c)[level - 1]
        elif c in ("VI", "VIII"):
            slope += _need("rho", p.rho, 2, c)[group - 1]
        mean += slope * x
    hetero = is_heteroscedastic("ancova", c)
    y = mean + _noise(rng, group, p, hetero)
    meta = {"true_class": c, "rep": rep, "seed": cfg.seed}
    if is_scheme_indexed("ancova", c):
        meta["generating_scheme"] = scheme.label
    return Dataset(
        y=y,
        level=level,
        level_labels=tuple(str(k) for k in range(1, K + 1)),
        covariate=x,
        covariate_name="x",
        metadata=meta,
    )


def simulate_twoway(cfg: StudyConfig, rep: int) -> TwoWayLayout:
    if cfg.layout != "twoway":
        raise ConfigurationError("simulate_twoway needs a twoway study")
    rng = replicate_rng(cfg.seed, rep)
    p, c = cfg.params, cfg.true_class
    R, C = cfg.shape
    scheme = cfg.generating_scheme()
    group = scheme.membership(np.arange(1, R + 1))
    nu = np.r_[0.0, _need("nu", p.nu, R - 1, c)]
    if c in ("II", "IV"):
        cols = np.where((group == 1)[:, None], _need("tau", p.tau, C, c), _need("tau2", p.tau2, C, c))
    else:
        cols = np.broadcast_to(_need("tau", p.tau, C, c), (R, C))
    cells = p.alpha + nu[:, None] + cols
    cell_group = np.repeat(group, C)
    cells = cells + _noise(rng, cell_group, p, is_heteroscedastic("twoway", c)).reshape(R, C)
    meta = {"true_class": c, "rep": rep, "seed": cfg.seed}
    if is_scheme_indexed("twoway", c):
        meta["generating_scheme"] = scheme.label
    return TwoWayLayout(
        cells=cells,
        row_labels=tuple(f"r{r}" for r in range(1, R + 1)),
        col_labels=tuple(f"c{j}" for j in range(1, C + 1)),
        metadata=meta,
    )


def simulate(cfg: StudyConfig, rep: int):
    return simulate_ancova(cfg, rep) if cfg.layout == "ancova" else simulate_twoway(cfg, rep)


# Reference settings for the ANCOVA (K = 4, n_k = 90) and 10 x 5 two-way studies.
ANCOVA_PRESETS = {
    "I": ModelParams(sigma2=1.0),
    "II": ModelParams(tau=(0.5,), sigma2=1.0),
    "III": ModelParams(alpha=2.0, nu=(4.0, 6.0, 8.0), tau=(0.5,), sigma2=1.0),
    "IV": ModelParams(alpha=0.0, nu=(3.0,), tau=(0.5,), sigma2=1.0),
    "V": ModelParams(alpha=0.5, nu=(1.0, 1.5, 2.0), rho=(0.25, 0.5, 0.75, 1.0), tau=(0.5,), sigma2=1.0),
    "VI": ModelParams(alpha=0.0, nu=(0.8,), rho=(0.0, 1.0), tau=(1.0,), sigma2=1.0),
    "VII": ModelParams(alpha=0.0, nu=(3.0,), tau=(0.5,), sigma2=(1.0, 5.0)),
    "VIII": ModelParams(alpha=0.0, nu=(3.0,), tau=(0.5,), rho=(0.0, 1.0), sigma2=(1.0, 5.0)),
}

_ROWS = tuple(float(v) for v in range(2, 11))
_TAU = (1.0, 2.0, 3.0, 4.0, 5.0)
_TAU1 = (1.0, 1.8, 2.6, 3.4, 4.2)
_TAU2 = _TAU1[::-1]
TWOWAY_PRESETS = {
    "I": ModelParams(alpha=1.0, nu=_ROWS, tau=_TAU, sigma2=1.0),
    "II": ModelParams(alpha=1.0, nu=_ROWS, tau=_TAU1, tau2=_TAU2, sigma2=1.0),
    "III": ModelParams(alpha=1.0, nu=_ROWS, tau=_TAU, sigma2=(1.0, 0.10)),
    "IV": ModelParams(alpha=1.0, nu=_ROWS, tau=_TAU1, tau2=_TAU2, sigma2=(1.0, 0.10)),
}


def preset_study(layout: str, true_class: str, replicates: int = 100, seed: int = 20240601, **overrides) -> StudyConfig:
    presets = ANCOVA_PRESETS if layout == "ancova" else TWOWAY_PRESETS if layout == "twoway" else None
    if presets is None:
        raise ConfigurationError(f"unknown layout {layout!r}")
    if true_class not in presets:
        raise ConfigurationError(f"no preset for {layout} class {true_class!r}")
    cfg = StudyConfig(layout=layout, true_class=true_class, params=presets[true_class], replicates=replicates, seed=seed)
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class StudySummary:
    config: StudyConfig
    class_posteriors: dict[str, np.ndarray]
    failures: list[tuple[int, str]]
    n_tables: int

    def quartiles(self, model_class: str) -> tuple[float, float, float]:
        v = np.sort(self.class_posteriors[model_class])
        if v.size == 0:
            return (float("nan"),) * 3
        return tuple(float(q) for q in np.quantile(v, [0.25, 0.5, 0.75]))

    def argmax_fraction(self, model_class: str) -> float:
        classes = list(self.class_posteriors)
        M = np.column_stack([self.class_posteriors[c] for c in classes])
        if M.shape[0] == 0:
            return float("nan")
        # ties go to the earlier class, matching the table's reporting order
        winners = np.argmax(M, axis=1)
        return float(np.mean(winners == classes.index(model_class)))

    def rows(self) -> list[dict]:
        out = []
        for c in self.class_posteriors:
            q25, med, q75 = self.quartiles(c)
            out.append({"class": c, "q25": q25, "median": med, "q75": q75, "argmax_fraction": self.argmax_fraction(c)})
        return out

    def write_csv(self, target) -> None:
        """Write the summary to a path or an open text file."""
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="", encoding="utf-8") as fh:
                self.write_csv(fh)
            return
        w = csv.DictWriter(target, fieldnames=["class", "q25", "median", "q75", "argmax_fraction"], lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})


def _run_replicate(args):
    cfg, rep = args
    try:
        data = simulate(cfg, rep)
        table = analyze(data, prior_system=cfg.prior_system)
    except LatentGroupsError as exc:
        return rep, None, f"{exc.category}: {exc}"
    return rep, table.class_aggregates, None


def run_study(cfg: StudyConfig, threads: int = 1) -> StudySummary:
    """Simulate and analyze every replicate; failed replicates are recorded, not fatal."""
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_replicate, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_run_replicate(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    classes = ANCOVA_CLASSES if cfg.layout == "ancova" else TWOWAY_CLASSES
    per_class = {c: [] for c in classes}
    failures = []
    for rep, agg, err in results:
        if agg is None:
            log.warning("replicate %d failed: %s", rep, err)
            failures.append((rep, err))
            continue
        for c in classes:
            per_class[c].append(agg.get(c, 0.0))
    n_ok = len(results) - len(failures)
    return StudySummary(
        config=cfg,
        class_posteriors={c: np.asarray(v, dtype=float) for c, v in per_class.items()},
        failures=failures,
        n_tables=n_ok,
    )
