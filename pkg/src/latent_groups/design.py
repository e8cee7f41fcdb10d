"""Model matrices and least-squares sufficient statistics for every model class.

Columns use treatment coding with level 1 (first row, first column label,
group 1) as reference.  For scheme-indexed models the rows are reordered so
group-1 observations come first; ``DesignMatrices.rows`` records the
permutation and ``DesignMatrices.y`` is the response in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, TwoWayLayout
from .errors import ConfigurationError, ContractViolation, DegenerateFitError, RankDeficiencyError
from .schemes import GroupingScheme

ANCOVA_CLASSES = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")
TWOWAY_CLASSES = ("I", "II", "III", "IV")
ONEWAY_CLASSES = ("I", "III", "IV", "VII")

_SCHEMED = {"ancova": {"IV", "VI", "VII", "VIII"}, "twoway": {"II", "III", "IV"}}
_HETERO = {"ancova": {"VII", "VIII"}, "twoway": {"III", "IV"}}

CLASS_NAMES = {
    "ancova": {
        "I": "null",
        "II": "simple linear regression",
        "III": "ANCOVA",
        "IV": "group-contracted ANCOVA",
        "V": "interaction ANCOVA",
        "VI": "group-interaction",
        "VII": "heteroscedastic group-contracted",
        "VIII": "heteroscedastic group-interaction",
    },
    "twoway": {
        "I": "additive",
        "II": "group-by-column interaction",
        "III": "heteroscedastic additive",
        "IV": "heteroscedastic group-by-column interaction",
    },
}


def class_order(layout: str) -> tuple[str, ...]:
    return ANCOVA_CLASSES if layout == "ancova" else TWOWAY_CLASSES


def is_scheme_indexed(layout: str, model_class: str) -> bool:
    return model_class in _SCHEMED[layout]


def is_heteroscedastic(layout: str, model_class: str) -> bool:
    return model_class in _HETERO[layout]


@dataclass(frozen=True)
class ModelSpec:
    layout: str
    model_class: str
    scheme: GroupingScheme | None = None

    def __post_init__(self):
        if self.layout not in _SCHEMED:
            raise ContractViolation(f"unknown layout {self.layout!r}")
        if self.model_class not in class_order(self.layout):
            raise ContractViolation(f"class {self.model_class!r} is not defined for layout {self.layout!r}")
        if is_scheme_indexed(self.layout, self.model_class) != (self.scheme is not None):
            raise ContractViolation(
                f"class {self.model_class} ({self.layout}) "
                + ("requires a grouping scheme" if self.scheme is None else "takes no grouping scheme")
            )

    @property
    def heteroscedastic(self) -> bool:
        return is_heteroscedastic(self.layout, self.model_class)

    @property
    def n_variances(self) -> int:
        return 2 if self.heteroscedastic else 1

    @property
    def label(self) -> str:
        return self.scheme.label if self.scheme is not None else "-"

    def __str__(self) -> str:
        return f"{self.model_class}[{self.label}]" if self.scheme else self.model_class


@dataclass(frozen=True)
class DesignMatrices:
    spec: ModelSpec
    X: np.ndarray
    y: np.ndarray
    column_blocks: dict
    rows: np.ndarray
    group: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1]

    @property
    def group_split(self) -> tuple[int, int] | None:
        if self.group is None:
            return None
        n1 = int(np.count_nonzero(self.group == 1))
        return n1, self.N - n1

    def group_rows(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group == g)


@dataclass(frozen=True)
class SufficientStats:
    N: int
    P: int
    ss_resid: float
    sst: float
    n1: int = 0
    n2: int = 0
    p1: int = 0
    p2: int = 0
    ss_resid1: float = 0.0
    ss_resid2: float = 0.0
    separable: bool = False

    @property
    def r_squared(self) -> float:
        return min(max(1.0 - self.ss_resid / self.sst, 0.0), 1.0)

    @property
    def q(self) -> float:
        return 1.0 - self.r_squared


def _dummies(index: np.ndarray, n_levels: int) -> np.ndarray:
    """Indicator columns for levels 2..n_levels of a 1-based index."""
    return (index[:, None] == np.arange(2, n_levels + 1)[None, :]).astype(float)


def _ancova_blocks(data: Dataset, spec: ModelSpec, group: np.ndarray | None) -> list[tuple[str, np.ndarray]]:
    c = spec.model_class
    N = data.N
    x = data.covariate
    needs_x = c in {"II", "V", "VI", "VIII"}
    if x is None and needs_x:
        raise ConfigurationError(f"ancova class {c} needs a continuous covariate")
    blocks = [("intercept", np.ones((N, 1)))]
    if c in {"III", "V"}:
        blocks.append(("W", _dummies(data.level, data.K)))
    elif c in {"IV", "VI", "VII", "VIII"}:
        blocks.append(("W", (group == 2).astype(float)[:, None]))
    if x is not None and c != "I":
        blocks.append(("V", x[:, None]))
    if c == "V":
        blocks.append(("U", _dummies(data.level, data.K) * x[:, None]))
    elif c in {"VI", "VIII"}:
        blocks.append(("U", ((group == 2) * x)[:, None]))
    return blocks


def _twoway_blocks(layout: TwoWayLayout, spec: ModelSpec, group: np.ndarray | None) -> list[tuple[str, np.ndarray]]:
    row = layout.slgf_level
    col = layout.column_index
    blocks = [("intercept", np.ones((layout.N, 1))), ("W", _dummies(row, layout.R))]
    if spec.model_class in {"I", "III"}:
        blocks.append(("V", _dummies(col, layout.C)))
    else:
        cd = _dummies(col, layout.C)
        blocks.append(("U", np.hstack([cd * (group == 1)[:, None], cd * (group == 2)[:, None]])))
    return blocks


def _check_rank(blocks: list[tuple[str, np.ndarray]], spec: ModelSpec) -> None:
    X = np.hstack([b for _, b in blocks])
    if _rank(X) == X.shape[1]:
        return
    cols = []
    for name, b in blocks:
        cols.append(b)
        Z = np.hstack(cols)
        if _rank(Z) < Z.shape[1]:
            raise RankDeficiencyError(f"model {spec}: design loses rank at block '{name}'", block=name)
    raise RankDeficiencyError(f"model {spec}: design is rank deficient")


def _rank(X: np.ndarray) -> int:
    if X.shape[1] == 0:
        return 0
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.count_nonzero(s > 1e-10 * s[0])) if s[0] > 0 else 0


def build_model_matrix(data: Dataset | TwoWayLayout, spec: ModelSpec) -> DesignMatrices:
    """Assemble X = (1 | W | V | U) for ``spec`` and check full column rank."""
    if isinstance(data, TwoWayLayout) != (spec.layout == "twoway"):
        raise ContractViolation(f"{spec.layout} model applied to {type(data).__name__}")
    group = None
    if spec.scheme is not None:
        group = spec.scheme.membership(data.slgf_level)
    if spec.layout == "ancova":
        blocks = _ancova_blocks(data, spec, group)
    else:
        blocks = _twoway_blocks(data, spec, group)
    _check_rank(blocks, spec)
    X = np.hstack([b for _, b in blocks])
    spans, start = {}, 0
    for name, b in blocks:
        spans[name] = slice(start, start + b.shape[1])
        start += b.shape[1]
    y = data.y
    rows = np.arange(data.N)
    if group is not None:
        rows = np.argsort(group, kind="stable")
        X, y, group = X[rows], y[rows], group[rows]
    return DesignMatrices(spec=spec, X=X, y=y.copy(), column_blocks=spans, rows=rows, group=group)


def sufficient_stats(dm: DesignMatrices, y: np.ndarray | None = None) -> SufficientStats:
    """Residual and total sums of squares from a least-squares fit of ``y`` on ``dm.X``."""
    y = dm.y if y is None else np.asarray(y, dtype=float)
    if y.shape != (dm.N,):
        raise ContractViolation("response length does not match the design")
    coef, *_ = np.linalg.lstsq(dm.X, y, rcond=None)
    resid = y - dm.X @ coef
    ss_resid = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst <= 0.0:
        raise DegenerateFitError("response is constant; total sum of squares is zero")
    if ss_resid <= 1e-12 * sst:
        raise DegenerateFitError(f"model {dm.spec}: perfect fit (zero residual sum of squares)")
    if dm.group is None:
        return SufficientStats(N=dm.N, P=dm.P, ss_resid=ss_resid, sst=sst)
    g1 = dm.group == 1
    p1 = _rank(dm.X[g1])
    p2 = _rank(dm.X[~g1])
    return SufficientStats(
        N=dm.N,
        P=dm.P,
        ss_resid=ss_resid,
        sst=sst,
        n1=int(g1.sum()),
        n2=int((~g1).sum()),
        p1=p1,
        p2=p2,
        ss_resid1=float(resid[g1] @ resid[g1]),
        ss_resid2=float(resid[~g1] @ resid[~g1]),
        separable=p1 + p2 == dm.P,
    )


def group_only_ranks(dm: DesignMatrices) -> tuple[int, int]:
    """Number of coefficients identified only by group 1 (resp. group 2) rows.

    When group i's precision goes to zero, X'PhiX loses exactly this many
    dimensions; fractional marginals need n_i * b to exceed it.
    """
    if dm.group is None:
        raise ContractViolation("model has no grouping scheme")
    g1 = dm.group == 1
    return dm.P - _rank(dm.X[~g1]), dm.P - _rank(dm.X[g1])
