"""Fractional marginal likelihoods under flat priors on the regression effects.

Priors: p(beta, phi) ∝ 1/phi for one error variance, ∝ 1/(phi1 phi2) for
two group variances.  Homoscedastic models and heteroscedastic models whose
design factorizes by group have closed forms; heteroscedastic models with
coefficients shared across groups are integrated over the log-variances with
a two-dimensional Laplace approximation.

All results are ``log q^b = log m(Y) - log m_b(Y)``, where ``m_b`` integrates
the likelihood raised to the fraction ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import eigh
from scipy.special import gammaln

from .design import DesignMatrices, SufficientStats, group_only_ranks
from .errors import ContractViolation, DegenerateFitError, InsufficientDataError
from .laplace import ConvergenceError, _nelder_mead_jit, laplace, laplace_log_integral

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class FractionalConfig:
    m0: float
    b: float

    def __post_init__(self):
        if not 0.0 < self.b <= 1.0:
            raise ContractViolation(f"fraction b={self.b} outside (0, 1]")


def fbf_exponent(dm: DesignMatrices, prior_system: str) -> FractionalConfig:
    """Minimal training sample size and fraction b = m0 / N for one model.

    ``m0`` counts the parameters carrying improper priors: all coefficients
    plus the variances under flat priors, the intercept plus the variances
    under the g-prior.  Under flat priors a heteroscedastic model also needs
    ``n_i * b`` above the number of coefficients only group i identifies,
    otherwise the fractional integral diverges as that group's precision
    vanishes; ``m0`` is raised to the smallest integer meeting that.
    """
    N = dm.N
    nvar = dm.spec.n_variances
    if prior_system == "flat":
        m0 = dm.P + nvar
        if dm.spec.heteroscedastic:
            n1, n2 = dm.group_split
            for r, n in zip(group_only_ranks(dm), (n1, n2)):
                m0 = max(m0, math.floor(r * N / n) + 1)
    elif prior_system == "gprior":
        m0 = 1 + nvar
    else:
        raise ContractViolation(f"unknown prior system {prior_system!r}")
    if N <= m0:
        raise InsufficientDataError(f"model {dm.spec}: N={N} does not exceed the minimal training size {m0}")
    return FractionalConfig(m0=m0, b=m0 / N)


def _check(stats: SufficientStats, cfg: FractionalConfig) -> None:
    if stats.N * cfg.b <= stats.P:
        raise InsufficientDataError(f"N*b = {stats.N * cfg.b:g} must exceed P = {stats.P}")
    if stats.ss_resid <= 0:
        raise DegenerateFitError("zero residual sum of squares")


def logq_flat_homoscedastic(stats: SufficientStats, cfg: FractionalConfig) -> float:
    """Closed form; depends on the residuals only through their total."""
    _check(stats, cfg)
    N, P, b = stats.N, stats.P, cfg.b
    return (
        -0.5 * N * (1 - b) * LOG_PI
        + 0.5 * N * b * math.log(b)
        - 0.5 * N * (1 - b) * math.log(stats.ss_resid)
        + gammaln(0.5 * (N - P))
        - gammaln(0.5 * (N * b - P))
    )


def logq_flat_hetero_separable(stats: SufficientStats, cfg: FractionalConfig) -> float:
    """Closed form for two variances when no coefficient spans both groups."""
    if not stats.separable:
        raise ContractViolation("design shares coefficients across groups; use logq_flat_hetero_laplace")
    N, b = stats.N, cfg.b
    out = -0.5 * N * (1 - b) * LOG_PI + 0.5 * N * b * math.log(b)
    for n, p, ss in ((stats.n1, stats.p1, stats.ss_resid1), (stats.n2, stats.p2, stats.ss_resid2)):
        if n * b <= p:
            raise InsufficientDataError(f"group with n={n}, p={p}: n*b = {n * b:g} must exceed p")
        if ss <= 0:
            raise DegenerateFitError("a group is fitted exactly (zero residual sum of squares)")
        out += -0.5 * n * (1 - b) * math.log(ss) + gammaln(0.5 * (n - p)) - gammaln(0.5 * (n * b - p))
    return out


@numba.njit(cache=True)
def hetero_log_integrand(lam, data):
    """log p^b(Y | lambda1, lambda2) with beta integrated out, Jacobian included.

    lambda_i = log sigma_i^2.  ``data`` comes from :func:`hetero_kernel_data`.
    """
    b, N, P, n1, n2, v1, v2, logdet_xx = data[0]
    e, U1, U2 = data[1], data[2], data[3]
    phi1 = math.exp(-lam[0])
    phi2 = math.exp(-lam[1])
    logdet = logdet_xx
    quad = 0.0
    for j in range(e.size):
        d = phi1 * e[j] + phi2 * (1.0 - e[j])
        z = phi1 * U1[j] + phi2 * U2[j]
        logdet += math.log(d)
        quad += z * z / d
    rss = phi1 * v1 + phi2 * v2 - quad
    return (
        -0.5 * (N * b - P) * 1.8378770664093453
        - 0.5 * P * math.log(b)
        - 0.5 * b * (n1 * lam[0] + n2 * lam[1])
        - 0.5 * logdet
        - 0.5 * b * rss
    )


# numba refuses to cache this wrapper (it flags a dynamic global); it compiles
# in about a second on first use.
@numba.njit
def _search_hetero(x0, step, data, xatol, fatol, max_evals, sim, val, work):
    return _nelder_mead_jit(hetero_log_integrand, x0, step, data, xatol, fatol, max_evals, sim, val, work)


def _generalized_basis(S1: np.ndarray, S2: np.ndarray):
    """Eigenvalues e in [0, 1] and T with T'(S1+S2)T = I, T'S1T = diag(e)."""
    e, T = eigh(S1, S1 + S2)
    return np.clip(e, 0.0, 1.0), T


def hetero_kernel_data(dm: DesignMatrices, y: np.ndarray, b: float) -> tuple:
    # beta has a flat prior, so replacing y by its least-squares residual is exact and better conditioned
    coef, *_ = np.linalg.lstsq(dm.X, y, rcond=None)
    y = y - dm.X @ coef
    g1 = dm.group == 1
    X1, X2, y1, y2 = dm.X[g1], dm.X[~g1], y[g1], y[~g1]
    S1, S2 = X1.T @ X1, X2.T @ X2
    e, T = _generalized_basis(S1, S2)
    _, logdet_xx = np.linalg.slogdet(S1 + S2)
    scal = np.array([b, dm.N, dm.P, g1.sum(), (~g1).sum(), y1 @ y1, y2 @ y2, logdet_xx], dtype=float)
    return (scal, e, T.T @ (X1.T @ y1), T.T @ (X2.T @ y2))


def _start_points(dm: DesignMatrices, y: np.ndarray) -> list[np.ndarray]:
    coef, *_ = np.linalg.lstsq(dm.X, y, rcond=None)
    r = y - dm.X @ coef
    g1 = dm.group == 1
    tiny = 1e-300
    per_group = np.log([max(r[g1] @ r[g1] / g1.sum(), tiny), max(r[~g1] @ r[~g1] / (~g1).sum(), tiny)])
    pooled = math.log(max(r @ r / max(dm.N - dm.P, 1), tiny))
    return [per_group, np.array([pooled, pooled])]


def hetero_log_marginal(dm: DesignMatrices, y: np.ndarray, b: float):
    """Laplace approximation of log m_b(Y); returns (value, LaplaceState)."""
    data = hetero_kernel_data(dm, y, b)
    starts = _start_points(dm, y)
    err = None
    for x0 in starts:
        try:
            state = laplace(hetero_log_integrand, x0, data=data, step=np.array([0.5, 0.5]),
                            jacobian_log=lambda lam: -lam.sum(), search=_search_hetero)
            return laplace_log_integral(state), state
        except ConvergenceError as exc:
            err = exc
    raise err


def logq_flat_hetero_laplace(dm: DesignMatrices, y: np.ndarray | None, cfg: FractionalConfig) -> float:
    """Two-dimensional Laplace over (log sigma1^2, log sigma2^2), full over fractional."""
    if dm.group is None:
        raise ContractViolation("heteroscedastic marginal needs a grouping scheme")
    y = dm.y if y is None else np.asarray(y, dtype=float)
    if dm.N * cfg.b <= dm.P:
        raise InsufficientDataError(f"N*b = {dm.N * cfg.b:g} must exceed P = {dm.P}")
    full, _ = hetero_log_marginal(dm, y, 1.0)
    frac, _ = hetero_log_marginal(dm, y, cfg.b)
    return full - frac
