"""Fractional marginal likelihoods under the Zellner-Siow mixture g-prior.

Model: Y = 1 alpha + X beta + e with p(alpha) ∝ 1, beta | Phi, g ~
N(0, g (X'Phi X)^-1) on the centered non-intercept columns X, g ~
IG(1/2, N/2), and 1/phi priors on the precision(s).

Throughout this module ``p`` is the number of non-intercept columns (the
dimension of beta), i.e. one less than the design's column count.

Homoscedastic models integrate alpha, beta and phi analytically and leave a
one-dimensional integral over g.  Heteroscedastic models leave (lambda1,
lambda2, g) with lambda_i = log sigma_i^2.  Both are handled by Laplace
approximations in u = log g rather than g: the posterior of g does not
concentrate as N grows, and a Gaussian in g leaves an error of order one
(about 0.7 in log for a single effect) that does not shrink with N.  In
u the mode still solves a cubic, with slightly different coefficients.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .design import DesignMatrices, SufficientStats
from .errors import ApproximationError, ContractViolation, InsufficientDataError
from .laplace import ConvergenceError, _nelder_mead_jit, laplace, laplace_log_integral
from .marginal_flat import FractionalConfig, _generalized_basis

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2 * math.pi)


def log_g_prior(g, N):
    """log density of IG(1/2, N/2)."""
    g = np.asarray(g, dtype=float)
    return 0.5 * math.log(N / 2) - 0.5 * LOG_PI - 1.5 * np.log(g) - N / (2 * g)


def _g_kernel(g, N, b, p, Q):
    """g-dependent part of log p^b(Y, g): likelihood factor plus IG(1/2, N/2) kernel."""
    g = np.asarray(g, dtype=float)
    return (
        0.5 * (N * b - p - 1) * np.log1p(b * g)
        - 0.5 * (N * b - 1) * np.log1p(b * Q * g)
        - 1.5 * np.log(g)
        - N / (2 * g)
    )


def log_g_integrand(g, N, b, p, r_squared, sst):
    """log p^b(Y, g | m) with alpha, beta, phi integrated out."""
    Q = 1.0 - r_squared
    const = (
        gammaln(0.5 * (N * b - 1))
        - 0.5 * (N * b - 1) * LOG_PI
        - 0.5 * math.log(N)
        - 0.5 * N * b * math.log(b)
        - 0.5 * (N * b - 1) * math.log(sst)
        + 0.5 * math.log(N / 2)
        - 0.5 * LOG_PI
    )
    return const + _g_kernel(g, N, b, p, Q)


def log_u_integrand(g, N, b, p, r_squared, sst):
    """log of p^b(Y, g | m) * g, the integrand over u = log g evaluated at g = e^u."""
    g = np.asarray(g, dtype=float)
    return log_g_integrand(g, N, b, p, r_squared, sst) + np.log(g)


def _u_kernel(g, N, b, p, Q):
    return _g_kernel(g, N, b, p, Q) + np.log(np.asarray(g, dtype=float))


def g_mode_cubic(N, b, p, r_squared) -> np.ndarray:
    """Coefficients (highest power first) of the stationarity cubic of the u-integrand.

    Setting d/du of :func:`log_u_integrand` to zero and clearing the
    denominators 2 g (1 + b g)(1 + b Q g) leaves
    -b^2 Q (p+1) g^3 + b (N b - p - 2) g^2 + (N b (2 - R^2) - 1) g + N = 0.
    """
    Q = 1.0 - r_squared
    return np.array(
        [
            -Q * b * b * (p + 1),
            b * (N * b - p - 2),
            N * b * (2 - r_squared) - 1,
            float(N),
        ]
    )


def _polish(coef, g):
    d1 = np.polyder(coef)
    for _ in range(20):
        fd = np.polyval(d1, g)
        if fd == 0:
            break
        step = np.polyval(coef, g) / fd
        if not math.isfinite(step):
            break
        g_new = g - step
        if g_new <= 0:
            break
        if abs(g_new - g) <= 1e-15 * abs(g):
            g = g_new
            break
        g = g_new
    return g


def solve_g_mode(N, b, p, r_squared) -> float:
    """Value of g at the mode of the u-integrand; ``p`` is the non-intercept column count.

    Positive real roots of the cubic are polished by Newton steps and the one
    with the largest log-integrand wins.  Without a positive root, falls back
    to a log-spaced grid search refined by a bounded scalar search.
    """
    if not 0 < b <= 1:
        raise ContractViolation("b must lie in (0, 1]")
    if not 0 <= r_squared < 1:
        raise ContractViolation("R^2 must lie in [0, 1)")
    if N * b <= 1:
        raise InsufficientDataError("N*b must exceed 1")
    Q = 1.0 - r_squared
    coef = g_mode_cubic(N, b, p, r_squared)
    roots = np.roots(coef)
    cands = [
        _polish(coef, float(r.real))
        for r in roots
        if abs(r.imag) <= 1e-8 * max(1.0, abs(r)) and r.real > 0
    ]
    cands = [g for g in cands if g > 0 and math.isfinite(g)]
    if cands:
        vals = _u_kernel(np.array(cands), N, b, p, Q)
        return float(cands[int(np.argmax(vals))])
    grid = np.logspace(-8, 8, 801) * N
    vals = _u_kernel(grid, N, b, p, Q)
    i = int(np.argmax(vals))
    if i in (0, grid.size - 1):
        raise ApproximationError("no interior mode of the g integrand", {"N": N, "b": b, "p": p, "r2": r_squared})
    res = minimize_scalar(
        lambda u: -_u_kernel(math.exp(u), N, b, p, Q),
        bounds=(math.log(grid[i - 1]), math.log(grid[i + 1])),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return math.exp(res.x)


def g_log_hessian(g, N, b, p, r_squared) -> float:
    """Second derivative in u = log g of the log u-integrand, at any g > 0."""
    Q = 1.0 - r_squared
    d1 = 0.5 * (
        (N * b - p - 1) * b / (1 + b * g)
        - (N * b - 1) * b * Q / (1 + b * Q * g)
        - 3 / g
        + N / g**2
    )
    d2 = 0.5 * (
        (N * b - 1) * b * b * Q * Q / (1 + Q * b * g) ** 2
        - (N * b - p - 1) * b * b / (1 + b * g) ** 2
        + 3 / g**2
        - 2 * N / g**3
    )
    return g * d1 + g * g * d2


def g_homo_log_marginal(N, b, p, r_squared, sst) -> float:
    """One-dimensional Laplace approximation of log m_b(Y) under the g-prior."""
    g = solve_g_mode(N, b, p, r_squared)
    H = g_log_hessian(g, N, b, p, r_squared)
    if not H < 0:
        raise ApproximationError("g integrand is not log-concave at its mode", {"g_mode": g, "hessian": H})
    return float(log_u_integrand(g, N, b, p, r_squared, sst)) + 0.5 * LOG_2PI - 0.5 * math.log(-H)


def logq_gprior_homoscedastic(stats: SufficientStats, cfg: FractionalConfig) -> float:
    N, b, p = stats.N, cfg.b, stats.P - 1
    if N * b <= 1:
        raise InsufficientDataError(f"N*b = {N * b:g} must exceed 1")
    r2 = stats.r_squared
    return g_homo_log_marginal(N, 1.0, p, r2, stats.sst) - g_homo_log_marginal(N, b, p, r2, stats.sst)


@numba.njit(cache=True)
def hetero_g_log_integrand(x, data):
    """log p^b(Y, lambda1, lambda2, u) with alpha and beta integrated out.

    x = (log sigma1^2, log sigma2^2, log g); Jacobians of all three log maps
    included.  ``data`` comes from :func:`hetero_g_kernel_data`.
    """
    b, N, p, n1, n2, v1, v2, s1, s2 = data[0]
    e, C1, C2, U1, U2 = data[1], data[2], data[3], data[4], data[5]
    if x[2] > 700.0 or x[2] < -700.0:
        return -np.inf
    g = math.exp(x[2])
    phi1 = math.exp(-x[0])
    phi2 = math.exp(-x[1])
    w = n1 * phi1 + n2 * phi2
    s = phi1 * s1 + phi2 * s2
    ymy = phi1 * v1 + phi2 * v2 - s * s / w
    k = b + 1.0 / g
    a = 0.0
    cu = 0.0
    uu = 0.0
    for j in range(e.size):
        E = k * (phi1 * e[j] + phi2 * (1.0 - e[j]))
        c = phi1 * C1[j] + phi2 * C2[j]
        u = phi1 * U1[j] + phi2 * U2[j] - c * s / w
        a += c * c / E
        cu += c * u / E
        uu += u * u / E
    denom = 1.0 - (b / w) * a
    if not denom > 0.0:
        return -np.inf
    quad = uu + (b / w) * cu * cu / denom
    return (
        -0.5 * (N * b - 1) * 1.8378770664093453
        - 0.5 * math.log(b)
        + 0.5 * b * (n1 * (-x[0]) + n2 * (-x[1]))
        - 0.5 * math.log(w)
        - 0.5 * p * math.log(g)
        - 0.5 * (p * math.log(k) + math.log(denom))
        - 0.5 * b * (ymy - b * quad)
        + 0.5 * math.log(N / 2) - 0.5 * 1.1447298858494002 - 0.5 * x[2] - N / (2 * g)
    )


# numba refuses to cache this wrapper (it flags a dynamic global); it compiles
# in about a second on first use.
@numba.njit
def _search_hetero_g(x0, step, data, xatol, fatol, max_evals, sim, val, work):
    return _nelder_mead_jit(hetero_g_log_integrand, x0, step, data, xatol, fatol, max_evals, sim, val, work)


def centered_predictors(dm: DesignMatrices) -> np.ndarray:
    """Non-intercept columns of the design, centered at their unweighted means."""
    X = np.delete(dm.X, dm.column_blocks["intercept"], axis=1)
    return X - X.mean(axis=0)


def hetero_g_kernel_data(dm: DesignMatrices, y: np.ndarray, b: float) -> tuple:
    X = centered_predictors(dm)
    # the intercept has a flat prior, so shifting y is exact and avoids cancellation in the sums of squares
    y = y - y.mean()
    g1 = dm.group == 1
    X1, X2, y1, y2 = X[g1], X[~g1], y[g1], y[~g1]
    e, T = _generalized_basis(X1.T @ X1, X2.T @ X2)
    scal = np.array(
        [b, dm.N, X.shape[1], g1.sum(), (~g1).sum(), y1 @ y1, y2 @ y2, y1.sum(), y2.sum()], dtype=float
    )
    return (
        scal,
        e,
        T.T @ X1.sum(axis=0),
        T.T @ X2.sum(axis=0),
        T.T @ (X1.T @ y1),
        T.T @ (X2.T @ y2),
    )


def _hetero_start(dm: DesignMatrices, y: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(dm.X, y, rcond=None)
    r = y - dm.X @ coef
    g1 = dm.group == 1
    tiny = 1e-300
    return np.array(
        [
            math.log(max(r[g1] @ r[g1] / g1.sum(), tiny)),
            math.log(max(r[~g1] @ r[~g1] / (~g1).sum(), tiny)),
            math.log(dm.N),
        ]
    )


def _jac(x):
    """log |d(phi1, phi2, g) / d(lambda1, lambda2, u)|, reported separately by the Laplace state."""
    return -x[0] - x[1] + x[2]


def hetero_g_log_marginal(dm: DesignMatrices, y: np.ndarray, b: float, data: tuple | None = None,
                          x0: np.ndarray | None = None):
    """Laplace approximation of log m_b(Y); returns (value, LaplaceState).

    ``data`` and ``x0`` may be passed in to reuse kernel data across fractions;
    ``data[0][0]`` is overwritten with ``b``.
    """
    data = hetero_g_kernel_data(dm, y, b) if data is None else data
    data[0][0] = b
    x0 = _hetero_start(dm, y) if x0 is None else x0
    step = np.array([0.5, 0.5, 0.5])
    try:
        state = laplace(hetero_g_log_integrand, x0, data=data, step=step, jacobian_log=_jac, search=_search_hetero_g)
    except ConvergenceError:
        pooled = np.full(2, math.log(max(np.var(y), 1e-300)))
        state = laplace(hetero_g_log_integrand, np.array([*pooled, x0[2]]), data=data, step=step,
                        jacobian_log=_jac, search=_search_hetero_g)
    return laplace_log_integral(state), state


def logq_gprior_hetero(dm: DesignMatrices, y: np.ndarray | None, cfg: FractionalConfig) -> float:
    if dm.group is None:
        raise ContractViolation("heteroscedastic marginal needs a grouping scheme")
    y = dm.y if y is None else np.asarray(y, dtype=float)
    if dm.N * cfg.b <= 1:
        raise InsufficientDataError(f"N*b = {dm.N * cfg.b:g} must exceed 1")
    data = hetero_g_kernel_data(dm, y, 1.0)
    x0 = _hetero_start(dm, y)
    full, _ = hetero_g_log_marginal(dm, y, 1.0, data, x0)
    frac, _ = hetero_g_log_marginal(dm, y, cfg.b, data, x0)
    return full - frac


def cauchy_prior_density(beta, scale_matrix) -> float:
    """Multivariate Cauchy density with location 0 and precision-type matrix ``scale_matrix``.

    ``scale_matrix`` is X'Phi X / N, the inverse of the Cauchy scale; this is
    the marginal of beta under the mixture g-prior.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    S = np.atleast_2d(np.asarray(scale_matrix, dtype=float))
    P = beta.size
    if S.shape != (P, P):
        raise ContractViolation("scale matrix shape does not match beta")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ContractViolation("scale matrix is not positive definite") from None
    half_logdet = np.sum(np.log(np.diag(L)))
    q = float(beta @ S @ beta)
    return math.exp(
        -0.5 * (P + 1) * LOG_PI + gammaln(0.5 * (P + 1)) + half_logdet - 0.5 * (P + 1) * math.log1p(q)
    )
