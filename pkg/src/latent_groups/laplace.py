"""Laplace approximation of low-dimensional integrals of positive densities.

The integrands used elsewhere in the package are smooth and cheap, so the
mode is located with a derivative-free Nelder-Mead simplex and curvature
comes from central finite differences.  The simplex routine is written once
and compiled twice: as plain Python for arbitrary callables and with numba
for the jitted log-integrands of the marginal modules, whose signature is
``f(x, data) -> float`` with ``data`` a tuple of arrays and scalars.

Calling ``_nelder_mead_jit`` from Python with a compiled integrand as an
argument recompiles it on every process start.  Each marginal module
therefore wraps it around its integrand in a small compiled function and
hands that wrapper to :func:`laplace` as ``search``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ApproximationError, ConvergenceError

MAX_EVALS = 10_000
XATOL = 1e-10
FATOL = 1e-10


@dataclass(frozen=True)
class LaplaceState:
    mode: np.ndarray
    hessian: np.ndarray
    log_value_at_mode: float
    jacobian_log: float = 0.0
    n_evals: int = 0

    @property
    def dim(self) -> int:
        return self.mode.size


def _nelder_mead(f, x0, step, data, xatol, fatol, max_evals, sim, val, work):
    """Maximize f by minimizing -f with the standard simplex moves.

    Allocation-free so the compiled version stays cacheable: ``sim`` is a
    (d+1, d) array, ``val`` has d+1 entries and ``work`` is (4, d) scratch
    for the centroid and trial points.  On return ``sim[0]`` holds the best
    vertex.  Returns (f(best), evaluations, converged).
    """
    d = x0.size
    cen, xr, xe, xc = work[0], work[1], work[2], work[3]
    for i in range(d + 1):
        for j in range(d):
            sim[i, j] = x0[j]
        if i > 0:
            sim[i, i - 1] += step[i - 1]
        v = -f(sim[i], data)
        val[i] = v if v == v else np.inf
    nev = d + 1
    converged = False
    while True:
        # insertion sort of vertices by value; d is tiny
        for i in range(1, d + 1):
            k = i
            while k > 0 and val[k] < val[k - 1]:
                val[k], val[k - 1] = val[k - 1], val[k]
                for j in range(d):
                    sim[k, j], sim[k - 1, j] = sim[k - 1, j], sim[k, j]
                k -= 1
        xspread = 0.0
        fspread = 0.0
        for i in range(1, d + 1):
            fspread = max(fspread, abs(val[i] - val[0]))
            for j in range(d):
                xspread = max(xspread, abs(sim[i, j] - sim[0, j]))
        if xspread <= xatol and fspread <= fatol:
            converged = True
            break
        if nev >= max_evals:
            break
        for j in range(d):
            c = 0.0
            for i in range(d):
                c += sim[i, j]
            cen[j] = c / d
            xr[j] = 2.0 * cen[j] - sim[d, j]
        fr = -f(xr, data)
        if fr != fr:
            fr = np.inf
        nev += 1
        if fr < val[0]:
            for j in range(d):
                xe[j] = 3.0 * cen[j] - 2.0 * sim[d, j]
            fe = -f(xe, data)
            if fe != fe:
                fe = np.inf
            nev += 1
            if fe < fr:
                for j in range(d):
                    sim[d, j] = xe[j]
                val[d] = fe
            else:
                for j in range(d):
                    sim[d, j] = xr[j]
                val[d] = fr
        elif fr < val[d - 1]:
            for j in range(d):
                sim[d, j] = xr[j]
            val[d] = fr
        else:
            if fr < val[d]:
                for j in range(d):
                    xc[j] = 1.5 * cen[j] - 0.5 * sim[d, j]
            else:
                for j in range(d):
                    xc[j] = 0.5 * cen[j] + 0.5 * sim[d, j]
            fc = -f(xc, data)
            if fc != fc:
                fc = np.inf
            nev += 1
            if fc < min(fr, val[d]):
                for j in range(d):
                    sim[d, j] = xc[j]
                val[d] = fc
            else:
                for i in range(1, d + 1):
                    for j in range(d):
                        sim[i, j] = sim[0, j] + 0.5 * (sim[i, j] - sim[0, j])
                    v = -f(sim[i], data)
                    val[i] = v if v == v else np.inf
                nev += d
    return -val[0], nev, converged


# Not cached: its type signature includes the integrand, so every process
# would append a fresh cache entry without ever reusing one.
_nelder_mead_jit = numba.njit(_nelder_mead)


def _is_jitted(f) -> bool:
    return isinstance(f, numba.core.registry.CPUDispatcher)


def _call(f, x, data):
    return f(x, data) if data is not None or _is_jitted(f) else f(x)


def fd_gradient(f, x, data=None, rel_step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (_call(f, x + e, data) - _call(f, x - e, data)) / (2 * h)
    return g


def maximize_log_density(
    f, x0, data=None, step=None, max_evals: int = MAX_EVALS, restarts: int = 1, search=None
):
    """Locate a stationary maximum of ``f``.

    ``f`` is called as ``f(x)``, or ``f(x, data)`` when ``data`` is given or
    ``f`` is a numba-compiled function.  Convergence is accepted once the
    central-difference gradient norm is at most ``1e-6 * (1 + |f(mode)|)``
    (after a short Newton polish of the simplex result); otherwise the search restarts from the best
    point found with a tenth of the step, ``restarts`` times.

    ``search``, when given, replaces the built-in simplex call; it takes the
    arguments of ``_nelder_mead`` minus ``f`` and must run it on ``f``.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    if not math.isfinite(_call(f, x, data)):
        raise ApproximationError("log-density is not finite at the starting point", {"x0": x})
    step = np.full(x.size, 0.5) if step is None else np.asarray(step, dtype=float).reshape(-1)
    total = 0
    for attempt in range(restarts + 1):
        d = x.size
        sim, val, work = np.empty((d + 1, d)), np.empty(d + 1), np.empty((4, d))
        budget = max_evals - total
        if search is not None:
            fx, nev, ok = search(x, step, data, XATOL, FATOL, budget, sim, val, work)
        elif _is_jitted(f):
            fx, nev, ok = _nelder_mead_jit(f, x, step, data, XATOL, FATOL, budget, sim, val, work)
        else:
            wrapped = f if data is not None else (lambda z, _d: f(z))
            fx, nev, ok = _nelder_mead(wrapped, x, step, data, XATOL, FATOL, budget, sim, val, work)
        x = sim[0].copy()
        total += nev
        x, fx = _newton_polish(f, x, _call(f, x, data), data)
        if _stationary(f, x, fx, data):
            return x
        if total >= max_evals:
            break
        step = step * 0.1
    raise ConvergenceError(
        "simplex search did not reach a stationary point",
        {"mode": x, "log_value": fx, "evaluations": total, "gradient": fd_gradient(f, x, data)},
    )


def _stationary(f, x, fx, data) -> bool:
    return bool(np.linalg.norm(fd_gradient(f, x, data)) <= 1e-6 * (1.0 + abs(fx)))


def _newton_polish(f, x, fx, data, iters: int = 8):
    """Damped Newton steps on finite-difference derivatives.

    The simplex gets close to the mode but crawls along flat ridges; a few
    Newton steps finish the job.  Near the mode the remaining rise in ``f``
    can be below its rounding noise, so a step is also kept when ``f`` is
    unchanged to that level and the gradient shrinks.
    """
    grad = fd_gradient(f, x, data)
    gnorm = np.linalg.norm(grad)
    for _ in range(iters):
        if gnorm <= 1e-9 * (1.0 + abs(fx)):
            break
        try:
            step = np.linalg.solve(finite_diff_hessian(f, x, data), -grad)
        except (ApproximationError, np.linalg.LinAlgError):
            break
        if not np.all(np.isfinite(step)) or grad @ step <= 0:
            break
        noise = 1e-10 * (1.0 + abs(fx))
        t = 1.0
        while t > 1e-4:
            xn = x + t * step
            fn = _call(f, xn, data)
            if math.isfinite(fn) and fn >= fx - noise:
                gn = fd_gradient(f, xn, data)
                if fn > fx + noise or np.linalg.norm(gn) < gnorm:
                    x, fx, grad, gnorm = xn, fn, gn, np.linalg.norm(gn)
                    break
            t *= 0.5
        else:
            break
    return x, fx


def finite_diff_hessian(f, x, data=None, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian, step ``rel_step * max(1, |x_j|)`` per coordinate."""
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    f0 = _call(f, x, data)
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        fp, fm = _call(f, x + ei, data), _call(f, x - ei, data)
        H[i, i] = (fp - 2 * f0 + fm) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = (
                _call(f, x + ei + ej, data)
                - _call(f, x + ei - ej, data)
                - _call(f, x - ei + ej, data)
                + _call(f, x - ei - ej, data)
            ) / (4 * h[i] * h[j])
            H[j, i] = H[i, j]
    if not np.all(np.isfinite(H)) or not math.isfinite(f0):
        raise ApproximationError("log-density not finite near the mode", {"mode": x})
    return 0.5 * (H + H.T)


def laplace_log_integral(state: LaplaceState) -> float:
    """log of (2 pi)^(d/2) |-H|^(-1/2) f(mode)."""
    try:
        chol = np.linalg.cholesky(-state.hessian)
    except np.linalg.LinAlgError:
        raise ApproximationError(
            "Hessian is not negative definite at the mode",
            {"mode": state.mode, "hessian": state.hessian},
        ) from None
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * state.dim * math.log(2 * math.pi) - 0.5 * logdet + state.log_value_at_mode + state.jacobian_log


def laplace(f, x0, data=None, step=None, jacobian_log=None, search=None) -> LaplaceState:
    """Mode, Hessian and value of ``f`` ready for :func:`laplace_log_integral`.

    ``f`` must already include any change-of-variables Jacobian;
    ``jacobian_log(mode)`` only splits that term out for reporting.
    """
    mode = maximize_log_density(f, x0, data=data, step=step, search=search)
    H = finite_diff_hessian(f, mode, data)
    value = float(_call(f, mode, data))
    jac = float(jacobian_log(mode)) if jacobian_log is not None else 0.0
    return LaplaceState(mode=mode, hessian=H, log_value_at_mode=value - jac, jacobian_log=jac)
