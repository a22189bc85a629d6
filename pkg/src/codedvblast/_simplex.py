"""Euclidean projection onto a scaled simplex and a projected-gradient minimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def project_simplex(v, total: float, lower: float = 0.0) -> np.ndarray:
    """Project ``v`` onto ``{x : x_i >= lower, sum(x) = total}``."""
    v = np.asarray(v, dtype=float)
    budget = total - lower * v.size
    if budget < 0:
        raise ValueError("lower bound infeasible for the requested total")
    # the projection is unchanged by a common shift; centring on the maximum
    # keeps the largest entry exact when |v| dwarfs the budget
    y = v - v.max()
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - budget
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return lower + np.maximum(y - theta, 0.0)


@dataclass
class PGResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    residual: float
    converged: bool


def projected_gradient(fun_grad, x0, project, tol: float = 1e-9, max_iter: int = 10_000,
                       armijo: float = 1e-4) -> PGResult:
    """Spectral projected gradient with monotone Armijo backtracking.

    ``fun_grad(x)`` returns ``(f, g)``; ``project(x)`` maps onto the feasible
    set.  Stops when ``max|x - project(x - g)| < tol``.
    """
    x = project(np.asarray(x0, dtype=float))
    f, g = fun_grad(x)

    def residual(x, g):
        return float(np.max(np.abs(project(x - g) - x)))

    res = residual(x, g)
    step = 1.0 / max(res, 1e-12)
    step = min(step, 1.0)
    it = 0
    while res >= tol and it < max_iter:
        it += 1
        d = project(x - step * g) - x
        slope = float(g @ d)
        # near the optimum the decrease drops below rounding of f; accept
        # steps that do not increase f beyond that noise floor
        noise = 8 * np.finfo(float).eps * (1.0 + abs(f))
        if slope >= 0:
            step = 1.0
            d = project(x - g) - x
            slope = float(g @ d)
            if slope > noise:
                break
        lam = 1.0
        for _ in range(60):
            x_new = x + lam * d
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + armijo * lam * slope + noise:
                break
            lam *= 0.5
        else:
            break
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 0 else 1e6
        step = min(max(step, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
        res = residual(x, g)
    return PGResult(x, float(f), g, it, res, res < tol)
