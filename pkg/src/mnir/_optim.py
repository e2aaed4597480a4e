"""Projected Newton ascent for smooth concave objectives on a box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BoxNewtonResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    grad_norm: float


def newton_direction(neg_h, g):
    try:
        chol = np.linalg.cholesky(neg_h)
        return np.linalg.solve(chol.T, np.linalg.solve(chol, g))
    except np.linalg.LinAlgError:
        d, *_ = np.linalg.lstsq(neg_h, g, rcond=None)
        if g @ d <= 0:
            d = g / max(np.abs(np.diag(neg_h)).max(), 1.0)
        return d


def box_newton(objective, derivs, x0, bound, tol, max_iter) -> BoxNewtonResult:
    """Maximise ``objective`` subject to ``|x_k| <= bound``.

    ``derivs(x)`` returns ``(gradient, negative Hessian)``. Coordinates on the
    box whose gradient points outward are frozen for the step; convergence is
    a free-gradient max-norm below ``tol``. Steps are halved until the
    objective does not decrease.
    """
    x = np.clip(np.asarray(x0, dtype=float), -bound, bound)
    val = objective(x)
    it = 0
    while True:
        g, neg_h = derivs(x)
        blocked = ((x <= -bound) & (g < 0)) | ((x >= bound) & (g > 0))
        free = ~blocked
        gnorm = float(np.abs(g[free]).max()) if free.any() else 0.0
        if gnorm < tol:
            return BoxNewtonResult(x, val, True, it, gnorm)
        if it >= max_iter:
            return BoxNewtonResult(x, val, False, it, gnorm)
        it += 1
        d = np.zeros_like(x)
        d[free] = newton_direction(neg_h[np.ix_(free, free)], g[free])
        slack = 1e-12 * (1.0 + abs(val))
        step = 1.0
        for _ in range(60):
            trial = np.clip(x + step * d, -bound, bound)
            trial_val = objective(trial)
            if trial_val >= val - slack:
                break
            step *= 0.5
        else:
            return BoxNewtonResult(x, val, False, it, gnorm)
        if np.array_equal(trial, x):
            return BoxNewtonResult(x, val, False, it, gnorm)
        x, val = trial, trial_val
