"""
Collapsed multinomial inverse regression for a binary response.

All counts sharing a response level are pooled into one multinomial draw
with probabilities ``q(y) = softmax(alpha + phi * y)``. Parameters are
identified by pinning ``alpha = phi = 0`` at a baseline word; fitting and
information calculations happen in the remaining ``p - 1`` coordinates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax

from ._optim import box_newton
from .corpus import CollapsedCounts, FreqMatrix
from .errors import DegenerateDataError, InputError

__all__ = [
    "MnirFit",
    "FisherInfo",
    "multinomial_probs",
    "collapsed_loglik",
    "collapsed_score",
    "fisher_information",
    "closed_form_mle",
    "default_baseline",
    "fit_collapsed_mnir",
    "project",
]

DEFAULT_BOUND = 30.0
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100


def multinomial_probs(alpha, phi, y) -> np.ndarray:
    """Softmax of ``alpha + phi * y``, max-shifted for overflow safety."""
    alpha = np.asarray(alpha, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if alpha.ndim != 1 or alpha.shape != phi.shape or alpha.size < 2:
        raise InputError("alpha and phi must be vectors of equal length >= 2")
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(phi)) and np.isfinite(y)):
        raise InputError("non-finite input to multinomial_probs")
    eta = alpha + phi * float(y)
    e = np.exp(eta - eta.max())
    return e / e.sum()


def collapsed_loglik(alpha, phi, counts: CollapsedCounts) -> float:
    """``sum_j c0_j log q_j(0) + c1_j log q_j(1)`` (multinomial constants dropped)."""
    alpha = np.asarray(alpha, dtype=float)
    phi = np.asarray(phi, dtype=float)
    lq0 = log_softmax(alpha)
    lq1 = log_softmax(alpha + phi)
    # 0 * log(0) contributes nothing
    ll = np.where(counts.c0 > 0, counts.c0 * lq0, 0.0).sum()
    ll += np.where(counts.c1 > 0, counts.c1 * lq1, 0.0).sum()
    return float(ll)


def collapsed_score(alpha, phi, counts: CollapsedCounts):
    """Gradient of :func:`collapsed_loglik` in full coordinates, as ``(d_alpha, d_phi)``."""
    q0 = multinomial_probs(alpha, np.zeros_like(alpha), 0.0)
    q1 = multinomial_probs(alpha, phi, 1.0)
    r0 = counts.c0 - counts.C0 * q0
    r1 = counts.c1 - counts.C1 * q1
    return r0 + r1, r1


def _w(q):
    return np.diag(q) - np.outer(q, q)


@dataclass(frozen=True)
class FisherInfo:
    """Expected per-word information ``pi * (diag(q1) - q1 q1')`` for the loadings."""

    q1: np.ndarray
    pi: float
    baseline: int
    reduced_matrix: np.ndarray = field(repr=False)

    def full_matrix(self) -> np.ndarray:
        return self.pi * _w(self.q1)

    def reduced_index(self) -> np.ndarray:
        return np.delete(np.arange(self.q1.size), self.baseline)

    def covariance(self) -> np.ndarray:
        """Inverse of the reduced information: the limiting covariance of
        ``sqrt(M) * (phi_hat - phi)`` when the intercepts are known."""
        return np.linalg.inv(self.reduced_matrix)


def fisher_information(q1, pi, baseline=0) -> FisherInfo:
    q1 = np.asarray(q1, dtype=float)
    if q1.ndim != 1 or q1.size < 2:
        raise InputError("q1 must be a probability vector of length >= 2")
    if np.any(q1 < 0) or abs(q1.sum() - 1.0) > 1e-10:
        raise InputError("q1 must be a probability vector")
    if not 0 < pi <= 1:
        raise InputError("pi must lie in (0, 1]")
    if not 0 <= baseline < q1.size:
        raise InputError("baseline index out of range")
    keep = np.delete(np.arange(q1.size), baseline)
    if np.any(q1[keep] == 0):
        j = int(keep[np.flatnonzero(q1[keep] == 0)[0]])
        raise DegenerateDataError(
            f"q1[{j}] = 0: loading for word {j} is not identified (reduced information singular)"
        )
    if q1[baseline] == 0:
        # the remaining entries then sum to one and the reduced block is singular
        raise DegenerateDataError(f"q1[{baseline}] = 0 at the baseline word: choose another baseline")
    reduced = pi * _w(q1)[np.ix_(keep, keep)]
    return FisherInfo(q1=q1, pi=float(pi), baseline=int(baseline), reduced_matrix=reduced)


def default_baseline(counts: CollapsedCounts) -> int:
    """The most frequent word; ties go to the lowest index."""
    return int(np.argmax(counts.c0 + counts.c1))


def closed_form_mle(counts: CollapsedCounts, baseline: int):
    """Saturated two-multinomial MLE ``q_y = c_y / C_y`` mapped to (alpha, phi).

    Only defined when every group-word count is positive.
    """
    c0 = counts.c0.astype(float)
    c1 = counts.c1.astype(float)
    if np.any(c0 <= 0) or np.any(c1 <= 0):
        raise DegenerateDataError("closed form needs every group-word count positive")
    alpha = np.log(c0) - np.log(c0[baseline])
    phi = np.log(c1) - np.log(c1[baseline]) - alpha
    return alpha, phi


@dataclass(frozen=True)
class MnirFit:
    """Fitted collapsed model. ``clamped`` lists words whose alpha or phi
    sits on the ``[-bound, bound]`` box."""

    alpha: np.ndarray
    phi: np.ndarray
    baseline: int
    bound: float
    q0: np.ndarray
    q1: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    grad_norm: float = 0.0
    clamped: tuple = ()

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "bound": self.bound,
            "alpha": self.alpha.tolist(),
            "phi": self.phi.tolist(),
            "q0": self.q0.tolist(),
            "q1": self.q1.tolist(),
            "loglik": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "clamped": list(self.clamped),
        }

    @classmethod
    def from_dict(cls, d) -> "MnirFit":
        return cls(
            alpha=np.asarray(d["alpha"], dtype=float),
            phi=np.asarray(d["phi"], dtype=float),
            baseline=int(d["baseline"]),
            bound=float(d["bound"]),
            q0=np.asarray(d["q0"], dtype=float),
            q1=np.asarray(d["q1"], dtype=float),
            log_likelihood=float(d["loglik"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            grad_norm=float(d.get("grad_norm", 0.0)),
            clamped=tuple(d.get("clamped", ())),
        )


def _reduced_derivs(alpha, phi, counts, keep):
    q0 = multinomial_probs(alpha, np.zeros_like(alpha), 0.0)
    q1 = multinomial_probs(alpha, phi, 1.0)
    r1 = counts.c1 - counts.C1 * q1
    ga = (counts.c0 - counts.C0 * q0 + r1)[keep]
    gf = r1[keep]
    h1 = counts.C1 * _w(q1)[np.ix_(keep, keep)]
    h0 = counts.C0 * _w(q0)[np.ix_(keep, keep)]
    # negative Hessian of the log-likelihood in (alpha, phi) order
    neg_h = np.block([[h0 + h1, h1], [h1, h1]])
    return np.concatenate([ga, gf]), neg_h


def fit_collapsed_mnir(counts: CollapsedCounts, baseline=None, bound=DEFAULT_BOUND,
                       tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, init="auto") -> MnirFit:
    """Maximum-likelihood fit of the collapsed model.

    Damped projected Newton on the ``2(p - 1)`` free coordinates inside the
    box ``|alpha_j|, |phi_j| <= bound``. Coordinates pinned at the box with
    the gradient pushing outward are held fixed; convergence means the
    remaining gradient has max-norm below ``tol``.

    Parameters
    ----------
    counts : CollapsedCounts
    baseline : int, optional
        Word with ``alpha = phi = 0``. Defaults to the most frequent word.
    bound : float
        Box half-width on every alpha and phi.
    tol : float
        Gradient max-norm tolerance, in count units.
    max_iter : int
    init : {"auto", "closed_form", "zero"}
        ``"auto"`` starts from the closed-form saturated MLE when every
        group-word count is positive, else from zero.

    Returns
    -------
    MnirFit
        On non-convergence the best iterate, with ``converged=False``.
    """
    p = counts.vocab_size
    if p < 2:
        raise InputError("need at least two words")
    if counts.C0 == 0 or counts.C1 == 0:
        raise DegenerateDataError("both response groups must contain words")
    unseen = np.flatnonzero(counts.c0 + counts.c1 == 0)
    if unseen.size:
        raise DegenerateDataError(
            f"word {int(unseen[0])} never occurs in either group; drop it before fitting"
        )
    if baseline is None:
        baseline = default_baseline(counts)
    if not 0 <= baseline < p:
        raise InputError(f"baseline {baseline} out of range for {p} words")
    if bound <= 0:
        raise InputError("bound must be positive")
    keep = np.delete(np.arange(p), baseline)
    k = keep.size

    positive = np.all(counts.c0 > 0) and np.all(counts.c1 > 0)
    if init == "auto":
        init = "closed_form" if positive else "zero"
    if init == "closed_form":
        a0, f0 = closed_form_mle(counts, baseline)
        x = np.clip(np.concatenate([a0[keep], f0[keep]]), -bound, bound)
    elif init == "zero":
        x = np.zeros(2 * k)
    else:
        raise InputError(f"unknown init {init!r}")
    # words missing from one group have their supremum at infinity; start them
    # on the box so the gradient underflow far out cannot masquerade as an optimum
    x[:k][counts.c0[keep] == 0] = -bound
    x[k:][(counts.c1[keep] == 0) & (counts.c0[keep] > 0)] = -bound

    def unpack(v):
        alpha = np.zeros(p)
        phi = np.zeros(p)
        alpha[keep] = v[:k]
        phi[keep] = v[k:]
        return alpha, phi

    def objective(v):
        return collapsed_loglik(*unpack(v), counts)

    res = box_newton(objective, lambda v: _reduced_derivs(*unpack(v), counts, keep),
                     x, bound, tol, max_iter)
    x, ll, converged, it, gnorm = res.x, res.value, res.converged, res.iterations, res.grad_norm
    if not converged:
        warnings.warn(
            f"collapsed MNIR fit stopped after {it} iterations with gradient {gnorm:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    alpha, phi = unpack(x)
    on_box = (np.abs(alpha) >= bound) | (np.abs(phi) >= bound)
    return MnirFit(
        alpha=alpha,
        phi=phi,
        baseline=int(baseline),
        bound=float(bound),
        q0=multinomial_probs(alpha, phi, 0.0),
        q1=multinomial_probs(alpha, phi, 1.0),
        log_likelihood=ll,
        converged=converged,
        iterations=it,
        grad_norm=gnorm,
        clamped=tuple(int(j) for j in np.flatnonzero(on_box)),
    )


def project(F, phi) -> np.ndarray:
    """Sufficient-reduction projection ``z_i = phi' f_i`` for every document."""
    if isinstance(F, FreqMatrix):
        return F.dot(phi)
    F = np.asarray(F, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if F.ndim != 2 or F.shape[1] != phi.shape[0]:
        raise InputError("frequency matrix and loadings have mismatched dimensions")
    return F @ phi
