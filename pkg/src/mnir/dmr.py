"""
Distributed multinomial regression.

Counts are sharded by word (the map step) and each word gets its own
Poisson log regression with a log-exposure offset (the reduce step
assembles the per-word coefficient rows in vocabulary order). Independent
Poissons conditioned on their sum are multinomial, so with a single binary
covariate the loadings agree with the collapsed model up to a shift.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np
import scipy.sparse as sp

from ._optim import box_newton
from .collapsed import DEFAULT_BOUND, DEFAULT_MAX_ITER, DEFAULT_TOL
from .corpus import FreqMatrix, SparseCorpus
from .errors import InputError
from .parallel import ordered_map

__all__ = [
    "CovariateBlock",
    "WordTask",
    "WordFit",
    "DmrFit",
    "LatentScores",
    "exposure_offsets",
    "shard_by_word",
    "fit_poisson_word",
    "dmr_fit",
    "dmr_projection",
    "tfidf_pca",
]


@dataclass(frozen=True)
class CovariateBlock:
    """Document-level regressors, one column per covariate. The intercept
    is implicit, so constant columns are rejected."""

    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise InputError("covariates must be an (n_docs, d) matrix")
        if not np.all(np.isfinite(v)):
            raise InputError("covariates must be finite")
        if v.shape[0] > 1 and v.shape[1]:
            const = np.flatnonzero(np.ptp(v, axis=0) == 0)
            if const.size:
                raise InputError(f"covariate column {int(const[0])} is constant")
        labels = tuple(self.labels) if self.labels else tuple(f"v{k}" for k in range(v.shape[1]))
        if len(labels) != v.shape[1]:
            raise InputError("one label per covariate column is required")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @property
    def n_docs(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @classmethod
    def empty(cls, n_docs):
        return cls(np.zeros((n_docs, 0)))

    @classmethod
    def from_responses(cls, corpus: SparseCorpus, label="y"):
        if corpus.responses is None:
            raise InputError("corpus has no responses")
        return cls(corpus.responses[:, None], (label,))

    def hstack(self, other: "CovariateBlock") -> "CovariateBlock":
        return CovariateBlock(np.hstack([self.values, other.values]), self.labels + other.labels)


@dataclass(frozen=True)
class WordTask:
    """One shard: the nonzero counts of a single word plus shared document data."""

    word: int
    docs: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray = field(repr=False)
    covariates: np.ndarray = field(repr=False)

    def dense_counts(self) -> np.ndarray:
        x = np.zeros(self.offsets.size)
        x[self.docs] = self.counts
        return x


@dataclass(frozen=True)
class WordFit:
    word: int
    mu: float
    coef: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    diagnostic: str = ""


@dataclass(frozen=True)
class DmrFit:
    mu: np.ndarray
    coef: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    diagnostics: dict
    lam: float
    bound: float
    labels: tuple = ()

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "bound": self.bound,
            "labels": list(self.labels),
            "mu": self.mu.tolist(),
            "coef": self.coef.tolist(),
            "diagnostics": {
                "converged": self.converged.tolist(),
                "iterations": self.iterations.tolist(),
                "words": {str(k): v for k, v in sorted(self.diagnostics.items())},
            },
        }

    @classmethod
    def from_dict(cls, d) -> "DmrFit":
        diag = d["diagnostics"]
        mu = np.asarray(d["mu"], dtype=float)
        coef = np.asarray(d["coef"], dtype=float).reshape(mu.size, len(d["labels"]))
        return cls(
            mu=mu,
            coef=coef,
            converged=np.asarray(diag["converged"], dtype=bool),
            iterations=np.asarray(diag["iterations"], dtype=int),
            diagnostics={int(k): v for k, v in diag["words"].items()},
            lam=float(d["lambda"]),
            bound=float(d["bound"]),
            labels=tuple(d["labels"]),
        )


def exposure_offsets(corpus: SparseCorpus) -> np.ndarray:
    """``log(m_i) - log(p)``: each word's baseline intensity is ``m_i / p``."""
    corpus.require_positive_totals()
    return np.log(corpus.doc_totals.astype(float)) - np.log(corpus.vocab_size)


def shard_by_word(corpus: SparseCorpus, covariates: CovariateBlock | None = None,
                  offsets=None) -> list[WordTask]:
    """Group the count matrix by column: one task per word, in vocabulary order."""
    if covariates is None:
        covariates = CovariateBlock.empty(corpus.n_docs)
    if covariates.n_docs != corpus.n_docs:
        raise InputError("covariate rows do not match number of documents")
    if offsets is None:
        offsets = exposure_offsets(corpus)
    offsets = np.asarray(offsets, dtype=float)
    if offsets.shape != (corpus.n_docs,) or not np.all(np.isfinite(offsets)):
        raise InputError("offsets must be a finite vector, one per document")
    csc = sp.csc_matrix(corpus.counts)
    tasks = []
    for j in range(corpus.vocab_size):
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        tasks.append(WordTask(j, csc.indices[lo:hi].copy(), csc.data[lo:hi].astype(float),
                              offsets, covariates.values))
    return tasks


def _poisson_loglik(x, offsets, V, theta):
    eta = offsets + theta[0] + V @ theta[1:]
    return float(x @ eta - np.exp(eta).sum())


def _poisson_derivs(x, offsets, X1, theta):
    rate = np.exp(offsets + X1 @ theta)
    g = X1.T @ (x - rate)
    neg_h = X1.T @ (rate[:, None] * X1)
    return g, neg_h


def _soft(v, t):
    return np.sign(v) * max(abs(v) - t, 0.0)


def _l1_kkt(g, theta, lam, bound):
    """Max violation of the lasso optimality conditions (intercept unpenalised)."""
    viol = abs(g[0])
    for k in range(1, theta.size):
        b = theta[k]
        if abs(b) >= bound and np.sign(g[k] - lam * np.sign(b)) == np.sign(b):
            continue
        if b == 0:
            viol = max(viol, abs(g[k]) - lam)
        else:
            viol = max(viol, abs(g[k] - lam * np.sign(b)))
    return viol


def _fit_l1(x, offsets, V, X1, theta, lam, bound, tol, max_iter):
    """Proximal Newton: coordinate descent on the local quadratic, then a
    backtracking step on the penalised objective."""

    def penalised(t):
        return _poisson_loglik(x, offsets, V, t) - lam * np.abs(t[1:]).sum()

    val = penalised(theta)
    it = 0
    while True:
        g, H = _poisson_derivs(x, offsets, X1, theta)
        viol = _l1_kkt(g, theta, lam, bound)
        if viol < tol:
            return theta, True, it, float(viol)
        if it >= max_iter:
            return theta, False, it, float(viol)
        it += 1
        new = theta.copy()
        for _ in range(1000):
            max_change = 0.0
            for k in range(theta.size):
                hkk = H[k, k]
                if hkk <= 0:
                    continue
                # gradient of the local quadratic at `new`
                gk = g[k] - H[k] @ (new - theta)
                if k == 0:
                    nk = new[k] + gk / hkk
                else:
                    nk = _soft(hkk * new[k] + gk, lam) / hkk
                nk = min(max(nk, -bound), bound)
                max_change = max(max_change, abs(nk - new[k]))
                new[k] = nk
            if max_change < 1e-13 * (1.0 + np.abs(new).max()):
                break
        d = new - theta
        step = 1.0
        slack = 1e-12 * (1.0 + abs(val))
        for _ in range(60):
            trial = theta + step * d
            tval = penalised(trial)
            if tval >= val - slack:
                break
            step *= 0.5
        else:
            return theta, False, it, float(viol)
        if np.array_equal(trial, theta):
            return theta, False, it, float(viol)
        theta, val = trial, tval


def fit_poisson_word(task: WordTask, lam=0.0, bound=DEFAULT_BOUND, tol=DEFAULT_TOL,
                     max_iter=DEFAULT_MAX_ITER) -> WordFit:
    """Poisson log regression of one word's counts on the covariates.

    Maximises ``sum_i x_i eta_i - exp(eta_i) - lam * ||coef||_1`` with
    ``eta_i = offset_i + mu + v_i' coef``. Newton when ``lam == 0``,
    proximal-Newton coordinate descent otherwise; the intercept is never
    penalised and every parameter is kept within ``[-bound, bound]``.
    """
    if lam < 0:
        raise InputError("lambda must be nonnegative")
    x = task.dense_counts()
    offsets = task.offsets
    V = task.covariates
    n, d = V.shape
    X1 = np.hstack([np.ones((n, 1)), V])
    total = x.sum()
    theta = np.zeros(d + 1)

    if total == 0:
        theta[0] = -bound
        g, _ = _poisson_derivs(x, offsets, X1, theta)
        return WordFit(task.word, -bound, np.zeros(d), True, 0, float(np.abs(g).max()),
                       "empty column: intercept clamped at -bound")

    theta[0] = np.clip(np.log(total) - np.log(np.exp(offsets).sum()), -bound, bound)
    if lam == 0:
        res = box_newton(lambda t: _poisson_loglik(x, offsets, V, t),
                         lambda t: _poisson_derivs(x, offsets, X1, t),
                         theta, bound, tol, max_iter)
        theta, converged, it, gnorm = res.x, res.converged, res.iterations, res.grad_norm
    else:
        theta, converged, it, gnorm = _fit_l1(x, offsets, V, X1, theta, lam, bound, tol, max_iter)

    notes = []
    if not converged:
        notes.append(f"not converged after {it} iterations (gradient {gnorm:.3g})")
    if np.any(np.abs(theta) >= bound):
        notes.append("parameter clamped at bound")
    return WordFit(task.word, float(theta[0]), theta[1:].copy(), converged, it, gnorm,
                   "; ".join(notes))


def _fit_task(task, lam, bound, tol, max_iter):
    return fit_poisson_word(task, lam=lam, bound=bound, tol=tol, max_iter=max_iter)


def dmr_fit(corpus: SparseCorpus, covariates: CovariateBlock | None = None, lam=0.0,
            workers=1, offsets=None, bound=DEFAULT_BOUND, tol=DEFAULT_TOL,
            max_iter=DEFAULT_MAX_ITER) -> DmrFit:
    """Fit every word independently on a pool of ``workers`` processes.

    Each per-word fit is a pure function of its shard, and rows are reduced
    in vocabulary order, so the result does not depend on ``workers``.
    """
    if covariates is None:
        covariates = CovariateBlock.empty(corpus.n_docs)
    tasks = shard_by_word(corpus, covariates, offsets)
    fits = ordered_map(partial(_fit_task, lam=lam, bound=bound, tol=tol, max_iter=max_iter),
                       tasks, workers=workers)
    d = covariates.d
    mu = np.array([f.mu for f in fits], dtype=float)
    coef = np.array([f.coef for f in fits], dtype=float).reshape(len(fits), d)
    return DmrFit(
        mu=mu,
        coef=coef,
        converged=np.array([f.converged for f in fits], dtype=bool),
        iterations=np.array([f.iterations for f in fits], dtype=int),
        diagnostics={f.word: f.diagnostic for f in fits if f.diagnostic},
        lam=float(lam),
        bound=float(bound),
        labels=covariates.labels,
    )


def dmr_projection(F: FreqMatrix, fit: DmrFit) -> np.ndarray:
    """``Z = F @ coef``: one sufficient projection per covariate."""
    if F.shape[1] != fit.coef.shape[0]:
        raise InputError("frequency matrix and DMR loadings have mismatched vocabularies")
    if fit.coef.shape[1] == 0:
        return np.zeros((F.shape[0], 0))
    return F.dot(fit.coef)


@dataclass(frozen=True)
class LatentScores:
    scores: np.ndarray
    explained: np.ndarray
    components: np.ndarray = field(repr=False)

    def as_covariates(self, prefix="u", standardize=True) -> CovariateBlock:
        """Scores as regressors, scaled to unit variance by default so loadings
        are per standard deviation and stay well inside the clamp."""
        k = self.scores.shape[1]
        u = self.scores
        if standardize and k:
            sd = u.std(axis=0)
            u = u / np.where(sd > 0, sd, 1.0)
        return CovariateBlock(u, tuple(f"{prefix}{i}" for i in range(k)))


def tfidf_matrix(corpus: SparseCorpus) -> np.ndarray:
    """Dense tf-idf with ``tf = x/m`` and ``idf = log(n / df)``."""
    corpus.require_positive_totals()
    n = corpus.n_docs
    df = np.asarray((corpus.counts > 0).sum(axis=0)).ravel()
    idf = np.zeros(corpus.vocab_size)
    seen = df > 0
    idf[seen] = np.log(n / df[seen])
    tf = sp.diags(1.0 / corpus.doc_totals.astype(float)) @ corpus.counts.astype(float)
    return np.asarray((tf @ sp.diags(idf)).todense())


def tfidf_pca(corpus: SparseCorpus, K: int) -> LatentScores:
    """Top-``K`` principal component scores of the column-centred tf-idf matrix.

    Each component is signed so its largest-magnitude loading is positive.
    """
    n, p = corpus.n_docs, corpus.vocab_size
    if K < 0 or K >= min(n, p):
        raise InputError(f"K must satisfy 0 <= K < min(n_docs, vocab_size) = {min(n, p)}")
    T = tfidf_matrix(corpus)
    T = T - T.mean(axis=0)
    if K == 0:
        return LatentScores(np.zeros((n, 0)), np.zeros(0), np.zeros((0, p)))
    U, s, Vt = np.linalg.svd(T, full_matrices=False)
    total = float(s @ s)
    comps = Vt[:K].copy()
    for k in range(K):
        j = np.argmax(np.abs(comps[k]))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    scores = T @ comps.T
    explained = (s[:K] ** 2) / total if total > 0 else np.zeros(K)
    return LatentScores(scores, explained, comps)
