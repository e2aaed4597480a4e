"""Second MNIR-OLS stage: least squares of y on the projection z."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .collapsed import MnirFit
from .corpus import SparseCorpus, mean_shift_frequencies
from .errors import DegenerateDataError, InputError

__all__ = [
    "ForwardFit",
    "fit_forward_ols",
    "predict",
    "predict_corpus",
    "predictive_variance",
]


@dataclass(frozen=True)
class ForwardFit:
    """Simple linear regression ``y = alpha + beta * z``.

    ``sigma2_hat`` uses divisor ``n - 2``. ``fbar`` is the training mean
    frequency vector, kept so new documents are centered like training ones.
    """

    alpha_hat: float
    beta_hat: float
    sigma2_hat: float
    z_train: np.ndarray = field(repr=False)
    sum_z2: float
    n: int
    z_mean: float = 0.0
    fbar: np.ndarray | None = field(default=None, repr=False)

    def residuals(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) - self.alpha_hat - self.beta_hat * self.z_train

    def with_fbar(self, fbar) -> "ForwardFit":
        return ForwardFit(self.alpha_hat, self.beta_hat, self.sigma2_hat, self.z_train,
                          self.sum_z2, self.n, self.z_mean, np.asarray(fbar, dtype=float))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha_hat,
            "beta": self.beta_hat,
            "sigma2": self.sigma2_hat,
            "n": self.n,
            "sum_z2": self.sum_z2,
            "z_mean": self.z_mean,
            "z_train": self.z_train.tolist(),
            "fbar": None if self.fbar is None else self.fbar.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "ForwardFit":
        return cls(
            alpha_hat=float(d["alpha"]),
            beta_hat=float(d["beta"]),
            sigma2_hat=float(d["sigma2"]),
            z_train=np.asarray(d["z_train"], dtype=float),
            sum_z2=float(d["sum_z2"]),
            n=int(d["n"]),
            z_mean=float(d.get("z_mean", 0.0)),
            fbar=None if d.get("fbar") is None else np.asarray(d["fbar"], dtype=float),
        )


def fit_forward_ols(z, y, fbar=None) -> ForwardFit:
    """OLS of ``y`` on ``z`` with an intercept.

    Projections built from mean-shifted frequencies have zero mean, in which
    case ``alpha_hat`` is just the mean response.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.ndim != 1 or z.shape != y.shape:
        raise InputError(f"z and y must be vectors of equal length, got {z.shape} and {y.shape}")
    n = z.size
    if n < 3:
        raise InputError("need at least three observations")
    if np.ptp(z) == 0:
        raise DegenerateDataError("degenerate projection: all z equal, slope undefined")
    zbar = z.mean()
    zc = z - zbar
    sum_z2 = float(zc @ zc)
    beta = float(zc @ (y - y.mean())) / sum_z2
    alpha = float(y.mean() - beta * zbar)
    resid = y - alpha - beta * z
    sigma2 = float(resid @ resid) / (n - 2)
    return ForwardFit(alpha, beta, sigma2, z, sum_z2, n, float(zbar),
                      None if fbar is None else np.asarray(fbar, dtype=float))


def predictive_variance(fit: ForwardFit, z_new):
    """Large-M variance of the MNIR-OLS prediction at projection ``z_new``:
    ``sigma2 * (1/n + z^2 / sum z_i^2)``."""
    dz = np.asarray(z_new, dtype=float) - fit.z_mean
    out = fit.sigma2_hat * (1.0 / fit.n + dz**2 / fit.sum_z2)
    return float(out) if np.ndim(out) == 0 else out


def _fbar_for(fit, fbar):
    fbar = fit.fbar if fbar is None else fbar
    if fbar is None:
        raise InputError("no training mean frequency vector available")
    return np.asarray(fbar, dtype=float)


def predict(fit: ForwardFit, mnir: MnirFit, fbar, x_new):
    """Predict one new document from its raw counts.

    Returns ``(y_hat, z_new)``.
    """
    fbar = _fbar_for(fit, fbar)
    if sp.issparse(x_new):
        x = np.asarray(x_new.todense(), dtype=float).ravel()
    else:
        x = np.asarray(x_new, dtype=float).ravel()
    if x.shape != mnir.phi.shape or fbar.shape != mnir.phi.shape:
        raise InputError("document length does not match the fitted vocabulary")
    m = x.sum()
    if m <= 0:
        raise DegenerateDataError("document has zero total words")
    z_new = float(mnir.phi @ (x / m - fbar))
    return fit.alpha_hat + fit.beta_hat * z_new, z_new


def predict_corpus(fit: ForwardFit, mnir: MnirFit, corpus: SparseCorpus, fbar=None):
    """Vectorised :func:`predict` plus variance; returns ``(z, y_hat, var_hat)`` arrays."""
    fbar = _fbar_for(fit, fbar)
    if corpus.vocab_size != mnir.phi.size:
        raise InputError(
            f"corpus vocabulary {corpus.vocab_size} does not match model vocabulary {mnir.phi.size}"
        )
    if corpus.n_docs == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy()
    F = mean_shift_frequencies(corpus, offset=fbar)
    z = F.dot(mnir.phi)
    y_hat = fit.alpha_hat + fit.beta_hat * z
    return z, y_hat, np.asarray(predictive_variance(fit, z))
