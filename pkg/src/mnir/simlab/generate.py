"""Data generators for the collapsed and random-effects word models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax

from ..collapsed import multinomial_probs
from ..corpus import SparseCorpus
from ..seeding import rng_for
from .config import COLLAPSED, RANDOM_EFFECTS, SimConfig

__all__ = [
    "Draw",
    "draw_corpus",
    "simulate_collapsed",
    "simulate_random_effects",
    "forward_response",
]


@dataclass(frozen=True)
class Draw:
    """A simulated corpus plus the latent pieces the generators used."""

    corpus: SparseCorpus
    labels: np.ndarray
    latent: np.ndarray | None = field(default=None, repr=False)
    redraws: int = 0


def _collapsed_counts(rng, labels, m, alpha, phi):
    q0 = multinomial_probs(alpha, phi, 0.0)
    q1 = multinomial_probs(alpha, phi, 1.0)
    pvals = np.where(labels[:, None] == 1, q1[None, :], q0[None, :])
    return rng.multinomial(m, pvals), None, 0


def _random_effects_counts(rng, labels, m, alpha, phi, u_sd):
    n, p = labels.size, phi.size
    mu = np.log(m) + log_softmax(alpha) - 0.5 * u_sd**2
    u = rng.normal(0.0, u_sd, size=(n, p)) if u_sd > 0 else np.zeros((n, p))
    x = rng.poisson(np.exp(mu[None, :] + phi[None, :] * labels[:, None] + u))
    redraws = 0
    for i in range(n):
        while x[i].sum() == 0:
            redraws += 1
            u[i] = rng.normal(0.0, u_sd, size=p) if u_sd > 0 else 0.0
            x[i] = rng.poisson(np.exp(mu + phi * labels[i] + u[i]))
    return x, u, redraws


def draw_corpus(config: SimConfig, rng, n=None, m=None, params=None) -> Draw:
    """Draw ``n`` documents from ``config.model`` using generator ``rng``.

    Labels come first (Bernoulli(pi)), then counts, so a given stream
    always yields the same labels regardless of the model.
    """
    n = config.n if n is None else int(n)
    m = config.m if m is None else int(m)
    alpha, phi = config.true_parameters() if params is None else params
    labels = (rng.random(n) < config.pi).astype(np.int64)
    if config.model == COLLAPSED:
        x, u, redraws = _collapsed_counts(rng, labels, m, alpha, phi)
    elif config.model == RANDOM_EFFECTS:
        x, u, redraws = _random_effects_counts(rng, labels, m, alpha, phi, config.u_sd)
    else:  # pragma: no cover - guarded by SimConfig
        raise ValueError(config.model)
    corpus = SparseCorpus(sp.csr_matrix(x), labels.astype(float))
    return Draw(corpus, labels, u, redraws)


def simulate_collapsed(config: SimConfig, seed, n=None, m=None) -> SparseCorpus:
    """``y_i ~ Bernoulli(pi)``, ``x_i ~ Multinomial(m, q(y_i))``; pure in ``(config, seed)``."""
    cfg = config.replace(model=COLLAPSED)
    return draw_corpus(cfg, rng_for(seed), n=n, m=m).corpus


def simulate_random_effects(config: SimConfig, seed, n=None, m=None, with_latent=False):
    """Independent ``x_ij ~ Poisson(exp(mu_j + phi_j y_i + u_ij))`` with
    ``u_ij ~ N(0, u_sd^2)`` independent of y. Documents with no words are
    redrawn; ``with_latent=True`` returns the full :class:`Draw`."""
    cfg = config.replace(model=RANDOM_EFFECTS)
    draw = draw_corpus(cfg, rng_for(seed), n=n, m=m)
    return draw if with_latent else draw.corpus


def forward_response(config: SimConfig, z, latent, rng) -> np.ndarray:
    """``y = alpha + beta z + gamma' u + sigma eps`` with ``gamma_j = gamma / sqrt(p)``."""
    z = np.asarray(z, dtype=float)
    y = config.forward_alpha + config.forward_beta * z
    if latent is not None and config.gamma != 0:
        y = y + latent.sum(axis=1) * (config.gamma / np.sqrt(latent.shape[1]))
    if config.sigma > 0:
        y = y + config.sigma * rng.standard_normal(z.size)
    return y
