"""
Monte Carlo checks of the MLE covariance, the MNIR-OLS predictive variance
and the MNIR-OLS versus frequency-OLS comparison.

Every replicate draws from its own stream ``rng_for(seed, stream, ..., r,
attempt)`` and results are reduced in replicate order, so reports do not
depend on the number of workers.
"""
from __future__ import annotations

import math
import time
import warnings
from functools import partial

import numpy as np
from scipy import stats

from ..collapsed import fisher_information, fit_collapsed_mnir, multinomial_probs
from ..corpus import collapse, mean_shift_frequencies
from ..errors import DegenerateDataError, InputError, NumericalError
from ..forward import fit_forward_ols
from ..parallel import ordered_map
from ..seeding import rng_for
from .config import (COLLAPSED, CONDITIONING, RANDOM_EFFECTS, STREAM_EFFICIENCY,
                     STREAM_PROP1, STREAM_PROP2_DESIGN, STREAM_PROP2_FULL,
                     STREAM_PROP2_REPLICATE, SimConfig)
from .generate import draw_corpus, forward_response
from .report import McReport

__all__ = ["verify_prop1", "verify_prop2", "efficiency_compare", "efficient_covariance"]

MAX_ATTEMPTS = 50
RIDGE = 1e-8
COND_LIMIT = 1e12


def _redraw_cap(R):
    return max(1, int(0.01 * R))


def _usable(draw, require_all_words=True):
    """Reject draws with an empty response group or a word missing from a group."""
    g = draw.labels
    if g.sum() == 0 or g.sum() == g.size:
        return None
    counts = collapse(draw.corpus)
    if require_all_words and (np.any(counts.c0 == 0) or np.any(counts.c1 == 0)):
        return None
    return counts


def _draw_usable(config, params, n, m, stream_path):
    for attempt in range(MAX_ATTEMPTS):
        rng = rng_for(config.seed, *stream_path, attempt)
        draw = draw_corpus(config, rng, n=n, m=m, params=params)
        counts = _usable(draw)
        if counts is not None:
            return draw, counts, rng, attempt
    raise NumericalError(
        f"no usable draw after {MAX_ATTEMPTS} attempts; vocabulary too rare for n={n}, m={m}"
    )


def _check_failures(R, failed, redraws):
    if failed > 0.01 * R:
        raise NumericalError(f"{failed} of {R} replicates failed (more than 1%)")
    if redraws > _redraw_cap(R):
        raise NumericalError(
            f"{redraws} degenerate replicates redrawn; cap is 1% of R = {_redraw_cap(R)}"
        )


def efficient_covariance(q0, q1, pi, baseline):
    """Limiting covariance of ``sqrt(M) (phi_hat - phi)`` when the intercepts
    are estimated jointly: ``(pi W1)^-1 + ((1 - pi) W0)^-1`` in reduced coordinates."""
    i1 = fisher_information(q1, pi, baseline).reduced_matrix
    i0 = fisher_information(q0, 1.0 - pi, baseline).reduced_matrix
    return np.linalg.inv(i1) + np.linalg.inv(i0)


def _compare(empirical, target):
    return {
        "covariance": target,
        "diag_ratio": np.diag(empirical) / np.diag(target),
        "frobenius_rel_err": float(np.linalg.norm(empirical - target) / np.linalg.norm(target)),
    }


# -- loadings covariance -------------------------------------------------------


def _prop1_replicate(r, config, params, nuisance):
    alpha, phi = params
    b = config.baseline
    keep = np.delete(np.arange(config.p), b)
    draw, counts, _, redraws = _draw_usable(config, params, config.n, config.m,
                                            (STREAM_PROP1, config.m, r))
    M = counts.total_words
    if nuisance == "known":
        phi_hat = np.log(counts.c1) - np.log(counts.c1[b]) - alpha
        ok = True
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_collapsed_mnir(counts, baseline=b, bound=config.bound)
        phi_hat, ok = fit.phi, fit.converged and not fit.clamped
    err = math.sqrt(M) * (phi_hat - phi)[keep]
    return err, redraws, ok, M


def verify_prop1(config: SimConfig, workers=1, nuisance="estimated") -> McReport:
    """Sampling covariance of ``sqrt(M) (phi_hat - phi)`` over ``R`` replicates.

    Compared against two targets in baseline-reduced coordinates:
    ``loadings_target = (pi W)^-1`` built from the expected information for the
    loadings alone, and ``efficient_target`` which also accounts for
    estimating the intercepts. With ``nuisance="known"`` the intercepts are
    fixed at their true values, the setting in which the first target is the
    exact limit.
    """
    if config.model != COLLAPSED:
        raise InputError("verify_prop1 needs the collapsed-multinomial model")
    if nuisance not in ("estimated", "known"):
        raise InputError("nuisance must be 'estimated' or 'known'")
    t0 = time.perf_counter()
    alpha, phi = config.true_parameters()
    q0 = multinomial_probs(alpha, phi, 0.0)
    q1 = multinomial_probs(alpha, phi, 1.0)
    info = fisher_information(q1, config.pi, config.baseline)
    R = config.replicates

    out = ordered_map(partial(_prop1_replicate, config=config, params=(alpha, phi),
                              nuisance=nuisance), range(R), workers=workers)
    errs = np.array([e for e, _, ok, _ in out if ok])
    failed = sum(1 for *_, ok, _ in out if not ok)
    redraws = sum(rd for _, rd, _, _ in out)
    _check_failures(R, failed, redraws)
    if errs.shape[0] < 2:
        raise NumericalError("fewer than two usable replicates")

    M = int(out[0][3])
    emp = np.atleast_2d(np.cov(errs, rowvar=False, ddof=1))
    mean = errs.mean(axis=0)
    sd = errs.std(axis=0, ddof=1)
    k = errs.shape[0]
    standardized = (errs - mean) / sd
    ks = [float(stats.kstest(standardized[:, j], "norm").statistic) for j in range(errs.shape[1])]
    se = math.sqrt(2.0 / (k - 1))
    results = {
        "nuisance": nuisance,
        "total_words": M,
        "coordinates": np.delete(np.arange(config.p), config.baseline),
        "alpha_true": alpha,
        "phi_true": phi,
        "q0": q0,
        "q1": q1,
        "empirical_covariance": emp,
        "mean_error": mean,
        "mean_error_z": mean / (sd / math.sqrt(k)),
        "raw_variance": np.diag(emp) / M,
        "normality_ks": ks,
        "ratio_band": [1.0 - 4.0 * se, 1.0 + 4.0 * se],
        "loadings_target": _compare(emp, info.covariance()),
        "efficient_target": _compare(emp, efficient_covariance(q0, q1, config.pi,
                                                               config.baseline)),
    }
    return McReport("prop1", config.to_dict(), config.seed, R, failed, redraws, results,
                    time.perf_counter() - t0)


# -- predictive variance -------------------------------------------------------


def _probe_frequencies(f_doc, phi, probes):
    """Shift a centred frequency vector along the centred loadings so its
    true projection equals each probe value; row sums stay zero."""
    phi_c = phi - phi.mean()
    scale = phi_c @ phi_c
    z_doc = phi @ f_doc
    return [f_doc - ((z_doc - z) / scale) * phi_c for z in probes]


def _predict_probes(config, params, rng, m, fbar, phi_hat, fwd, probes):
    test = draw_corpus(config, rng, n=1, m=m, params=params).corpus
    f_doc = mean_shift_frequencies(test, offset=fbar).toarray()[0]
    return [fwd.alpha_hat + fwd.beta_hat * (phi_hat @ f)
            for f in _probe_frequencies(f_doc, params[1], probes)]


def _fit_design(config, params, counts, draw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_collapsed_mnir(counts, baseline=config.baseline, bound=config.bound)
    F = mean_shift_frequencies(draw.corpus)
    z_true = F.dot(params[1])
    return fit, F, z_true, F.dot(fit.phi)


def _prop2_fixed_replicate(r, config, params, m, design):
    fit, F, z_true, z_hat, latent, z_sd = design
    rng = rng_for(config.seed, STREAM_PROP2_REPLICATE, m, r)
    y = forward_response(config, z_true, latent, rng)
    fwd = fit_forward_ols(z_hat, y)
    probes = [k * z_sd for k in config.probe_z]
    return _predict_probes(config, params, rng, m, F.offset, fit.phi, fwd, probes), 0, True


def _prop2_full_replicate(r, config, params, m):
    draw, counts, rng, redraws = _draw_usable(config, params, config.n, m,
                                              (STREAM_PROP2_FULL, m, r))
    fit, F, z_true, z_hat = _fit_design(config, params, counts, draw)
    ok = fit.converged and not fit.clamped
    z_sd = math.sqrt(z_true @ z_true / z_true.size)
    y = forward_response(config, z_true, draw.latent, rng)
    fwd = fit_forward_ols(z_hat, y)
    probes = [k * z_sd for k in config.probe_z]
    return _predict_probes(config, params, rng, m, F.offset, fit.phi, fwd, probes), redraws, ok


def _ladder_level(preds, config, m, sigma2, extra):
    preds = np.asarray(preds)
    n = config.n
    probes = []
    for col, k in enumerate(config.probe_z):
        emp = float(np.var(preds[:, col], ddof=1))
        theo = sigma2 * (1.0 / n + k**2 / n)
        probes.append({
            "probe_sd": k,
            "empirical_var": emp,
            "theoretical_var": theo,
            "ratio": emp / theo if theo > 0 else None,
        })
    return {"m": m, "probes": probes, **extra}


def verify_prop2(config: SimConfig, probe_z=None, workers=1, modes=None) -> McReport:
    """Empirical variance of the MNIR-OLS prediction over a ladder of document
    lengths, against ``sigma^2 (1/n + z^2 / sum z_i^2)``.

    Probes are given in units of the training projection sd, where the
    target simplifies to ``sigma^2 (1 + k^2) / n``. Each replicate resamples
    the response noise and one test document, which is then shifted along
    the loadings to sit exactly at the probe's true projection.

    ``fixed`` mode keeps one training corpus per ladder level (so the
    z-design is held fixed); ``full`` mode redraws the training corpus in
    every replicate. Both are run by default, ``config.conditioning`` first.
    """
    if probe_z is not None:
        config = config.replace(probe_z=tuple(probe_z))
    if modes is None:
        modes = (config.conditioning,) + tuple(c for c in CONDITIONING if c != config.conditioning)
    for mode in modes:
        if mode not in CONDITIONING:
            raise InputError(f"unknown conditioning mode {mode!r}")
    t0 = time.perf_counter()
    params = config.true_parameters()
    R = config.replicates
    failed = redraws = 0
    ladders = {}
    for mode in modes:
        levels = []
        for m in config.m_ladder:
            sigma2 = config.sigma**2
            if mode == "fixed":
                draw, counts, _, rd = _draw_usable(config, params, config.n, m,
                                                   (STREAM_PROP2_DESIGN, m))
                redraws += rd
                fit, F, z_true, z_hat = _fit_design(config, params, counts, draw)
                if not fit.converged or fit.clamped:
                    raise NumericalError(f"design fit at m={m} did not converge inside the box")
                z_sd = math.sqrt(z_true @ z_true / z_true.size)
                design = (fit, F, z_true, z_hat, draw.latent, z_sd)
                out = ordered_map(partial(_prop2_fixed_replicate, config=config, params=params,
                                          m=m, design=design), range(R), workers=workers)
                extra = {"z_sd": z_sd, "sum_z2": float(z_true @ z_true),
                         "zhat_sum_z2": float(z_hat @ z_hat)}
            else:
                out = ordered_map(partial(_prop2_full_replicate, config=config, params=params,
                                          m=m), range(R), workers=workers)
                if config.model == RANDOM_EFFECTS:
                    # redrawn latent effects enter the residual variance
                    sigma2 += config.gamma**2
                extra = {}
            preds = [pr for pr, _, ok in out if ok]
            failed += sum(1 for _, _, ok in out if not ok)
            redraws += sum(rd for _, rd, _ in out)
            levels.append(_ladder_level(preds, config, m, sigma2, extra))
        ladders[mode] = levels
    _check_failures(R * len(modes) * len(config.m_ladder), failed, redraws)
    results = {
        "primary": modes[0],
        "sigma2": config.sigma**2,
        "ladders": ladders,
        "phi_true": params[1],
    }
    return McReport("prop2", config.to_dict(), config.seed, R, failed, redraws, results,
                    time.perf_counter() - t0)


# -- MNIR-OLS versus frequency OLS ---------------------------------------------


def _naive_ols(Xtr, ytr, Xte):
    A = np.hstack([np.ones((Xtr.shape[0], 1)), Xtr])
    B = np.hstack([np.ones((Xte.shape[0], 1)), Xte])
    AtA = A.T @ A
    if np.linalg.cond(AtA) > COND_LIMIT:
        coef = np.linalg.solve(AtA + RIDGE * np.eye(AtA.shape[0]), A.T @ ytr)
        return B @ coef, True
    coef, *_ = np.linalg.lstsq(A, ytr, rcond=None)
    return B @ coef, False


def _efficiency_replicate(r, config, params):
    b = config.baseline
    keep = np.delete(np.arange(config.p), b)
    train, counts, rng, redraws = _draw_usable(config, params, config.n, config.m,
                                               (STREAM_EFFICIENCY, r))
    test = draw_corpus(config, rng, n=config.test_docs, params=params)
    phi = params[1]
    F_tr = mean_shift_frequencies(train.corpus)
    F_te = mean_shift_frequencies(test.corpus, offset=F_tr.offset)
    y_tr = forward_response(config, F_tr.dot(phi), train.latent, rng)
    y_te = forward_response(config, F_te.dot(phi), test.latent, rng)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_collapsed_mnir(counts, baseline=b, bound=config.bound)
    fwd = fit_forward_ols(F_tr.dot(fit.phi), y_tr)
    pred_mnir = fwd.alpha_hat + fwd.beta_hat * F_te.dot(fit.phi)

    pred_naive, ridge = _naive_ols(F_tr.freqs.toarray()[:, keep], y_tr,
                                   F_te.freqs.toarray()[:, keep])
    mse_mnir = float(np.mean((y_te - pred_mnir) ** 2))
    mse_naive = float(np.mean((y_te - pred_naive) ** 2))
    return mse_mnir, mse_naive, ridge, redraws, fit.converged


def efficiency_compare(config: SimConfig, workers=1) -> McReport:
    """Out-of-sample MSE of MNIR-OLS against OLS on the ``p - 1`` free
    frequency columns, replicate by replicate."""
    if config.p > config.n - 2:
        raise InputError("need p <= n - 2 for the frequency OLS competitor")
    t0 = time.perf_counter()
    params = config.true_parameters()
    R = config.replicates
    out = ordered_map(partial(_efficiency_replicate, config=config, params=params),
                      range(R), workers=workers)
    ok = [o for o in out if o[4]]
    failed = R - len(ok)
    redraws = sum(o[3] for o in out)
    _check_failures(R, failed, redraws)
    mse_mnir = np.array([o[0] for o in ok])
    mse_naive = np.array([o[1] for o in ok])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(mse_mnir > 0, mse_naive / mse_mnir, np.nan)
    results = {
        "mse_mnir": float(mse_mnir.mean()),
        "mse_naive": float(mse_naive.mean()),
        "ratio_of_means": float(mse_naive.mean() / mse_mnir.mean()) if mse_mnir.mean() > 0 else None,
        "median_ratio": float(np.nanmedian(ratios)) if np.any(np.isfinite(ratios)) else None,
        "share_mnir_wins": float(np.mean(mse_naive > mse_mnir)),
        "ratios": ratios,
        "ridge_fallbacks": int(sum(o[2] for o in ok)),
    }
    return McReport("efficiency", config.to_dict(), config.seed, R, failed, redraws, results,
                    time.perf_counter() - t0)
