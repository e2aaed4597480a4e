import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnir.collapsed import fit_collapsed_mnir
from mnir.corpus import SparseCorpus, collapse, mean_shift_frequencies
from mnir.errors import DegenerateDataError, InputError
from mnir.forward import (ForwardFit, fit_forward_ols, predict, predict_corpus,
                          predictive_variance)

from conftest import random_corpus


@pytest.fixture
def trained():
    rng = np.random.default_rng(7)
    corpus = random_corpus(rng, 40, 6, max_count=9)
    mnir = fit_collapsed_mnir(collapse(corpus))
    F = mean_shift_frequencies(corpus)
    z = F.dot(mnir.phi)
    y = 1.0 + 2.0 * z + rng.normal(scale=0.1, size=z.size)
    return corpus, mnir, fit_forward_ols(z, y, fbar=F.offset), y


class TestFitForwardOls:
    def test_perfect_fit(self):
        fit = fit_forward_ols([-1, 0, 1], [0, 0.5, 1])
        assert (fit.alpha_hat, fit.beta_hat) == pytest.approx((0.5, 0.5))
        assert fit.sigma2_hat == pytest.approx(0.0, abs=1e-30)

    def test_flat_response(self):
        fit = fit_forward_ols([-1, 0, 1], [1, 1, 1])
        assert fit.beta_hat == 0 and fit.alpha_hat == 1

    def test_constant_z(self):
        with pytest.raises(DegenerateDataError, match="degenerate projection"):
            fit_forward_ols([0, 0, 0], [1, 2, 3])

    @pytest.mark.parametrize("z, y", [([1, 2, 3], [1, 2]), ([1, 2], [1, 2])])
    def test_bad_shapes(self, z, y):
        with pytest.raises(InputError):
            fit_forward_ols(z, y)

    def test_divisor(self):
        z = np.array([-2.0, -1, 0, 1, 2])
        y = np.array([0.0, 1, 0, 1, 0])
        fit = fit_forward_ols(z, y)
        X = np.column_stack([np.ones(5), z])
        resid = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
        assert fit.sigma2_hat == pytest.approx(resid @ resid / 3)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 60), st.floats(-5, 5), st.floats(-5, 5))
    def test_exact_recovery_and_residuals(self, seed, n, a, b):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=n)
        fit = fit_forward_ols(z, a + b * z)
        assert fit.alpha_hat == pytest.approx(a, abs=1e-10)
        assert fit.beta_hat == pytest.approx(b, abs=1e-10)
        y = a + b * z + rng.normal(size=n)
        fit = fit_forward_ols(z, y)
        r = fit.residuals(y)
        scale = np.abs(y).sum() + 1.0
        assert abs(r.sum()) < 1e-10 * scale
        assert abs(r @ z) < 1e-10 * scale * np.abs(z).max()

    def test_roundtrip_dict(self, trained):
        fit = trained[2]
        back = ForwardFit.from_dict(fit.to_dict())
        assert back.beta_hat == fit.beta_hat
        np.testing.assert_array_equal(back.fbar, fit.fbar)


class TestPredictiveVariance:
    def test_formula(self):
        fit = fit_forward_ols([-1.0, 0, 1, 2], [0.1, 0.2, -0.3, 0.7])
        s2, n, S = fit.sigma2_hat, fit.n, fit.sum_z2
        assert predictive_variance(fit, fit.z_mean) == pytest.approx(s2 / n)
        assert predictive_variance(fit, fit.z_mean + np.sqrt(S)) == pytest.approx(s2 * (1 / n + 1))

    def test_zero_noise(self):
        fit = fit_forward_ols([-1, 0, 1], [0, 0.5, 1])
        assert predictive_variance(fit, 3.0) == pytest.approx(0.0, abs=1e-30)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 50), st.floats(0, 50))
    def test_even_and_monotone(self, a, b):
        fit = fit_forward_ols(np.array([-1.0, 0, 1]), np.array([0.0, 1, 0]))
        lo, hi = sorted((a, b))
        assert predictive_variance(fit, lo) == predictive_variance(fit, -lo)
        assert predictive_variance(fit, lo) <= predictive_variance(fit, hi)
        assert predictive_variance(fit, lo) >= fit.sigma2_hat / fit.n


class TestPredict:
    def test_training_reproduces_projection(self, trained):
        corpus, mnir, fit, _ = trained
        z, y_hat, var = predict_corpus(fit, mnir, corpus)
        np.testing.assert_allclose(z, fit.z_train, atol=1e-12)
        np.testing.assert_allclose(y_hat, fit.alpha_hat + fit.beta_hat * fit.z_train)
        np.testing.assert_allclose(var, predictive_variance(fit, z))

    def test_centered_document(self, trained):
        _, mnir, fit, _ = trained
        y_hat, z = predict(fit, mnir, None, fit.fbar * 1000)
        assert z == pytest.approx(0.0, abs=1e-12)
        assert y_hat == pytest.approx(fit.alpha_hat)

    def test_frequency_invariance(self, trained):
        _, mnir, fit, _ = trained
        x = np.array([1, 0, 3, 2, 0, 5])
        assert predict(fit, mnir, None, x) == pytest.approx(predict(fit, mnir, None, 7 * x))

    def test_zero_slope(self, trained):
        _, mnir, fit, _ = trained
        flat = ForwardFit(2.5, 0.0, fit.sigma2_hat, fit.z_train, fit.sum_z2, fit.n, 0.0, fit.fbar)
        assert predict(flat, mnir, None, [4, 1, 0, 0, 2, 2])[0] == 2.5

    def test_shift_convention_of_loadings(self, trained):
        corpus, mnir, fit, _ = trained
        other = fit_collapsed_mnir(collapse(corpus), baseline=(mnir.baseline + 1) % 6)
        x = np.array([3, 1, 0, 2, 2, 1])
        assert predict(fit, other, None, x)[1] == pytest.approx(predict(fit, mnir, None, x)[1], abs=1e-9)

    def test_zero_total_document(self, trained):
        _, mnir, fit, _ = trained
        with pytest.raises(DegenerateDataError):
            predict(fit, mnir, None, np.zeros(6))

    def test_vocabulary_mismatch(self, trained):
        _, mnir, fit, _ = trained
        with pytest.raises(InputError):
            predict(fit, mnir, None, np.ones(4))
        with pytest.raises(InputError):
            predict_corpus(fit, mnir, SparseCorpus.from_dense([[1, 2]]))

    def test_empty_corpus(self, trained):
        _, mnir, fit, _ = trained
        out = predict_corpus(fit, mnir, SparseCorpus.from_dense(np.zeros((0, 6), dtype=int)))
        assert all(a.size == 0 for a in out)

    def test_missing_fbar(self, trained):
        _, mnir, fit, _ = trained
        bare = ForwardFit(fit.alpha_hat, fit.beta_hat, fit.sigma2_hat, fit.z_train, fit.sum_z2, fit.n)
        with pytest.raises(InputError, match="mean frequency"):
            predict(bare, mnir, None, np.ones(6))
