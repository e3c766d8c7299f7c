import numpy as np
import pytest

from tegraph.baseline_me import (
    ToeplitzError,
    estimate_me,
    extract_h,
    me_spectrum,
    me_var,
    yule_walker_direct,
)
from tegraph.simulate import random_model, sample_trajectory
from tegraph.spectra import CovSequence, SpectrumGrid, cov_from_spectrum, sample_cov, spectrum_from_h

from conftest import random_sparse


def var1_lags(rng, m, N=4000):
    A = rng.standard_normal((m, m))
    A *= 0.6 / np.max(np.abs(np.linalg.eigvals(A)))
    y = np.zeros((m, N))
    e = rng.standard_normal((m, N))
    for t in range(1, N):
        y[:, t] = A @ y[:, t - 1] + e[:, t]
    return y


class TestMeVar:
    def test_scalar_ar1(self):
        A, sigma = me_var(CovSequence(np.array([[[4 / 3]], [[2 / 3]]])))
        assert A[0, 0, 0] == pytest.approx(0.5, abs=1e-14)
        assert sigma[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_white_noise(self):
        lags = np.zeros((3, 2, 2))
        lags[0] = np.eye(2)
        A, sigma = me_var(CovSequence(lags))
        assert not A.any()
        np.testing.assert_array_equal(sigma, np.eye(2))

    @pytest.mark.parametrize("seed", range(4))
    def test_moment_matching(self, seed):
        rng = np.random.default_rng(seed)
        r = sample_cov(var1_lags(rng, 3), 1)
        A, sigma = me_var(r)
        back = cov_from_spectrum(me_spectrum(A, sigma), 1).lags
        np.testing.assert_allclose(back, r.lags, rtol=0, atol=1e-8)

    def test_moment_matching_higher_order(self, rng):
        r = sample_cov(sample_trajectory(random_model(4, 2, 0.5, seed=1), 3000, seed=2), 3)
        A, sigma = me_var(r)
        np.testing.assert_allclose(cov_from_spectrum(me_spectrum(A, sigma), 3).lags, r.lags,
                                   rtol=0, atol=1e-8)

    @pytest.mark.parametrize("seed", range(12))
    def test_levinson_equals_direct(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        r = sample_cov(rng.standard_normal((m, 60)), n)
        A1, s1 = me_var(r)
        A2, s2 = yule_walker_direct(r)
        np.testing.assert_allclose(A1, A2, rtol=0, atol=1e-10)
        np.testing.assert_allclose(s1, s2, rtol=0, atol=1e-10)

    def test_indefinite_rejected(self):
        with pytest.raises(ToeplitzError):
            me_var(CovSequence(np.array([[[1.0]], [[1.5]]])))

    def test_singular_rejected(self):
        with pytest.raises(ToeplitzError):
            me_var(CovSequence(np.array([[[1.0]], [[1.0]]])))


class TestExtractH:
    def test_identity(self):
        h = extract_h(SpectrumGrid.identity(3, 64), 2)
        np.testing.assert_allclose(h.blocks, 0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(6))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(2, 7)), int(rng.integers(0, 3))
        h = random_sparse(m, n, rng, target=0.9).h
        back = extract_h(spectrum_from_h(h), n)
        np.testing.assert_allclose(back.blocks, h.blocks, rtol=0, atol=1e-8)

    def test_me_estimate_has_free_diagonal(self):
        model = random_model(4, 2, 0.5, seed=3)
        r = sample_cov(sample_trajectory(model, 2000, seed=4), 2)
        h = estimate_me(r)
        assert np.abs(h.blocks[1:, np.arange(4), np.arange(4)]).max() > 1e-6

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            extract_h(SpectrumGrid.identity(2, 8), 3)
