import numpy as np
import pytest

from tegraph.graph_model import DoubleSidedPoly, EdgeSet, InfeasibleModelError, NoncausalModel, positivity_margin
from tegraph.simulate import (
    default_burn_in,
    edge_count,
    random_arma,
    random_model,
    reflection_to_poly,
    sample_trajectory,
)
from tegraph.spectra import cov_from_spectrum, sample_cov, spectrum_from_h

from conftest import PAIR_R0, pair_poly


class TestRandomModel:
    def test_full_scale_dimensions(self):
        model = random_model(15, 2, 0.1, 0.9, seed=0)
        assert edge_count(15, 0.1) == 11
        assert len(model.graph.undirected()) == 11
        assert positivity_margin(model.h) == pytest.approx(0.1, abs=1e-12)

    def test_single_edge(self):
        model = random_model(4, 1, 1 / 6, 0.5, seed=1)
        assert len(model.graph) == 2

    def test_deterministic(self):
        a = random_model(8, 2, 0.2, seed=42)
        b = random_model(8, 2, 0.2, seed=42)
        assert np.array_equal(a.h.blocks, b.h.blocks) and a.graph == b.graph
        assert not np.array_equal(a.h.blocks, random_model(8, 2, 0.2, seed=43).h.blocks)

    def test_structure(self):
        model = random_model(6, 2, 0.4, seed=3)
        b = model.h.blocks
        assert np.array_equal(b[0], b[0].T)
        assert not b[:, np.arange(6), np.arange(6)].any()
        assert not b[:, ~model.graph.mask()].any()

    @pytest.mark.parametrize("density", [0.0, 1.5, 0.01])
    def test_degenerate_density(self, density):
        with pytest.raises(ValueError):
            random_model(5, 1, density, seed=0)

    def test_bad_target(self):
        with pytest.raises(ValueError):
            random_model(5, 1, 0.5, feasibility_target=1.0, seed=0)


class TestRandomArma:
    def test_p0_matches_random_model(self):
        a = random_arma(6, 2, 0, 0.3, 0.9, seed=5)
        b = random_model(6, 2, 0.3, 0.9, seed=5)
        assert np.array_equal(a.h.blocks, b.h.blocks) and a.a is None

    def test_p1_bound(self):
        for seed in range(10):
            model = random_arma(6, 2, 1, 0.3, 0.9, seed=seed)
            assert np.all(np.abs(model.a.coeffs) < 0.9)

    def test_full_scale_arma(self):
        model = random_arma(15, 2, 1, 0.1, 0.9, seed=0)
        assert model.p == 1 and model.m == 15

    def test_reflection_to_poly_stable(self, rng):
        for _ in range(20):
            poly = reflection_to_poly(rng.uniform(-0.9, 0.9, 4))
            assert np.all(np.abs(np.roots(np.r_[1.0, poly])) < 1)


class TestSampleTrajectory:
    def test_zero_model_is_white_noise(self):
        model = NoncausalModel(DoubleSidedPoly.zeros(3, 2), EdgeSet(3))
        y = sample_trajectory(model, 100, seed=1)
        assert y.shape == (3, 100)
        # T = I, so output is the noise itself; the kept samples do not depend on burn-in
        np.testing.assert_array_equal(y, sample_trajectory(model, 100, seed=1, burn_in=300))

    def test_deterministic(self):
        model = random_arma(4, 1, 1, 0.5, seed=2)
        assert np.array_equal(sample_trajectory(model, 500, seed=9), sample_trajectory(model, 500, seed=9))

    def test_pair_fidelity(self):
        model = NoncausalModel(pair_poly(), EdgeSet.full(2))
        y = sample_trajectory(model, 100_000, seed=2024)
        np.testing.assert_allclose(sample_cov(y, 0).lags[0], PAIR_R0, atol=0.05)

    def test_infeasible_factorization_fails(self):
        model = object.__new__(NoncausalModel)
        object.__setattr__(model, "h", pair_poly(1.5))
        object.__setattr__(model, "graph", EdgeSet.full(2))
        object.__setattr__(model, "a", None)
        with pytest.raises(InfeasibleModelError):
            sample_trajectory(model, 100, seed=0)

    def test_empirical_lags_converge(self):
        model = random_model(3, 1, 0.7, feasibility_target=0.5, seed=4)
        N = 200_000
        exact = cov_from_spectrum(spectrum_from_h(model.h), 1).lags
        emp = sample_cov(sample_trajectory(model, N, seed=11), 1).lags
        assert np.max(np.abs(emp - exact)) < 10 / np.sqrt(N)

    def test_burn_in_sufficient(self):
        model = random_model(5, 2, 0.4, seed=6)
        B = default_burn_in(2)
        a = sample_cov(sample_trajectory(model, 10_000, seed=3, burn_in=B), 2).lags
        b = sample_cov(sample_trajectory(model, 10_000, seed=3, burn_in=2 * B), 2).lags
        assert np.max(np.abs(a - b)) < 1e-3

    def test_arma_output_is_ma_filtered(self):
        model = random_arma(3, 1, 1, 0.7, seed=8)
        y = sample_trajectory(model, 5000, seed=1)
        ar = NoncausalModel(model.h, model.graph)
        y_ar = sample_trajectory(ar, 5000, seed=1)
        assert not np.allclose(y, y_ar)
