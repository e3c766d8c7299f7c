import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tegraph.graph_model import (
    DiagonalMAPoly,
    DoubleSidedPoly,
    EdgeSet,
    InfeasibleModelError,
    ModelError,
    NoncausalModel,
    eval_h,
    positivity_margin,
    residual,
    smooth_estimate,
    validate,
)
from tegraph.simulate import random_model, sample_trajectory

from conftest import pair_poly


def fig1_poly():
    """m=3 example: only (1,3) and (2,3) couple, in both directions."""
    b = np.zeros((2, 3, 3))
    b[0, 0, 2] = b[0, 2, 0] = 0.2
    b[0, 1, 2] = b[0, 2, 1] = -0.1
    b[1, 0, 2], b[1, 2, 0] = 0.15, 0.05
    b[1, 1, 2], b[1, 2, 1] = 0.1, -0.2
    return DoubleSidedPoly(b)


FIG1_EDGES = EdgeSet.from_pairs(3, [(1, 3), (3, 1), (2, 3), (3, 2)])


class TestEdgeSet:
    def test_rejects_self_loop(self):
        with pytest.raises(ModelError, match="self-loop"):
            EdgeSet(3, frozenset({(2, 2)}))

    def test_rejects_asymmetric(self):
        with pytest.raises(ModelError, match="not symmetric"):
            EdgeSet(3, frozenset({(1, 2)}))

    def test_rejects_out_of_range(self):
        with pytest.raises(ModelError, match="outside"):
            EdgeSet(3, frozenset({(1, 4), (4, 1)}))

    def test_full_graph(self):
        g = EdgeSet.full(4)
        assert len(g) == 12
        assert g.undirected() == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        assert not g.mask().diagonal().any()


class TestValidate:
    def test_fig1_example_is_valid(self):
        assert validate(fig1_poly(), FIG1_EDGES) == []

    def test_zero_polynomial_is_valid(self):
        assert validate(DoubleSidedPoly.zeros(4, 2), EdgeSet(4)) == []

    def test_asymmetric_h0(self):
        h = DoubleSidedPoly(np.array([[[0.0, 0.3], [0.1, 0.0]]]))
        report = validate(h, EdgeSet.full(2))
        assert report == ["H0 not symmetric"]

    def test_flags_diagonal_and_support(self):
        b = np.zeros((2, 3, 3))
        b[1, 1, 1] = 0.5
        b[1, 0, 1] = 0.2
        report = validate(DoubleSidedPoly(b), FIG1_EDGES)
        assert any("H1 has nonzero diagonal at (2,2)" in r for r in report)
        assert any("outside the edge set at (1,2)" in r for r in report)

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError, match="dimension mismatch"):
            validate(DoubleSidedPoly.zeros(3, 1), EdgeSet(2))

    def test_m1_only_zero_is_valid(self):
        assert validate(DoubleSidedPoly.zeros(1, 2), EdgeSet(1)) == []
        assert validate(DoubleSidedPoly(np.full((1, 1, 1), 0.3)), EdgeSet(1)) != []


class TestEvalH:
    def test_zero(self):
        for theta in (0.0, 1.0, np.pi):
            assert np.array_equal(eval_h(DoubleSidedPoly.zeros(3, 2), theta), np.zeros((3, 3)))

    def test_constant_polynomial(self):
        np.testing.assert_array_equal(eval_h(pair_poly(), np.pi / 3), [[0, 0.5], [0.5, 0]])

    def test_m1_forced_zero(self):
        assert eval_h(DoubleSidedPoly.zeros(1, 3), 0.7)[0, 0] == 0

    def test_matches_definition(self, rng):
        b = rng.standard_normal((3, 4, 4))
        theta = 0.37
        want = b[0] + 0.5 * sum(b[k] * np.exp(-1j * k * theta) + b[k].T * np.exp(1j * k * theta)
                                for k in (1, 2))
        np.testing.assert_allclose(eval_h(DoubleSidedPoly(b), theta), want, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), m=st.integers(1, 6), n=st.integers(0, 4),
           theta=st.floats(-10, 10))
    def test_hermitian_and_conjugate_symmetric(self, seed, m, n, theta):
        b = np.random.default_rng(seed).standard_normal((n + 1, m, m))
        b[0] = b[0] + b[0].T
        h = DoubleSidedPoly(b)
        v = eval_h(h, theta)
        np.testing.assert_allclose(v, v.conj().T, atol=1e-13)
        np.testing.assert_allclose(eval_h(h, -theta), v.conj(), atol=1e-13)


class TestPositivityMargin:
    def test_zero(self):
        assert positivity_margin(DoubleSidedPoly.zeros(3, 2)) == 1.0

    def test_pair(self):
        assert positivity_margin(pair_poly(0.5)) == pytest.approx(0.5, abs=1e-14)
        assert positivity_margin(pair_poly(1.2)) == pytest.approx(-0.2, abs=1e-14)

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            positivity_margin(DoubleSidedPoly.zeros(2, 3), grid_size=7)

    def test_grid_refinement_within_lipschitz_bound(self, rng):
        for _ in range(10):
            b = rng.standard_normal((3, 4, 4))
            b[0] = b[0] + b[0].T
            b[:, np.arange(4), np.arange(4)] = 0
            h = DoubleSidedPoly(b)
            G = 64
            bound = 2 * np.pi * sum(k * np.linalg.norm(b[k], 2) for k in range(3)) / G
            assert abs(positivity_margin(h, G) - positivity_margin(h, 2 * G)) < bound


class TestFilters:
    def test_zero_model(self, rng):
        y = rng.standard_normal((3, 20))
        h = DoubleSidedPoly.zeros(3, 2)
        assert np.array_equal(smooth_estimate(h, y, 2), np.zeros(16))
        np.testing.assert_array_equal(residual(h, y), y[:, 2:-2])

    def test_pair_smoothing(self):
        y = np.array([[9.0, 9.0, 9.0], [1.0, 2.0, 3.0]])
        np.testing.assert_allclose(smooth_estimate(pair_poly(), y, 1), [0.5, 1.0, 1.5])

    def test_fig1_component1_ignores_component2(self, rng):
        y = rng.standard_normal((3, 30))
        y2 = y.copy()
        y2[1] = rng.standard_normal(30)
        h = fig1_poly()
        np.testing.assert_array_equal(smooth_estimate(h, y, 1), smooth_estimate(h, y2, 1))
        assert not np.allclose(smooth_estimate(h, y, 3), smooth_estimate(h, y2, 3))

    def test_minimum_length(self, rng):
        h = fig1_poly()
        assert residual(h, rng.standard_normal((3, 3))).shape == (3, 1)
        with pytest.raises(ValueError, match="too short"):
            residual(h, rng.standard_normal((3, 2)))
        with pytest.raises(ValueError, match="too short"):
            smooth_estimate(h, rng.standard_normal((3, 2)), 1)

    def test_residual_is_data_minus_smoothing(self, rng):
        model = random_model(5, 2, 0.5, 0.8, seed=3)
        y = rng.standard_normal((5, 40))
        e = residual(model.h, y)
        for l in range(1, 6):
            assert np.array_equal(e[l - 1], y[l - 1, 2:-2] - smooth_estimate(model.h, y, l))

    def test_whiteness_on_true_model(self):
        model = random_model(4, 2, 0.6, 0.9, seed=11)
        N = 50000
        e = residual(model.h, sample_trajectory(model, N, seed=5))
        C = e @ e.T / e.shape[1]
        assert np.max(np.abs(C - np.eye(4))) < 5 / np.sqrt(N)


class TestModelTypes:
    def test_noncausal_model_rejects_infeasible(self):
        with pytest.raises(InfeasibleModelError):
            NoncausalModel(pair_poly(1.2), EdgeSet.full(2))

    def test_noncausal_model_rejects_support_violation(self):
        with pytest.raises(ModelError, match="outside the edge set"):
            NoncausalModel(pair_poly(0.5), EdgeSet(2))

    def test_ma_minimum_phase(self):
        assert DiagonalMAPoly([[0.5], [-0.3]]).p == 1
        with pytest.raises(ModelError, match="minimum phase"):
            DiagonalMAPoly([[0.5], [1.5]])

    def test_blocks_are_immutable(self):
        h = pair_poly()
        with pytest.raises(ValueError):
            h.blocks[0, 0, 1] = 1.0
