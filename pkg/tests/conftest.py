import numpy as np
import pytest

from tegraph.graph_model import DoubleSidedPoly, EdgeSet, NoncausalModel, positivity_margin

# closed form (I - H0)^{-2} for H0 = [[0, .5], [.5, 0]]
PAIR_R0 = np.array([[1.25, 1.0], [1.0, 1.25]]) / 0.5625


def pair_poly(h=0.5) -> DoubleSidedPoly:
    return DoubleSidedPoly(np.array([[[0.0, h], [h, 0.0]]]))


def random_sparse(m, n, rng, n_pairs=None, target=0.8):
    """Random feasible model on a random edge set (not the simulate module)."""
    pairs = [(l, i) for l in range(m) for i in range(l + 1, m)]
    n_pairs = n_pairs or max(1, len(pairs) // 3)
    idx = rng.choice(len(pairs), size=n_pairs, replace=False)
    blocks = np.zeros((n + 1, m, m))
    for q in idx:
        l, i = pairs[q]
        v = rng.standard_normal(2 * n + 1)
        blocks[0, l, i] = blocks[0, i, l] = v[0]
        for k in range(1, n + 1):
            blocks[k, l, i], blocks[k, i, l] = v[2 * k - 1], v[2 * k]
    h = DoubleSidedPoly(blocks)
    h = h.scaled(target / (1.0 - positivity_margin(h)))
    g = EdgeSet.from_pairs(m, [(pairs[q][0] + 1, pairs[q][1] + 1) for q in idx], symmetrize=True)
    return NoncausalModel(h, g)


@pytest.fixture
def pair_model():
    return NoncausalModel(pair_poly(), EdgeSet.full(2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
