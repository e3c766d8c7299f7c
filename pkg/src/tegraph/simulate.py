"""Random ground-truth models and exact trajectory sampling."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .graph_model import (
    DEFAULT_GRID_SIZE,
    DiagonalMAPoly,
    DoubleSidedPoly,
    EdgeSet,
    InfeasibleModelError,
    ModelError,
    NoncausalModel,
    positivity_margin,
)


def edge_count(m: int, density: float) -> int:
    """Number of unordered node pairs for a given fraction of nonnull entries."""
    # round first so that e.g. 0.2 * 30 / 2 = 3.0000000000000004 stays 3
    return math.ceil(round(density * m * (m - 1) / 2, 9))


def random_model(m: int, n: int, density: float, feasibility_target: float = 0.9,
                 seed=None) -> NoncausalModel:
    """Random sparse double-sided AR model.

    ``ceil(density * m(m-1)/2)`` node pairs are drawn uniformly; their entries
    in ``H0..Hn`` are standard normal (``H0`` symmetrized), and all blocks are
    rescaled so that the largest eigenvalue of ``H(e^{j theta})`` over the grid
    equals ``feasibility_target``.
    """
    if not 0 < density <= 1:
        raise ModelError(f"density must lie in (0, 1], got {density}")
    if density * m * (m - 1) < 2:
        raise ModelError(f"density {density} gives no edge for m={m}")
    if not 0 < feasibility_target < 1:
        raise ModelError(f"feasibility_target must lie in (0, 1), got {feasibility_target}")
    rng = np.random.default_rng(seed)
    pairs = [(l, i) for l in range(m) for i in range(l + 1, m)]
    chosen = sorted(rng.choice(len(pairs), size=edge_count(m, density), replace=False))
    rows = np.array([pairs[c][0] for c in chosen])
    cols = np.array([pairs[c][1] for c in chosen])
    blocks = np.zeros((n + 1, m, m))
    for k in range(n + 1):
        blocks[k, rows, cols] = rng.standard_normal(rows.size)
        blocks[k, cols, rows] = rng.standard_normal(rows.size)
    blocks[0] = 0.5 * (blocks[0] + blocks[0].T)
    h = DoubleSidedPoly(blocks)
    top = 1.0 - positivity_margin(h, DEFAULT_GRID_SIZE)
    h = h.scaled(feasibility_target / top)
    graph = EdgeSet.from_pairs(m, [(l + 1, i + 1) for l, i in zip(rows, cols)], symmetrize=True)
    return NoncausalModel(h, graph)


def reflection_to_poly(kappa) -> np.ndarray:
    """Step-up recursion: reflection coefficients -> ``[a_1, ..., a_p]``.

    ``|kappa_i| < 1`` for all i yields a minimum-phase polynomial.
    """
    a = np.zeros(0)
    for k in kappa:
        a = np.r_[a + k * a[::-1], k]
    return a


def random_arma(m: int, n: int, p: int, density: float, feasibility_target: float = 0.9,
                seed=None) -> NoncausalModel:
    """:func:`random_model` plus a random minimum-phase diagonal MA part of order ``p``."""
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    if p == 0:
        return random_model(m, n, density, feasibility_target, ss)
    ar_seed, ma_seed = ss.spawn(2)
    base = random_model(m, n, density, feasibility_target, ar_seed)
    rng = np.random.default_rng(ma_seed)
    kappa = rng.uniform(-0.9, 0.9, size=(m, p))
    a = DiagonalMAPoly(np.array([reflection_to_poly(row) for row in kappa]))
    return NoncausalModel(base.h, base.graph, a)


def default_burn_in(n: int) -> int:
    return max(50, 10 * n)


def _banded_operator(h: DoubleSidedPoly, length: int) -> np.ndarray:
    """Lower banded storage of the block-banded matrix of ``I - H(z)``.

    Block (t, t) is ``I - H0``, block (t+k, t) is ``-Hk/2`` and block
    (t, t+k) is ``-Hk^T/2``; samples are stacked as ``t * m + component``.
    """
    m, n = h.m, h.n
    size = length * m
    ab = np.zeros((m * (n + 1), size))
    blocks = [np.eye(m) - h.blocks[0]] + [-0.5 * h.blocks[k] for k in range(1, n + 1)]
    for k, blk in enumerate(blocks):
        for a in range(m):
            for b in range(m):
                d = k * m + a - b
                if d < 0:
                    continue
                # column s*m + b, row (s+k)*m + a, for s = 0 .. length-k-1
                ab[d, b:(length - k) * m:m] = blk[a, b]
    return ab


def sample_trajectory(model: NoncausalModel, N: int, seed=None,
                      burn_in: Optional[int] = None) -> np.ndarray:
    """Draw an m x N trajectory of the model driven by unit white noise.

    Solves the banded system ``T x = e`` over ``N + p + 2B`` samples, keeps
    the middle ``N + p`` and, for ARMA models, applies the MA part
    ``y_l(t) = xi_l(t) + sum_k a_{l,k} xi_l(t-k)``.

    The noise for the kept window and for each burn-in side come from
    separate streams, with burn-in noise ordered outward from the window, so
    changing ``burn_in`` leaves the noise of the kept samples unchanged.
    """
    if N < 1:
        raise ValueError("N must be positive")
    m, n, p = model.m, model.n, model.p
    B = default_burn_in(n) if burn_in is None else int(burn_in)
    keep = N + p
    length = keep + 2 * B
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_mid, s_pre, s_post = (np.random.default_rng(s) for s in ss.spawn(3))
    e = np.empty((length, m))
    e[B:B + keep] = s_mid.standard_normal((keep, m))
    e[:B] = s_pre.standard_normal((B, m))[::-1]
    e[B + keep:] = s_post.standard_normal((B, m))
    ab = _banded_operator(model.h, length)
    try:
        cb = cholesky_banded(ab, lower=True)
    except LinAlgError as exc:
        raise InfeasibleModelError(f"banded operator of I - H(z) is not positive definite: {exc}")
    x = cho_solve_banded((cb, True), e.reshape(-1)).reshape(length, m)
    xi = x[B:B + keep].T
    if p == 0:
        return np.ascontiguousarray(xi)
    y = np.empty((m, N))
    for l in range(m):
        poly = model.a.polynomial(l)
        y[l] = np.convolve(xi[l], poly, mode="valid")
    return y
