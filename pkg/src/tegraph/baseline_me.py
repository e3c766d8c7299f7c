"""Maximum-entropy (one-sided vector AR) baseline and the map from any
spectrum to double-sided coefficient blocks."""

from __future__ import annotations

import numpy as np

from .graph_model import DEFAULT_GRID_SIZE, DoubleSidedPoly, grid_angles
from .spectra import CovSequence, SpectrumError, SpectrumGrid, _real_lags, fourier_lags, spectral_sqrt


class ToeplitzError(SpectrumError):
    """The block-Toeplitz matrix of the lags is singular or indefinite."""


def _spd_inverse(v: np.ndarray, what: str) -> np.ndarray:
    v = 0.5 * (v + v.T)
    try:
        c = np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        raise ToeplitzError(f"{what} is not positive definite; block-Toeplitz matrix indefinite")
    if np.min(np.diag(c)) ** 2 <= 1e-13 * np.max(np.diag(v)):
        raise ToeplitzError(f"{what} is numerically singular")
    ci = np.linalg.inv(c)
    return ci.T @ ci


def me_var(r: CovSequence):
    """Order-n maximum-entropy extension of ``R_0..R_n`` (Whittle's recursion).

    Solves the multichannel Yule-Walker equations
    ``R_j = sum_k A_k R_{j-k}``, j = 1..n, for the forward model
    ``y(t) = sum_k A_k y(t-k) + eps(t)``.

    Returns
    -------
    A : ndarray, shape (n, m, m)
        Forward coefficient blocks ``A_1..A_n``.
    sigma : ndarray, shape (m, m)
        Innovation covariance.
    """
    R = r.lags
    n, m = r.n, r.m
    vf = R[0].copy()
    vb = R[0].copy()
    fwd = np.zeros((0, m, m))
    bwd = np.zeros((0, m, m))
    _spd_inverse(vf, "R0")
    for p in range(1, n + 1):
        delta = R[p] - sum(fwd[k - 1] @ R[p - k] for k in range(1, p))
        kf = delta @ _spd_inverse(vb, f"backward error covariance at order {p - 1}")
        kb = delta.T @ _spd_inverse(vf, f"forward error covariance at order {p - 1}")
        new_fwd = np.empty((p, m, m))
        new_bwd = np.empty((p, m, m))
        for k in range(1, p):
            new_fwd[k - 1] = fwd[k - 1] - kf @ bwd[p - k - 1]
            new_bwd[k - 1] = bwd[k - 1] - kb @ fwd[p - k - 1]
        new_fwd[p - 1] = kf
        new_bwd[p - 1] = kb
        fwd, bwd = new_fwd, new_bwd
        vf = vf - kf @ delta.T
        vb = vb - kb @ delta
    _spd_inverse(vf, f"innovation covariance at order {n}")
    return fwd, 0.5 * (vf + vf.T)


def yule_walker_direct(r: CovSequence):
    """Reference solution of the Yule-Walker equations as one block system."""
    n, m = r.n, r.m
    if n == 0:
        return np.zeros((0, m, m)), r.lags[0].copy()
    R = r.lags
    # [A_1 ... A_n] T = [R_1 ... R_n] with T block (k, j) = R_{j-k}
    T = np.empty((n * m, n * m))
    for k in range(n):
        for j in range(n):
            T[k * m:(k + 1) * m, j * m:(j + 1) * m] = R[j - k] if j >= k else R[k - j].T
    rhs = np.hstack([R[j] for j in range(1, n + 1)])
    A = np.linalg.solve(T.T, rhs.T).T
    blocks = np.stack([A[:, k * m:(k + 1) * m] for k in range(n)])
    sigma = R[0] - sum(blocks[k] @ R[k + 1].T for k in range(n))
    return blocks, 0.5 * (sigma + sigma.T)


def me_spectrum(A: np.ndarray, sigma: np.ndarray, grid_size: int = DEFAULT_GRID_SIZE) -> SpectrumGrid:
    """``(I - sum A_k e^{-jk theta})^{-1} Sigma (I - sum A_k e^{-jk theta})^{-*}``."""
    m = sigma.shape[0]
    theta = grid_angles(grid_size)
    poly = np.broadcast_to(np.eye(m, dtype=complex), (grid_size, m, m)).copy()
    for k in range(1, A.shape[0] + 1):
        poly -= np.exp(-1j * k * theta)[:, None, None] * A[k - 1]
    inv = np.linalg.inv(poly)
    phi = inv @ sigma @ np.conj(np.swapaxes(inv, 1, 2))
    return SpectrumGrid(0.5 * (phi + np.conj(np.swapaxes(phi, 1, 2))))


def extract_h(phi: SpectrumGrid, n: int) -> DoubleSidedPoly:
    """Double-sided blocks ``H0..Hn`` of ``I - Phi^{-1/2}``.

    Exact when ``phi = (I - H)^{-2}`` with ``H`` of order at most ``n``;
    otherwise a truncation whose diagonal and support are unconstrained.
    """
    if phi.grid_size < 4 * (n + 1):
        raise ValueError(f"grid_size {phi.grid_size} too small for order {n}")
    g = np.eye(phi.m) - spectral_sqrt(phi, -0.5)
    c = _real_lags(fourier_lags(g, n), "extract_h")
    blocks = np.empty_like(c)
    blocks[0] = 0.5 * (c[0] + c[0].T)
    # coefficient of e^{-jk theta} in H is Hk / 2
    blocks[1:] = 2.0 * c[1:]
    return DoubleSidedPoly(blocks)


def estimate_me(r: CovSequence, grid_size: int = DEFAULT_GRID_SIZE) -> DoubleSidedPoly:
    """ME estimate mapped to the double-sided parametrization."""
    A, sigma = me_var(r)
    return extract_h(me_spectrum(A, sigma, grid_size), r.n)
