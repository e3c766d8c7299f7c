"""Spectral densities sampled on the unit circle and their covariance lags.

Conventions: ``Phi(theta) = sum_k R_k e^{-j k theta}`` with
``R_k = E[y(t+k) y(t)^T]`` and ``R_{-k} = R_k^T``; integrals over the circle
use the normalized measure and are approximated by the mean over the
uniform grid ``theta_j = 2 pi j / G``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph_model import (
    DEFAULT_GRID_SIZE,
    DoubleSidedPoly,
    InfeasibleModelError,
    grid_angles,
    h_on_angles,
)

EIG_FLOOR = 1e-14


class SpectrumError(ValueError):
    pass


class AliasingError(SpectrumError):
    pass


@dataclass(frozen=True)
class SpectrumGrid:
    """Hermitian positive definite samples of a spectral density."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise SpectrumError(f"values must have shape (G, m, m), got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def thetas(self) -> np.ndarray:
        return grid_angles(self.grid_size)

    @classmethod
    def identity(cls, m: int, grid_size: int = DEFAULT_GRID_SIZE) -> "SpectrumGrid":
        return cls(np.broadcast_to(np.eye(m, dtype=complex), (grid_size, m, m)))

    @classmethod
    def constant(cls, matrix, grid_size: int = DEFAULT_GRID_SIZE) -> "SpectrumGrid":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(np.broadcast_to(matrix, (grid_size,) + matrix.shape))

    def check(self, tol: float = 1e-10) -> list[str]:
        """Violated invariants (Hermitian, positive definite, conjugate symmetric)."""
        v = self.values
        scale = max(1.0, float(np.max(np.abs(v))))
        problems = []
        if np.max(np.abs(v - np.conj(np.swapaxes(v, 1, 2)))) > tol * scale:
            problems.append("samples not Hermitian")
        elif np.min(np.linalg.eigvalsh(v)) <= 0:
            problems.append("samples not positive definite")
        mirrored = np.conj(v[(-np.arange(self.grid_size)) % self.grid_size])
        if np.max(np.abs(v - mirrored)) > tol * scale:
            problems.append("samples not conjugate symmetric")
        return problems

    def to_csv(self, path) -> None:
        """Write theta, the real parts and the imaginary parts (row-major)."""
        m = self.m
        header = ["theta"]
        header += [f"re_{a + 1}_{b + 1}" for a in range(m) for b in range(m)]
        header += [f"im_{a + 1}_{b + 1}" for a in range(m) for b in range(m)]
        flat = self.values.reshape(self.grid_size, m * m)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for theta, row in zip(self.thetas, flat):
                w.writerow([repr(float(theta))] + [repr(float(x)) for x in row.real]
                           + [repr(float(x)) for x in row.imag])


@dataclass(frozen=True)
class CovSequence:
    """Covariance lags ``R_0 .. R_n``."""

    lags: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.lags, dtype=float)
        if r.ndim == 2:
            r = r[None]
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise SpectrumError(f"lags must have shape (n+1, m, m), got {np.shape(self.lags)}")
        if not np.allclose(r[0], r[0].T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(r[0])))):
            raise SpectrumError("R0 not symmetric")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "lags", r)

    @property
    def m(self) -> int:
        return self.lags.shape[1]

    @property
    def n(self) -> int:
        return self.lags.shape[0] - 1

    def truncated(self, n: int) -> "CovSequence":
        return CovSequence(self.lags[: n + 1])

    def toeplitz(self) -> np.ndarray:
        """Block-Toeplitz matrix with (i, j) block ``R_{i-j}``."""
        n, m = self.n, self.m
        out = np.empty(((n + 1) * m, (n + 1) * m))
        for i in range(n + 1):
            for j in range(n + 1):
                blk = self.lags[i - j] if i >= j else self.lags[j - i].T
                out[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk
        return out

    def is_positive_semidefinite(self, tol: float = 1e-12) -> bool:
        t = self.toeplitz()
        return bool(np.min(np.linalg.eigvalsh(t)) >= -tol * max(1.0, np.max(np.abs(t))))


def _hermitian_eig(values: np.ndarray, what: str):
    lam, vec = np.linalg.eigh(values)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.min(lam) <= -1e-10 * scale or (np.min(lam) <= 0 and np.max(lam) <= 0):
        j = int(np.argmin(lam.min(axis=1)))
        raise SpectrumError(f"{what}: sample {j} is not positive definite")
    return np.maximum(lam, EIG_FLOOR), vec


def _matrix_function(lam: np.ndarray, vec: np.ndarray, f) -> np.ndarray:
    return np.einsum("gab,gb,gcb->gac", vec, f(lam), vec.conj())


def spectrum_from_h(h: DoubleSidedPoly, grid_size: int = DEFAULT_GRID_SIZE) -> SpectrumGrid:
    """Model spectrum ``Phi = (I - H)^{-2}`` on the uniform grid."""
    thetas = grid_angles(grid_size)
    lam, vec = np.linalg.eigh(np.eye(h.m) - h_on_angles(h.blocks, thetas))
    worst = lam.min(axis=1)
    if worst.min() <= 0:
        j = int(np.argmin(worst))
        raise InfeasibleModelError(
            f"I - H(e^(j theta)) not positive definite at theta={thetas[j]:.6f} "
            f"(smallest eigenvalue {worst[j]:.3g})")
    return SpectrumGrid(_matrix_function(lam, vec, lambda x: x ** -2.0))


def fourier_lags(values: np.ndarray, n: int) -> np.ndarray:
    """``C_k = mean_j values_j e^{j k theta_j}`` for k = 0..n (complex)."""
    return np.fft.ifft(values, axis=0)[: n + 1]


def _real_lags(c: np.ndarray, what: str) -> np.ndarray:
    ref = float(np.linalg.norm(c[0]))
    for k, blk in enumerate(c):
        if np.max(np.abs(blk.imag)) > 1e-8 * max(float(np.linalg.norm(blk)), ref):
            raise AliasingError(
                f"{what}: lag {k} has imaginary residue {np.max(np.abs(blk.imag)):.3g}; "
                "the spectrum is not conjugate symmetric or the grid is too coarse, "
                "try a larger grid_size")
    return c.real.copy()


def cov_from_spectrum(phi: SpectrumGrid, n: int) -> CovSequence:
    """Covariance lags ``R_k = int Phi e^{j k theta}`` for k = 0..n."""
    if phi.grid_size < 4 * (n + 1):
        raise ValueError(f"grid_size {phi.grid_size} too small for {n} lags; need >= {4 * (n + 1)}")
    r = _real_lags(fourier_lags(phi.values, n), "cov_from_spectrum")
    r[0] = 0.5 * (r[0] + r[0].T)
    return CovSequence(r)


def sample_cov(data, n: int) -> CovSequence:
    """Biased sample covariances ``R_k = 1/N sum_{t=1}^{N-k} y(t+k) y(t)^T``.

    ``data`` is m x N.  The 1/N normalization (rather than 1/(N-k)) keeps the
    block-Toeplitz matrix of the lags positive semidefinite.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[None]
    N = y.shape[1]
    if N <= n:
        raise ValueError(f"need more than n={n} samples, got N={N}")
    r = np.empty((n + 1, y.shape[0], y.shape[0]))
    for k in range(n + 1):
        r[k] = y[:, k:] @ y[:, :N - k].T / N
    r[0] = 0.5 * (r[0] + r[0].T)
    return CovSequence(r)


def d_hellinger(phi: SpectrumGrid) -> float:
    """Squared transportation (Hellinger) distance between ``phi`` and white noise.

    The minimum of ``tr int (W - I)(W - I)^*`` over factors ``W W^* = Phi``
    is reached at the Hermitian square root, giving
    ``tr int (Phi + I - 2 Phi^{1/2})``.  The distance itself is the square
    root of the returned value.
    """
    lam, _ = _hermitian_eig(phi.values, "d_hellinger")
    return float(np.mean(np.sum((np.sqrt(lam) - 1.0) ** 2, axis=1)))


def d_rel(phi: SpectrumGrid) -> float:
    """Relative entropy rate ``1/2 {int (log det Phi^{-1} + tr Phi) - m}``."""
    lam, _ = _hermitian_eig(phi.values, "d_rel")
    return float(0.5 * np.mean(np.sum(lam - 1.0 - np.log(lam), axis=1)))


def spectral_sqrt(phi: SpectrumGrid, power: float = 0.5) -> np.ndarray:
    """Pointwise Hermitian power ``Phi^power`` of a positive definite spectrum."""
    lam, vec = _hermitian_eig(phi.values, "spectral_sqrt")
    return _matrix_function(lam, vec, lambda x: x ** power)
