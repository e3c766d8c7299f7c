"""Symmetric non-causal graphical models.

A double-sided AR model reads ``y(t) = H(z) y(t) + e(t)`` with

    H(z) = H0 + 1/2 * sum_k (Hk z^-k + Hk^T z^k),   k = 1..n

where ``H0`` is symmetric and every ``Hk`` has a zero diagonal.  The support
of ``H(z)`` defines a symmetric directed graph: the pair (l, i) is an edge
when component ``i`` enters the smoothing estimate of component ``l``.

Node indices are 1-based wherever they cross the API boundary (edge sets,
messages, files) and 0-based inside numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

DEFAULT_GRID_SIZE = 2048


class ModelError(ValueError):
    """Raised when a model violates one of its structural invariants."""


class InfeasibleModelError(ModelError):
    """Raised when ``I - H(e^{j theta})`` is not positive definite."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EdgeSet:
    """Symmetric edge set over nodes ``1..m`` without self-loops."""

    m: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ModelError(f"node count must be a positive integer, got {self.m!r}")
        edges = frozenset((int(l), int(i)) for l, i in self.edges)
        for l, i in edges:
            if not (1 <= l <= self.m and 1 <= i <= self.m):
                raise ModelError(f"edge ({l},{i}) has an index outside [1, {self.m}]")
            if l == i:
                raise ModelError(f"self-loop ({l},{l}) not allowed")
            if (i, l) not in edges:
                raise ModelError(f"edge set not symmetric: ({l},{i}) present but ({i},{l}) missing")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, m: int, pairs: Iterable, symmetrize: bool = False) -> "EdgeSet":
        pairs = {tuple(p) for p in pairs}
        if symmetrize:
            pairs |= {(i, l) for l, i in pairs}
        return cls(m, frozenset(pairs))

    @classmethod
    def full(cls, m: int) -> "EdgeSet":
        """The complete graph minus the diagonal."""
        return cls(m, frozenset((l, i) for l in range(1, m + 1)
                                for i in range(1, m + 1) if l != i))

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def undirected(self) -> list[tuple[int, int]]:
        """Sorted 0-based unordered pairs ``(l, i)`` with ``l < i``."""
        return sorted((l - 1, i - 1) for l, i in self.edges if l < i)

    def mask(self) -> np.ndarray:
        """Boolean m x m adjacency matrix."""
        out = np.zeros((self.m, self.m), dtype=bool)
        for l, i in self.edges:
            out[l - 1, i - 1] = True
        return out

    def sorted_pairs(self) -> list[list[int]]:
        return [list(p) for p in sorted(self.edges)]


@dataclass(frozen=True)
class DoubleSidedPoly:
    """Coefficient blocks ``H0..Hn`` of a double-sided matrix polynomial.

    Construction only checks shapes; the structural constraints (symmetric
    ``H0``, zero diagonals, edge support) are checked by :func:`validate`
    so that unconstrained estimates can also be represented.
    """

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim == 2:
            b = b[None]
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] < 1:
            raise ModelError(f"blocks must have shape (n+1, m, m), got {np.shape(self.blocks)}")
        if not np.all(np.isfinite(b)):
            raise ModelError("blocks contain non-finite values")
        object.__setattr__(self, "blocks", _frozen(b))

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def n(self) -> int:
        return self.blocks.shape[0] - 1

    @classmethod
    def zeros(cls, m: int, n: int) -> "DoubleSidedPoly":
        return cls(np.zeros((n + 1, m, m)))

    def stacked(self) -> np.ndarray:
        """``[H0 H1 ... Hn]`` as an m x m(n+1) matrix."""
        return np.hstack(list(self.blocks))

    def scaled(self, factor: float) -> "DoubleSidedPoly":
        return DoubleSidedPoly(self.blocks * factor)


@dataclass(frozen=True)
class DiagonalMAPoly:
    """Per-channel MA polynomials ``a_l(z) = 1 + sum_k a_{l,k} z^-k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2:
            raise ModelError(f"coeffs must have shape (m, p), got {np.shape(self.coeffs)}")
        for l, row in enumerate(c):
            if row.size and np.any(np.abs(np.roots(np.r_[1.0, row])) >= 1.0):
                raise ModelError(f"a_{l + 1}(z) is not minimum phase")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    @property
    def p(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def identity(cls, m: int) -> "DiagonalMAPoly":
        return cls(np.zeros((m, 0)))

    def polynomial(self, l: int) -> np.ndarray:
        """Coefficients ``[1, a_{l,1}, ..., a_{l,p}]`` of channel ``l`` (0-based)."""
        return np.r_[1.0, self.coeffs[l]]


@dataclass(frozen=True)
class NoncausalModel:
    """A validated, feasible non-causal graphical model (AR or ARMA)."""

    h: DoubleSidedPoly
    graph: EdgeSet
    a: Optional[DiagonalMAPoly] = None

    def __post_init__(self):
        problems = validate(self.h, self.graph)
        if problems:
            raise ModelError("; ".join(problems))
        if self.a is not None:
            if self.a.m != self.h.m:
                raise ModelError(f"MA part has dimension {self.a.m}, expected {self.h.m}")
            if self.a.p == 0:
                object.__setattr__(self, "a", None)
        margin = positivity_margin(self.h, max(DEFAULT_GRID_SIZE, 2 * (self.h.n + 1)))
        if margin <= 0:
            raise InfeasibleModelError(f"I - H(z) is not positive definite (margin {margin:.3g})")

    @property
    def m(self) -> int:
        return self.h.m

    @property
    def n(self) -> int:
        return self.h.n

    @property
    def p(self) -> int:
        return 0 if self.a is None else self.a.p


def validate(h: DoubleSidedPoly, g: EdgeSet) -> list[str]:
    """List the structural constraints that ``h`` violates for graph ``g``.

    An empty list means ``H0`` is symmetric, every diagonal is zero and all
    nonzero entries lie on the edge set.
    """
    if h.m != g.m:
        raise ModelError(f"dimension mismatch: polynomial has m={h.m}, graph has m={g.m}")
    report = []
    b = h.blocks
    if not np.array_equal(b[0], b[0].T):
        report.append("H0 not symmetric")
    allowed = g.mask()
    for k in range(h.n + 1):
        diag = np.flatnonzero(np.diag(b[k]))
        if diag.size:
            report.append(f"H{k} has nonzero diagonal at " +
                          ", ".join(f"({d + 1},{d + 1})" for d in diag))
        off = (b[k] != 0) & ~allowed
        np.fill_diagonal(off, False)
        rows, cols = np.nonzero(off)
        if rows.size:
            report.append(f"H{k} has entries outside the edge set at " +
                          ", ".join(f"({r + 1},{c + 1})" for r, c in zip(rows, cols)))
    return report


def h_on_angles(blocks: np.ndarray, thetas) -> np.ndarray:
    """Evaluate ``H(e^{j theta})`` for each angle; returns (len(thetas), m, m)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    blocks = np.asarray(blocks, dtype=float)
    out = np.broadcast_to(blocks[0], (thetas.size,) + blocks.shape[1:]).astype(complex)
    for k in range(1, blocks.shape[0]):
        sym = 0.5 * (blocks[k] + blocks[k].T)
        anti = 0.5 * (blocks[k] - blocks[k].T)
        # 1/2 (Hk e^{-jk th} + Hk^T e^{jk th}) = cos(k th) sym - j sin(k th) anti
        out = out + np.cos(k * thetas)[:, None, None] * sym \
            - 1j * np.sin(k * thetas)[:, None, None] * anti
    return out


def grid_angles(grid_size: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(grid_size) / grid_size


def eval_h(h: DoubleSidedPoly, theta: float) -> np.ndarray:
    """Hermitian matrix ``H(e^{j theta})``."""
    return h_on_angles(h.blocks, [theta])[0]


def positivity_margin(h: DoubleSidedPoly, grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Smallest eigenvalue of ``I - H(e^{j theta})`` over a uniform grid.

    A positive value certifies feasibility on the grid; between grid points
    the true minimum can be lower by at most ``2 pi sum_k k ||Hk|| / grid_size``.
    """
    if grid_size < 2 * (h.n + 1):
        raise ValueError(f"grid_size must be at least {2 * (h.n + 1)}")
    # H(-theta) is the conjugate of H(theta): the upper half circle suffices.
    half = grid_angles(grid_size)[: grid_size // 2 + 1]
    hv = h_on_angles(h.blocks, half)
    return float(np.min(1.0 - np.linalg.eigvalsh(hv)[:, -1]))


def _apply_h(blocks: np.ndarray, data: np.ndarray) -> np.ndarray:
    """``H(z) y(t)`` on the interior samples t = n .. N-n-1 (0-based)."""
    n = blocks.shape[0] - 1
    N = data.shape[1]
    out = blocks[0] @ data[:, n:N - n]
    for k in range(1, n + 1):
        out = out + 0.5 * (blocks[k] @ data[:, n - k:N - n - k]
                           + blocks[k].T @ data[:, n + k:N - n + k])
    return out


def _check_series(h: DoubleSidedPoly, data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] != h.m:
        raise ValueError(f"data must have shape (m={h.m}, N), got {data.shape}")
    if data.shape[1] <= 2 * h.n:
        raise ValueError(f"series too short: need N > 2n = {2 * h.n}, got N={data.shape[1]}")
    return data


def smooth_estimate(h: DoubleSidedPoly, data, l: int) -> np.ndarray:
    """Smoothing estimate of component ``l`` (1-based) from the other components.

    Returns the samples ``t = n+1 .. N-n`` (1-based); the first and last
    ``n`` samples lack the past/future values the two-sided filter needs.
    """
    data = _check_series(h, data)
    if not 1 <= l <= h.m:
        raise ValueError(f"component index {l} outside [1, {h.m}]")
    off = np.array(h.blocks)
    off[:, np.arange(h.m), np.arange(h.m)] = 0.0
    return _apply_h(off, data)[l - 1]


def residual(h: DoubleSidedPoly, data) -> np.ndarray:
    """Innovations ``e(t) = y(t) - H(z) y(t)`` on the interior samples."""
    data = _check_series(h, data)
    n = h.n
    return data[:, n:data.shape[1] - n] - _apply_h(h.blocks, data)
