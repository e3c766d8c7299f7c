"""Maximum transportation-entropy covariance extension via its convex dual.

The dual objective over edge-supported coefficient blocks is

    J(H) = tr int [(I - H)^{-1} - I] - sum_k tr(Hk^T Rk)

and its minimizer gives the spectrum ``Phi = (I - H)^{-2}`` whose lags match
``Rk`` on every edge of the graph.  ``J`` is convex on the feasible set
``I - H(e^{j theta}) > 0``; it blows up at the boundary, which keeps the
iterates of a descent method inside.

Free parameters: one per unordered edge {l, i} for the symmetric ``H0``;
two per unordered edge (entries (l, i) and (i, l)) for each ``Hk``, k >= 1.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .graph_model import DEFAULT_GRID_SIZE, DoubleSidedPoly, EdgeSet, InfeasibleModelError, grid_angles
from .spectra import CovSequence

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """The dual solve stopped without meeting the stationarity tolerance.

    ``h`` and ``report`` hold the last iterate and its diagnostics.
    """

    def __init__(self, message, h=None, report=None):
        super().__init__(message)
        self.h = h
        self.report = report


class IterationLimitError(ConvergenceError):
    pass


class DualDivergenceError(ConvergenceError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    grid_size: int = DEFAULT_GRID_SIZE
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    feasibility_floor: float = 1e-9
    line_search_shrink: float = 0.5
    memory: int = 20
    armijo: float = 1e-4
    max_backtracks: int = 60
    divergence_margin: float = 1e-6

    def __post_init__(self):
        for name in ("grid_size", "max_iterations", "gradient_tolerance", "feasibility_floor",
                     "memory", "armijo", "max_backtracks", "divergence_margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SolverOptions":
        return cls(**(d or {}))


@dataclass
class SolverReport:
    objective_value: float
    gradient_norm: float
    iterations: int
    moment_residual: float
    positivity_margin: float
    converged: bool
    status: str = "converged"
    evaluations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class Parametrization:
    """Map between edge-supported coefficient blocks and a flat vector."""

    def __init__(self, g: EdgeSet, n: int):
        self.m, self.n = g.m, n
        pairs = g.undirected()
        self.rows = np.array([l for l, _ in pairs], dtype=int)
        self.cols = np.array([i for _, i in pairs], dtype=int)
        self.n_pairs = len(pairs)
        self.size = self.n_pairs * (1 + 2 * n)

    def to_blocks(self, x: np.ndarray) -> np.ndarray:
        P, r, c = self.n_pairs, self.rows, self.cols
        b = np.zeros((self.n + 1, self.m, self.m))
        b[0, r, c] = x[:P]
        b[0, c, r] = x[:P]
        for k in range(1, self.n + 1):
            off = P * (2 * k - 1)
            b[k, r, c] = x[off:off + P]
            b[k, c, r] = x[off + P:off + 2 * P]
        return b

    def from_blocks(self, b: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`to_blocks`: folds H0 pairs by addition."""
        r, c = self.rows, self.cols
        parts = [b[0, r, c] + b[0, c, r]]
        for k in range(1, self.n + 1):
            parts += [b[k, r, c], b[k, c, r]]
        return np.concatenate(parts)

    def moment_residual(self, d: np.ndarray) -> float:
        if self.n_pairs == 0:
            return 0.0
        r, c = self.rows, self.cols
        return float(max(np.max(np.abs(d[:, r, c])), np.max(np.abs(d[:, c, r]))))


class DualGrid:
    """Grid quadrature of ``J`` and of the model lags ``C_k = int Phi e^{jk theta}``.

    ``H(-theta)`` is the conjugate of ``H(theta)``, so only the closed upper
    half circle is evaluated, with doubled weights on the interior points.
    """

    def __init__(self, m: int, n: int, grid_size: int):
        if grid_size < 4 * (n + 1):
            raise ValueError(f"grid_size {grid_size} too small for order {n}")
        self.m, self.n, self.grid_size = m, n, grid_size
        theta = grid_angles(grid_size)[: grid_size // 2 + 1]
        w = np.full(theta.size, 2.0)
        w[0] = 1.0
        if grid_size % 2 == 0:
            w[-1] = 1.0
        self.theta = theta
        self.weights = w / grid_size
        k = np.arange(n + 1)
        self.cos = np.cos(np.outer(theta, k))
        self.sin = np.sin(np.outer(theta, k))
        self.wcos = (self.weights[:, None] * self.cos).T.copy()
        self.wsin = (self.weights[:, None] * self.sin).T.copy()

    def resolvent_arg(self, blocks: np.ndarray) -> np.ndarray:
        """``I - H(e^{j theta})`` on the half grid."""
        m = self.m
        sym = 0.5 * (blocks + np.swapaxes(blocks, 1, 2))
        anti = 0.5 * (blocks - np.swapaxes(blocks, 1, 2))
        sym[0], anti[0] = blocks[0], 0.0
        re = (self.cos @ sym.reshape(self.n + 1, m * m)).reshape(-1, m, m)
        im = (self.sin @ anti.reshape(self.n + 1, m * m)).reshape(-1, m, m)
        return np.eye(m) - re + 1j * im

    def margin(self, blocks: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.resolvent_arg(blocks)).min())

    def inverse(self, blocks: np.ndarray, floor: float = 0.0):
        """``(I - H)^{-1}`` on the half grid, or None unless ``I - H > floor * I``."""
        a = self.resolvent_arg(blocks)
        try:
            np.linalg.cholesky(a - floor * np.eye(self.m) if floor else a)
        except np.linalg.LinAlgError:
            return None
        return np.linalg.inv(a)

    def trace_term(self, inv: np.ndarray) -> float:
        """``tr int [(I - H)^{-1} - I]``."""
        return float(self.weights @ np.trace(inv, axis1=1, axis2=2).real) - self.m

    def lags(self, inv: np.ndarray) -> np.ndarray:
        phi = (inv @ inv).reshape(inv.shape[0], -1)
        out = self.wcos @ phi.real - self.wsin @ phi.imag
        return out.reshape(self.n + 1, self.m, self.m)


def _check_inputs(h: DoubleSidedPoly, r: CovSequence):
    if h.m != r.m or h.n != r.n:
        raise ValueError(f"shape mismatch: h has (m={h.m}, n={h.n}), r has (m={r.m}, n={r.n})")


def _feasible_inverse(grid: DualGrid, blocks):
    inv = grid.inverse(blocks)
    if inv is None:
        raise InfeasibleModelError(
            f"I - H not positive definite on the grid (margin {grid.margin(blocks):.3g})")
    return inv


def objective(h: DoubleSidedPoly, r: CovSequence, grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Dual objective ``J(H)`` by grid quadrature."""
    _check_inputs(h, r)
    grid = DualGrid(h.m, h.n, grid_size)
    inv = _feasible_inverse(grid, h.blocks)
    return grid.trace_term(inv) - float(np.sum(h.blocks * r.lags))


def model_lags(h: DoubleSidedPoly, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """``C_k = int (I - H)^{-2} e^{j k theta}`` for k = 0..n (real)."""
    grid = DualGrid(h.m, h.n, grid_size)
    return grid.lags(_feasible_inverse(grid, h.blocks))


def gradient(h: DoubleSidedPoly, r: CovSequence, g: EdgeSet,
             grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Gradient of ``J`` with respect to the free parameters of graph ``g``.

    Entries are ``[C_k - R_k]_{li}`` with the two symmetric ``H0`` entries
    of each edge folded together; ordering follows :class:`Parametrization`.
    """
    _check_inputs(h, r)
    grid = DualGrid(h.m, h.n, grid_size)
    inv = _feasible_inverse(grid, h.blocks)
    return Parametrization(g, h.n).from_blocks(grid.lags(inv) - r.lags)


class _Problem:
    def __init__(self, r: CovSequence, g: EdgeSet, opts: SolverOptions):
        self.par = Parametrization(g, r.n)
        self.grid = DualGrid(r.m, r.n, opts.grid_size)
        self.r = r
        self.rvec = self.par.from_blocks(r.lags)
        self.floor = opts.feasibility_floor
        self.evaluations = 0

    def evaluate(self, x):
        """``(J, grad, lag residuals)``, or ``None`` when the margin is at or below the floor."""
        self.evaluations += 1
        inv = self.grid.inverse(self.par.to_blocks(x), self.floor)
        if inv is None:
            return None
        diff = self.grid.lags(inv) - self.r.lags
        f = self.grid.trace_term(inv) - float(x @ self.rvec)
        return f, self.par.from_blocks(diff), diff

    def margin(self, x) -> float:
        return self.grid.margin(self.par.to_blocks(x))


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        q += (a - rho * (y @ q)) * s
    return -q


def solve(r: CovSequence, g: EdgeSet, opts: Optional[SolverOptions] = None):
    """Minimize the dual objective over ``H`` supported on ``g``.

    Limited-memory BFGS from ``H = 0`` with a backtracking line search that
    rejects any trial point whose grid positivity margin is at or below
    ``opts.feasibility_floor``.

    Returns
    -------
    h : DoubleSidedPoly
        The minimizer; the extended spectrum is ``(I - h)^{-2}``.
    report : SolverReport

    Raises
    ------
    IterationLimitError
        ``max_iterations`` reached, or the line search stalled away from the
        feasibility boundary.
    DualDivergenceError
        The iterates pile up at the feasibility boundary while the objective
        keeps decreasing; the covariance data may admit no interior solution.
    """
    opts = opts or SolverOptions()
    if r.m != g.m:
        raise ValueError(f"dimension mismatch: lags have m={r.m}, graph has m={g.m}")
    prob = _Problem(r, g, opts)
    x = np.zeros(prob.par.size)
    f, grad, diff = prob.evaluate(x)

    def report(it, status, converged):
        return SolverReport(
            objective_value=f, gradient_norm=float(np.linalg.norm(grad)), iterations=it,
            moment_residual=prob.par.moment_residual(diff), positivity_margin=prob.margin(x),
            converged=converged, status=status, evaluations=prob.evaluations)

    def fail(cls, it, status, message):
        rep = report(it, status, False)
        raise cls(message, DoubleSidedPoly(prob.par.to_blocks(x)), rep)

    s_hist: deque = deque(maxlen=opts.memory)
    y_hist: deque = deque(maxlen=opts.memory)
    rejected: deque = deque(maxlen=10)
    it = 0
    while np.linalg.norm(grad) > opts.gradient_tolerance:
        if it >= opts.max_iterations:
            fail(IterationLimitError, it, "iteration_limit",
                 f"no convergence after {it} iterations (gradient norm {np.linalg.norm(grad):.3g})")
        it += 1
        if s_hist:
            d = _two_loop(grad, s_hist, y_hist)
            t = 1.0
        else:
            d = -grad
            t = min(1.0, 0.1 / float(np.max(np.abs(grad))))
        slope = float(grad @ d)
        if slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d, slope = -grad, -float(grad @ grad)
            t = min(1.0, 0.1 / float(np.max(np.abs(grad))))
        ftol = 1e-13 * (1.0 + abs(f))
        infeasible = 0
        accepted = None
        for _ in range(opts.max_backtracks):
            xt = x + t * d
            trial = prob.evaluate(xt)
            if trial is None:
                infeasible += 1
            else:
                ft, gt, _ = trial
                if ft <= f + opts.armijo * t * slope:
                    accepted = (xt,) + trial
                    break
                if ft <= f + ftol and float(gt @ d) <= 0.9 * abs(slope):
                    # decrease below rounding level: accept on the curvature test
                    accepted = (xt,) + trial
                    break
            t *= opts.line_search_shrink
        rejected.append(infeasible)
        if accepted is None:
            if prob.margin(x) < opts.divergence_margin:
                fail(DualDivergenceError, it, "divergence",
                     "dual solution may not exist for these covariance data: "
                     "iterates stuck at the feasibility boundary")
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                continue
            fail(IterationLimitError, it, "line_search_stalled",
                 f"line search stalled (gradient norm {np.linalg.norm(grad):.3g})")
        xn, fn, gn, dn = accepted
        s, y = xn - x, gn - grad
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
        x, f, grad, diff = xn, fn, gn, dn
        if sum(1 for c in rejected if c) >= 5 and prob.margin(x) < opts.divergence_margin:
            fail(DualDivergenceError, it, "divergence",
                 "dual solution may not exist for these covariance data: "
                 "objective decreasing while the iterates approach the feasibility boundary")
    logger.debug("dual solve converged in %d iterations (%d evaluations)", it, prob.evaluations)
    return DoubleSidedPoly(prob.par.to_blocks(x)), report(it, "converged", True)


def solve_full(r: CovSequence, opts: Optional[SolverOptions] = None):
    """:func:`solve` on the complete graph without self-loops."""
    return solve(r, EdgeSet.full(r.m), opts)
