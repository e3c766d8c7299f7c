"""Two-step estimator for double-sided AR / diagonal one-sided MA models.

1. Fit ``c_l(z) y_l(t) = a_l(z) e_l(t)`` per channel by prediction error.
2. Assemble ``A(z) = diag(a_1, ..., a_m)``.
3. Inverse-filter ``xi = A^{-1}(z) y``.
4. Sample covariances of ``xi``.
5. Dual solve for ``H`` on those lags.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .baseline_me import estimate_me
from .graph_model import DiagonalMAPoly, EdgeSet, NoncausalModel
from .spectra import sample_cov
from .te_solver import ConvergenceError, SolverOptions, SolverReport, solve


class PemError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A step of the two-step estimator failed; ``step`` is its number (1-5)."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class PemOptions:
    max_iterations: int = 100
    tolerance: float = 1e-10
    stability_margin: float = 0.02
    cancellation_radius: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations <= 0 or self.tolerance <= 0:
            raise ValueError("max_iterations and tolerance must be positive")
        if not 0 < self.stability_margin < 1:
            raise ValueError("stability_margin must lie in (0, 1)")
        if self.cancellation_radius is not None and self.cancellation_radius < 0:
            raise ValueError("cancellation_radius must be non-negative")

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "PemOptions":
        return cls(**(d or {}))


@dataclass
class PemFit:
    a: np.ndarray
    c: np.ndarray
    noise_variance: float
    variance_history: list = field(default_factory=list)
    cancelled: int = 0

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "c": self.c.tolist(),
                "noise_variance": self.noise_variance, "cancelled": self.cancelled}


def clamp_roots(coeffs: np.ndarray, radius: float) -> np.ndarray:
    """Move roots of ``1 + sum_k c_k z^-k`` inside ``|z| <= radius``.

    Roots outside the unit circle are reflected to ``1/conj(z)`` first; any
    root still beyond ``radius`` is pulled radially onto it.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        return coeffs
    roots = np.roots(np.r_[1.0, coeffs])
    mag = np.abs(roots)
    if np.all(mag <= radius):
        return coeffs
    roots = np.where(mag > 1.0, 1.0 / np.conj(roots), roots)
    mag = np.abs(roots)
    roots = np.where(mag > radius, roots * (radius / np.maximum(mag, 1e-300)), roots)
    return np.real(np.poly(roots))[1:]


def _lagged(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns ``x(t-1), ..., x(t-lags)`` for t = start .. N-1."""
    N = x.size
    return np.column_stack([x[start - k:N - k] for k in range(1, lags + 1)]) if lags else np.zeros((N - start, 0))


def _prediction_errors(c, a, y):
    return lfilter(np.r_[1.0, c], np.r_[1.0, a], y)


def _cancel_common_roots(c, a, radius):
    """Replace near-coincident roots of ``c`` and ``a`` by zeros in both."""
    if radius <= 0 or c.size == 0 or a.size == 0:
        return c, a, 0
    rc = list(np.roots(np.r_[1.0, c]))
    ra = list(np.roots(np.r_[1.0, a]))
    count = 0
    while True:
        best = None
        for i, u in enumerate(rc):
            for j, v in enumerate(ra):
                if u == 0 or v == 0:
                    continue
                d = abs(u - v)
                if d < radius and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        u, v = rc[i], ra[j]
        rc[i], ra[j] = 0.0, 0.0
        if abs(u.imag) > 0 and abs(v.imag) > 0:
            # cancel the conjugate partners too so the polynomials stay real
            ic = min(range(len(rc)), key=lambda q: abs(rc[q] - np.conj(u)))
            ja = min(range(len(ra)), key=lambda q: abs(ra[q] - np.conj(v)))
            rc[ic], ra[ja] = 0.0, 0.0
        count += 1
    if not count:
        return c, a, 0
    return np.real(np.poly(rc))[1:], np.real(np.poly(ra))[1:], count


def pem_scalar(series, n: int, p: int, opts: Optional[PemOptions] = None) -> PemFit:
    """Prediction-error fit of ``c(z) y(t) = a(z) e(t)``.

    ``c(z) = 1 + sum_{k<=n} c_k z^-k`` and ``a(z) = 1 + sum_{k<=p} a_k z^-k``.
    Hannan-Rissanen gives the starting point (long AR fit, then least
    squares on the estimated innovations); Gauss-Newton then minimizes the
    one-step prediction-error variance, accepting only steps that lower it.
    Both polynomials are kept inside radius ``1 - stability_margin``.

    A common root of ``a`` and ``c`` (closer than ``cancellation_radius``,
    default ``3/sqrt(N)``) is unidentifiable from the data; it is cancelled
    by moving it to the origin in both polynomials.
    """
    opts = opts or PemOptions()
    y = np.asarray(series, dtype=float).ravel()
    N = y.size
    if N < 20 * max(n + p, 1):
        raise PemError(f"series too short: N={N} < 20(n+p)={20 * max(n + p, 1)}")
    if not np.all(np.isfinite(y)) or np.ptp(y) == 0:
        raise PemError("degenerate series (constant or non-finite)")
    radius = 1.0 - opts.stability_margin

    if p == 0:
        c = np.zeros(n)
        if n:
            X = -_lagged(y, n, n)
            c = np.linalg.lstsq(X, y[n:], rcond=None)[0]
            c = clamp_roots(c, radius)
        var = float(np.mean(_prediction_errors(c, np.zeros(0), y) ** 2))
        return PemFit(np.zeros(0), c, var, [var])

    # Hannan-Rissanen start
    L = min(max(2 * (n + p), int(round(10 * np.log10(N)))), N // 4)
    phi = np.linalg.lstsq(_lagged(y, L, L), y[L:], rcond=None)[0]
    innov = np.r_[np.zeros(L), y[L:] - _lagged(y, L, L) @ phi]
    s = L + max(n, p)
    X = np.column_stack([-_lagged(y, n, s), _lagged(innov, p, s)])
    theta = np.linalg.lstsq(X, y[s:], rcond=None)[0]
    c = clamp_roots(theta[:n], radius)
    a = clamp_roots(theta[n:], radius)

    eps = _prediction_errors(c, a, y)
    var = float(np.mean(eps ** 2))
    history = [var]
    for _ in range(opts.max_iterations):
        # d eps / d c_k = y(t-k) / a(z),  d eps / d a_k = -eps(t-k) / a(z)
        ya = lfilter([1.0], np.r_[1.0, a], y)
        ea = lfilter([1.0], np.r_[1.0, a], eps)
        jac = np.column_stack([_lagged(np.r_[np.zeros(n), ya], n, n),
                               -_lagged(np.r_[np.zeros(p), ea], p, p)])
        step = -np.linalg.lstsq(jac, eps, rcond=None)[0]
        t = 1.0
        accepted = False
        while t > 1e-10:
            c_new = clamp_roots(c + t * step[:n], radius)
            a_new = clamp_roots(a + t * step[n:], radius)
            eps_new = _prediction_errors(c_new, a_new, y)
            var_new = float(np.mean(eps_new ** 2))
            if var_new < var:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        decrease = (var - var_new) / var
        c, a, eps, var = c_new, a_new, eps_new, var_new
        history.append(var)
        if decrease < opts.tolerance:
            break

    cancel_radius = 3.0 / np.sqrt(N) if opts.cancellation_radius is None else opts.cancellation_radius
    c, a, cancelled = _cancel_common_roots(c, a, cancel_radius)
    if cancelled:
        var = float(np.mean(_prediction_errors(c, a, y) ** 2))
    return PemFit(a, c, var, history, cancelled)


def inverse_filter(a: DiagonalMAPoly, data) -> np.ndarray:
    """``xi = A^{-1}(z) y`` channel by channel, zero initial conditions.

    The first samples carry the start-up transient; callers discard a
    burn-in (see :func:`burn_in_length`) before computing covariances.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 2 or y.shape[0] != a.m:
        raise ValueError(f"data must have shape (m={a.m}, N), got {y.shape}")
    if a.p == 0:
        return y.copy()
    return np.stack([lfilter([1.0], a.polynomial(l), y[l]) for l in range(a.m)])


def apply_ma(a: DiagonalMAPoly, xi) -> np.ndarray:
    """Forward MA filter ``y_l(t) = xi_l(t) + sum_k a_{l,k} xi_l(t-k)``, zero initial conditions."""
    xi = np.asarray(xi, dtype=float)
    if a.p == 0:
        return xi.copy()
    return np.stack([lfilter(a.polynomial(l), [1.0], xi[l]) for l in range(a.m)])


def burn_in_length(p: int) -> int:
    return max(50, 10 * p)


@dataclass
class PipelineReport:
    pem: list
    dual: Optional[SolverReport]
    timings: dict
    a_hat: Optional[DiagonalMAPoly]
    method: str = "te"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "pem": [f.to_dict() for f in self.pem],
            "dual": None if self.dual is None else self.dual.to_dict(),
            "timings": dict(self.timings),
            "a_hat": None if self.a_hat is None else self.a_hat.coeffs.tolist(),
        }


def transformed_lags(data, n: int, p: int, pem_opts: Optional[PemOptions] = None):
    """Steps 1-4: per-channel PEM, ``A(z)``, ``xi = A^{-1} y`` and its lags.

    Returns ``(lags, a_hat, pem_fits, timings)``; with ``p = 0`` steps 1-3
    are skipped and the lags are those of ``y``.
    """
    y = np.asarray(data, dtype=float)
    m = y.shape[0]
    timings = {}
    if p == 0:
        t0 = time.perf_counter()
        try:
            lags = sample_cov(y, n)
        except ValueError as exc:
            raise PipelineError(4, exc)
        timings["step4"] = time.perf_counter() - t0
        return lags, None, [], timings

    t0 = time.perf_counter()
    try:
        fits = [pem_scalar(y[l], n, p, pem_opts) for l in range(m)]
    except PemError as exc:
        raise PipelineError(1, exc)
    timings["step1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        a_hat = DiagonalMAPoly(np.array([f.a for f in fits]))
    except ValueError as exc:
        raise PipelineError(2, exc)
    timings["step2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    xi = inverse_filter(a_hat, y)
    timings["step3"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        lags = sample_cov(xi[:, burn_in_length(p):], n)
    except ValueError as exc:
        raise PipelineError(4, exc)
    timings["step4"] = time.perf_counter() - t0
    return lags, a_hat, fits, timings


def estimate_arma(data, n: int, p: int, g: EdgeSet, pem_opts: Optional[PemOptions] = None,
                  solver_opts: Optional[SolverOptions] = None):
    """Estimate ``A(z)`` and ``H(z)`` with the two-step procedure.

    Returns ``(model, report)``.  Solver failures are re-raised as
    :class:`PipelineError` with ``step = 5``; the underlying
    :class:`ConvergenceError` (carrying the last iterate) is its ``cause``.
    """
    lags, a_hat, fits, timings = transformed_lags(data, n, p, pem_opts)
    t0 = time.perf_counter()
    try:
        h, dual = solve(lags, g, solver_opts)
    except (ConvergenceError, ValueError) as exc:
        raise PipelineError(5, exc)
    timings["step5"] = time.perf_counter() - t0
    model = NoncausalModel(h, g, a_hat)
    return model, PipelineReport(fits, dual, timings, a_hat, "te")


def estimate_arma_me(data, n: int, p: int, pem_opts: Optional[PemOptions] = None,
                     grid_size: Optional[int] = None):
    """Steps 1-4 as in :func:`estimate_arma`, step 5 replaced by the ME extension.

    Returns ``(h, a_hat, report)``; ``h`` is unconstrained (nonzero diagonal).
    """
    lags, a_hat, fits, timings = transformed_lags(data, n, p, pem_opts)
    t0 = time.perf_counter()
    try:
        h = estimate_me(lags) if grid_size is None else estimate_me(lags, grid_size)
    except ValueError as exc:
        raise PipelineError(5, exc)
    timings["step5"] = time.perf_counter() - t0
    return h, a_hat, PipelineReport(fits, None, timings, a_hat, "me")
