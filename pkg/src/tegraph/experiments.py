"""Monte Carlo comparison of TE, TE-F and ME on random sparse models."""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arma import PemOptions, PipelineError, transformed_lags
from .baseline_me import estimate_me
from .graph_model import DoubleSidedPoly
from .simulate import random_arma, sample_trajectory
from .te_solver import ConvergenceError, SolverOptions, solve, solve_full

ESTIMATORS = ("te", "tef", "me")
ME_MAPPING = "extract_h: H(z) taken as the order-n truncation of I - Phi_ME^(-1/2)"


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 8
    n: int = 2
    p: int = 0
    density: float = 0.1
    data_lengths: tuple = (500, 1000, 2000)
    num_trials: int = 20
    estimators: tuple = ESTIMATORS
    seed: int = 0
    feasibility_target: float = 0.9
    fixed_model: bool = False
    norm: str = "spectral"
    solver: dict = field(default_factory=dict)
    pem: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "data_lengths", tuple(int(N) for N in self.data_lengths))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.num_trials < 1:
            raise ValueError("num_trials must be at least 1")
        if not self.data_lengths or min(self.data_lengths) < 1:
            raise ValueError("data_lengths must be a non-empty list of positive integers")
        if not 0 < self.density <= 1 or self.density * self.m * (self.m - 1) < 2:
            raise ValueError(f"invalid density {self.density} for m={self.m}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}")
        if self.norm not in ("spectral", "frobenius"):
            raise ValueError("norm must be 'spectral' or 'frobenius'")
        # fail early on bad overrides
        self.solver_options()
        self.pem_options()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["data_lengths"] = list(self.data_lengths)
        d["estimators"] = list(self.estimators)
        return d

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_dict(self.solver)

    def pem_options(self) -> PemOptions:
        return PemOptions.from_dict(self.pem)


def desk_config(**overrides) -> ExperimentConfig:
    """Minutes-scale AR experiment (m=8, 20 trials)."""
    return dataclasses.replace(ExperimentConfig(), **overrides)


def paper_config(**overrides) -> ExperimentConfig:
    """Full-scale AR experiment: m=15, n=2, density 0.1, 100 trials."""
    return dataclasses.replace(ExperimentConfig(m=15, num_trials=100), **overrides)


@dataclass
class TrialResult:
    trial: int
    estimator: str
    N: int
    relative_error: float
    converged: bool
    wall_time: float = 0.0
    status: str = "converged"


def relative_error(h_hat: DoubleSidedPoly, h_true: DoubleSidedPoly, norm: str = "spectral") -> float:
    """``||[H0^ .. Hn^] - [H0 .. Hn]|| / ||[H0 .. Hn]||``, spectral norm by default."""
    if h_hat.blocks.shape != h_true.blocks.shape:
        raise ValueError(f"shape mismatch: {h_hat.blocks.shape} vs {h_true.blocks.shape}")
    ord_ = 2 if norm == "spectral" else "fro"
    den = np.linalg.norm(h_true.stacked(), ord_)
    if den == 0:
        raise ValueError("relative error undefined: true coefficients are identically zero")
    return float(np.linalg.norm(h_hat.stacked() - h_true.stacked(), ord_) / den)


def _seed(config: ExperimentConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed, spawn_key=key)


def trial_model(config: ExperimentConfig, trial_index: int):
    key = (0,) if config.fixed_model else (1, trial_index)
    return random_arma(config.m, config.n, config.p, config.density,
                       config.feasibility_target, _seed(config, *key))


def run_trial(config: ExperimentConfig, trial_index: int) -> list:
    """One random model, one trajectory per data length, every requested estimator."""
    model = trial_model(config, trial_index)
    sopts, popts = config.solver_options(), config.pem_options()
    out = []
    for N in config.data_lengths:
        y = sample_trajectory(model, N, _seed(config, 2, trial_index, N))
        t0 = time.perf_counter()
        try:
            lags = transformed_lags(y, config.n, config.p, popts)[0]
            prep_error = None
        except PipelineError as exc:
            lags, prep_error = None, f"step{exc.step}_failed"
        prep_time = time.perf_counter() - t0
        for est in config.estimators:
            t0 = time.perf_counter()
            if prep_error:
                out.append(TrialResult(trial_index, est, N, float("nan"), False, prep_time, prep_error))
                continue
            status, converged = "converged", True
            try:
                if est == "te":
                    h = solve(lags, model.graph, sopts)[0]
                elif est == "tef":
                    h = solve_full(lags, sopts)[0]
                else:
                    h = estimate_me(lags, sopts.grid_size)
            except ConvergenceError as exc:
                h, status, converged = exc.h, exc.report.status if exc.report else "failed", False
            except ValueError as exc:
                h, status, converged = None, f"failed: {type(exc).__name__}", False
            err = relative_error(h, model.h, config.norm) if h is not None else float("nan")
            out.append(TrialResult(trial_index, est, N, err, converged,
                                   prep_time + time.perf_counter() - t0, status))
    return out


def summarize(config: ExperimentConfig, results: list) -> dict:
    """Median and quartiles of the relative error per estimator and data length."""
    table = {}
    for est in config.estimators:
        table[est] = {}
        for N in config.data_lengths:
            rows = [r for r in results if r.estimator == est and r.N == N]
            ok = np.array([r.relative_error for r in rows if r.converged])
            entry = {"trials": len(rows), "converged": int(ok.size), "failed": len(rows) - int(ok.size)}
            if ok.size:
                q1, med, q3 = np.percentile(ok, [25, 50, 75])
                entry.update(absent=False, median=float(med), q1=float(q1), q3=float(q3),
                             min=float(ok.min()), max=float(ok.max()), mean=float(ok.mean()))
            else:
                entry["absent"] = True
            table[est][str(N)] = entry
    return {
        "metadata": {"norm": config.norm, "me_mapping": ME_MAPPING, "config": config.to_dict()},
        "summary": table,
    }


def run_monte_carlo(config: ExperimentConfig, threads: int = 1):
    """Run all trials; returns ``(results, summary)``.

    Trials are seeded by index and results are sorted by (trial, estimator,
    N), so the output does not depend on ``threads``.
    """
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda i: run_trial(config, i), range(config.num_trials)))
    else:
        chunks = [run_trial(config, i) for i in range(config.num_trials)]
    order = {e: i for i, e in enumerate(config.estimators)}
    results = sorted((r for c in chunks for r in c), key=lambda r: (r.trial, order[r.estimator], r.N))
    return results, summarize(config, results)


def results_csv(config: ExperimentConfig, results: list, include_timing: bool = False) -> str:
    buf = io.StringIO()
    buf.write(f"# norm={config.norm}; me_mapping={ME_MAPPING}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = ["trial", "estimator", "N", "relative_error", "converged", "status"]
    if include_timing:
        header.append("wall_time")
    w.writerow(header)
    for r in results:
        row = [r.trial, r.estimator, r.N, repr(r.relative_error), int(r.converged), r.status]
        if include_timing:
            row.append(f"{r.wall_time:.6f}")
        w.writerow(row)
    return buf.getvalue()
