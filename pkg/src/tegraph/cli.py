"""Command-line interface: ``simulate``, ``estimate`` and ``mc``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io as tio
from .arma import PemError, PipelineError, estimate_arma, estimate_arma_me
from .experiments import ME_MAPPING, ExperimentConfig, results_csv, run_monte_carlo
from .graph_model import EdgeSet, ModelError
from .simulate import random_arma, sample_trajectory
from .spectra import SpectrumError
from .te_solver import ConvergenceError, SolverOptions

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4

logger = logging.getLogger("tegraph")


class UsageError(Exception):
    pass


def cmd_simulate(args) -> int:
    model_seed, data_seed = np.random.SeedSequence(args.seed).spawn(2)
    model = random_arma(args.m, args.n, args.p, args.density, args.feasibility_target, model_seed)
    y = sample_trajectory(model, args.N, data_seed)
    tio.write_model(args.out_model, model.h, model.graph, model.a,
                    {"generator": "random_arma", "seed": args.seed,
                     "density": args.density, "feasibility_target": args.feasibility_target})
    tio.write_data_csv(args.out_data, y)
    return EXIT_OK


def _report_dict(rep, timings: bool) -> dict:
    d = rep.to_dict()
    if not timings:
        # wall-clock values would break byte-identical reruns
        del d["timings"]
    return d


def cmd_estimate(args) -> int:
    data = tio.read_data_csv(args.data)
    m = data.shape[0]
    opts = SolverOptions(grid_size=args.grid_size, max_iterations=args.max_iter,
                         gradient_tolerance=args.tol)
    if args.method == "te":
        if not args.edges:
            raise UsageError("--edges is required for method te")
        graph = tio.read_edges(args.edges)
        if graph.m != m:
            raise UsageError(f"edge file has m={graph.m}, data has {m} channels")
    else:
        graph = EdgeSet.full(m)

    if args.method == "me":
        h, a_hat, rep = estimate_arma_me(data, args.n, args.p, grid_size=args.grid_size)
        tio.write_model(args.out, h, graph, a_hat,
                        {"estimator": "me", "unconstrained": True, "me_mapping": ME_MAPPING})
        tio.write_json(args.report, _report_dict(rep, args.timings))
        return EXIT_OK

    try:
        model, rep = estimate_arma(data, args.n, args.p, graph, solver_opts=opts)
    except PipelineError as exc:
        if isinstance(exc.cause, ConvergenceError):
            cause = exc.cause
            tio.write_json(args.report, {"method": args.method, "step": exc.step, "error": str(cause),
                                         "dual": cause.report.to_dict() if cause.report else None})
            logger.error("%s", exc)
            return EXIT_NONCONVERGED
        raise
    tio.write_model(args.out, model.h, model.graph, model.a, {"estimator": args.method})
    d = _report_dict(rep, args.timings)
    d["method"] = args.method
    tio.write_json(args.report, d)
    return EXIT_OK


def cmd_mc(args) -> int:
    config = ExperimentConfig.from_dict(tio.read_json(args.config))
    results, summary = run_monte_carlo(config, threads=args.threads)
    with open(args.out_results, "w") as fh:
        fh.write(results_csv(config, results, include_timing=args.timings))
    tio.write_json(args.out_summary, summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tegraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a random model and a trajectory from it")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=int, default=0)
    s.add_argument("--density", type=float, required=True)
    s.add_argument("--feasibility-target", type=float, default=0.9)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-model", required=True)
    s.add_argument("--out-data", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate a model from a data CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--method", choices=("te", "tef", "me"), required=True)
    e.add_argument("--edges", help="JSON with fields m and edges (a model file works)")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--p", type=int, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--grid-size", type=int, default=SolverOptions.grid_size)
    e.add_argument("--max-iter", type=int, default=SolverOptions.max_iterations)
    e.add_argument("--tol", type=float, default=SolverOptions.gradient_tolerance)
    e.add_argument("--timings", action="store_true", help="add per-step wall times to the report")
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("mc", help="run a Monte Carlo experiment from a JSON config")
    c.add_argument("--config", required=True)
    c.add_argument("--out-results", required=True)
    c.add_argument("--out-summary", required=True)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--timings", action="store_true", help="add a wall_time column (not reproducible)")
    c.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except (UsageError, ModelError, SpectrumError, PemError, PipelineError,
            ConvergenceError, ValueError, KeyError, TypeError) as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
