"""File formats: model JSON, covariance JSON and data CSV."""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .graph_model import DiagonalMAPoly, DoubleSidedPoly, EdgeSet, ModelError, NoncausalModel
from .spectra import CovSequence


class FormatError(ValueError):
    pass


def model_to_dict(h: DoubleSidedPoly, graph: EdgeSet, a: Optional[DiagonalMAPoly] = None,
                  metadata: Optional[dict] = None) -> dict:
    p = 0 if a is None else a.p
    out = {
        "m": h.m,
        "n": h.n,
        "p": p,
        "edges": graph.sorted_pairs(),
        "H": [blk.tolist() for blk in h.blocks],
    }
    if p:
        out["A"] = a.coeffs.tolist()
    if metadata:
        out["metadata"] = metadata
    return out


def _require(d: dict, key: str):
    if key not in d:
        raise FormatError(f"model file is missing field '{key}'")
    return d[key]


def edges_from_dict(d: dict) -> EdgeSet:
    m = _require(d, "m")
    try:
        return EdgeSet(int(m), frozenset(tuple(e) for e in _require(d, "edges")))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid edge set: {exc}")


def parse_model(d: dict, strict: bool = True):
    """Build a model from its JSON dictionary.

    With ``strict`` (default) the result is a :class:`NoncausalModel` and
    any violated invariant raises :class:`FormatError` naming it.  Otherwise
    ``(h, graph, a)`` is returned without structural checks on ``h``, which
    is how unconstrained estimates (e.g. the ME baseline) are read back.
    """
    m, n, p = (int(_require(d, k)) for k in ("m", "n", "p"))
    graph = edges_from_dict(d)
    H = np.asarray(_require(d, "H"), dtype=float)
    if H.shape != (n + 1, m, m):
        raise FormatError(f"field 'H' must hold n+1={n + 1} matrices of size {m}x{m}, got shape {H.shape}")
    a = None
    if p:
        A = np.asarray(_require(d, "A"), dtype=float)
        if A.shape != (m, p):
            raise FormatError(f"field 'A' must have shape ({m}, {p}), got {A.shape}")
        try:
            a = DiagonalMAPoly(A)
        except ModelError as exc:
            raise FormatError(f"invalid MA part: {exc}")
    h = DoubleSidedPoly(H)
    if not strict:
        return h, graph, a
    try:
        return NoncausalModel(h, graph, a)
    except ModelError as exc:
        raise FormatError(f"model violates invariants: {exc}")


def read_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_model(path, strict: bool = True):
    return parse_model(read_json(path), strict)


def write_model(path, h, graph, a=None, metadata=None) -> None:
    write_json(path, model_to_dict(h, graph, a, metadata))


def read_edges(path) -> EdgeSet:
    return edges_from_dict(read_json(path))


def cov_to_dict(r: CovSequence) -> dict:
    return {"m": r.m, "n": r.n, "lags": [blk.tolist() for blk in r.lags]}


def cov_from_dict(d: dict) -> CovSequence:
    lags = np.asarray(_require(d, "lags"), dtype=float)
    if lags.shape != (int(_require(d, "n")) + 1, int(_require(d, "m")), int(d["m"])):
        raise FormatError(f"field 'lags' has shape {lags.shape}, inconsistent with m and n")
    return CovSequence(lags)


def write_data_csv(path, data) -> None:
    """m x N series -> CSV with header ``y1,...,ym`` and one row per time step."""
    data = np.asarray(data, dtype=float)
    header = ",".join(f"y{l + 1}" for l in range(data.shape[0]))
    np.savetxt(path, data.T, delimiter=",", header=header, comments="", fmt="%.17g")


def read_data_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    expected = [f"y{l + 1}" for l in range(len(header))]
    if header != expected:
        raise FormatError(f"{path}: header must be {','.join(expected)}")
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}")
    if values.shape[1] != len(header) or not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: expected {len(header)} finite columns per row")
    return np.ascontiguousarray(values.T)
