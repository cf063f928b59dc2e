"""CSV and JSON export of atlases, reports and constants.

Floats are written with 17 significant digits so that every value parses
back to the identical double.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x):
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr of a Python float is the shortest round-tripping decimal
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def report_rows(report):
    """Header and rows: index, anchor, u and residual for each interior site."""
    dom = report.coding.domain
    n = dom.n_interior
    r = dom.rank
    d = report.configuration.shape[1]
    header = ([f"i{k}" for k in range(r)] + [f"a{k}" for k in range(d)]
              + [f"u{k}" for k in range(d)] + ["residual"])
    rows = []
    a = report.coding.anchors
    U = report.configuration
    for s in range(n):
        rows.append([str(int(v)) for v in dom.interior[s]]
                    + [fmt(v) for v in a[s]] + [fmt(v) for v in U[s]] + [fmt(report.residuals[s])])
    return header, rows


def write_report_csv(path, report):
    header, rows = report_rows(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_report_csv(path):
    """Return ``(indices, anchors, u, residuals)`` arrays from a report CSV."""
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = next(rdr)
        data = [row for row in rdr if row]
    r = sum(h.startswith("i") for h in header)
    d = sum(h.startswith("u") for h in header)
    idx = np.array([[int(v) for v in row[:r]] for row in data], dtype=np.int64).reshape(-1, r)
    vals = np.array([[float(v) for v in row[r:]] for row in data], dtype=float).reshape(-1, 2 * d + 1)
    return idx, vals[:, :d], vals[:, d:2 * d], vals[:, 2 * d]


def summary_dict(report, verification=None, extra=None):
    dom = report.coding.domain
    n = dom.n_interior
    out = {
        "mode": report.mode.to_dict(),
        "constants": report.constants,
        "residual_sup": report.residual_sup,
        "scaled_residual_sup": report.scaled_residual_sup,
        "rho_empirical": report.rho_empirical,
        "iterations": report.iterations,
        "anchor_distance": report.anchor_distance,
        "type_deviation": report.type_deviation,
        "delta_trace": list(report.delta_trace),
        "tol": report.tol,
        "interior_count": n,
        "collar": {
            "indices": dom.collar.tolist(),
            "values": report.configuration[n:].tolist(),
        },
        "type": {"sigma": report.coding.spec.sigma.tolist(), "radius": report.coding.spec.radius},
    }
    if verification is not None:
        out["verification"] = {"passed": verification.passed, "clauses": verification.to_dict()}
    if extra:
        out.update(extra)
    return out


def constants_sidecar(report):
    c = report.constants
    keys = ("B", "R_V", "K_V", "lambda_star", "N", "r_Z", "epsilon_prime")
    return {k: c.get(k) for k in keys}


def write_plot_csv(path, report):
    """``(i M, u_i, residual_i)`` for each interior site."""
    dom = report.coding.domain
    n = dom.n_interior
    T = report.coding.spec.targets(dom.interior)
    U = report.configuration[:n]
    d = U.shape[1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"target{k}" for k in range(d)] + [f"u{k}" for k in range(d)] + ["residual"])
        for t, u, res in zip(T, U, report.residuals):
            w.writerow([fmt(v) for v in t] + [fmt(v) for v in u] + [fmt(res)])
    return path


def write_trace_csv(path, report):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "delta"])
        for k, dl in enumerate(report.delta_trace, start=1):
            w.writerow([k, fmt(dl)])
    return path
