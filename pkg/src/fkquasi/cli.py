"""Command line interface.

Exit codes: 0 success, 2 configuration or input error, 3 verification
failure, 4 the solver did not produce an equilibrium.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io, pipeline, pointset, solver
from .errors import (ConfigurationError, DomainBreachError, FKError, NonConvergenceError,
                     NumericalError, VerificationError)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_SOLVE = 0, 2, 3, 4


def _load(args):
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _prefix(cfg):
    return cfg["output"].get("prefix") or cfg.get("name") or "run"


def _out(args, cfg, suffix):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{_prefix(cfg)}_{suffix}"


def cmd_generate(args):
    cfg = _load(args)
    pset = pipeline.build_pointset(cfg)
    if pset is None:
        raise ConfigurationError("config has no pointset section")
    path = _out(args, cfg, "points.csv")
    pointset.save_csv(pset, path)
    print(f"{len(pset)} points, packing radius {pset.packing_radius:.17g}, "
          f"covering radius {pset.covering_radius:.17g} -> {path}")
    return EXIT_OK


def _constants(res, cfg):
    from .solver import thresholds
    spec = pipeline.type_spec(cfg, res, None)
    B = res.model.hessian_bound(spec)
    A = res.potential.affinity
    lam_star, N = thresholds(B, res.atlas.domain_radius, A)
    return {"B": B, "R_V": res.atlas.domain_radius, "K_V": res.atlas.inverse_bound,
            "epsilon_prime": res.atlas.epsilon_prime, "lambda_star": lam_star, "N": N,
            "r_Z": res.atlas.covering_radius_Z}


def cmd_atlas(args):
    cfg = _load(args)
    res = pipeline.prepare(cfg)
    path = _out(args, cfg, "atlas.csv")
    res.atlas.to_csv(path)
    consts = _constants(res, cfg)
    io.write_json(_out(args, cfg, "constants.json"), consts)
    print(f"{len(res.atlas)} critical points -> {path}")
    print(json.dumps(io._jsonable(consts), sort_keys=True))
    return EXIT_OK


def cmd_solve(args):
    cfg = _load(args)
    res = pipeline.run(cfg, threads=args.threads)
    rep = res.report
    io.write_report_csv(_out(args, cfg, "report.csv"), rep)
    io.write_trace_csv(_out(args, cfg, "trace.csv"), rep)
    io.write_json(_out(args, cfg, "constants.json"), io.constants_sidecar(rep))
    io.write_json(_out(args, cfg, "summary.json"),
                  io.summary_dict(rep, res.verification, {"seed": cfg["seed"], "config": cfg}))
    print(f"mode {rep.mode.to_dict()}: {rep.iterations} sweeps, residual_sup {rep.residual_sup:.3e}, "
          f"rho {rep.rho_empirical:.4g}")
    if not res.verification.passed:
        print("verification failed: " + ", ".join(res.verification.failed), file=sys.stderr)
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def _summary_path(report_path, given):
    if given:
        return Path(given)
    p = Path(report_path)
    name = p.name[: -len("report.csv")] + "summary.json" if p.name.endswith("report.csv") else p.stem + ".json"
    return p.with_name(name)


def cmd_verify(args):
    cfg = _load(args)
    rpath = Path(args.report)
    spath = _summary_path(rpath, args.summary)
    for p in (rpath, spath):
        if not p.is_file():
            raise ConfigurationError(f"{p}: file not found")
    summary = io.read_json(spath)
    idx, _, U, res_col = io.read_report_csv(rpath)
    m = summary["mode"]
    mode = solver.Mode.magnified(m["lambda"]) if m["kind"] == "magnified" else solver.Mode.scaled(m["n"])
    r, rs = pipeline.recompute_residuals(cfg, idx, U, summary["collar"]["indices"],
                                         summary["collar"]["values"], mode)
    sup = float(r.max()) if r.size else 0.0
    if abs(sup - summary["residual_sup"]) > 1e-12:
        print(f"verification failed: residual (recomputed {sup:.17g}, "
              f"reported {summary['residual_sup']:.17g})", file=sys.stderr)
        return EXIT_VERIFY
    if np.max(np.abs(r - res_col), initial=0.0) > 1e-12:
        print("verification failed: residual (per-index column mismatch)", file=sys.stderr)
        return EXIT_VERIFY
    if rs is not None and abs(float(rs.max()) - summary["scaled_residual_sup"]) > 1e-12:
        print("verification failed: residual (scaled form mismatch)", file=sys.stderr)
        return EXIT_VERIFY
    clauses = summary.get("verification", {}).get("clauses", {})
    for name, c in clauses.items():
        if not c["passed"]:
            print(f"verification failed: {name}", file=sys.stderr)
            return EXIT_VERIFY
    print(f"verified: residual_sup {sup:.3e} matches; {len(clauses)} clauses passed")
    return EXIT_OK


def cmd_export(args):
    cfg = _load(args)
    if args.report:
        summary = io.read_json(_summary_path(args.report, args.summary))
        idx, _, U, res_col = io.read_report_csv(args.report)
        sigma = np.asarray(summary["type"]["sigma"], dtype=float)
        T = idx.astype(float) @ sigma
        path = _out(args, cfg, "plot.csv")
        with open(path, "w") as fh:
            d = U.shape[1]
            fh.write(",".join([f"target{k}" for k in range(d)] + [f"u{k}" for k in range(d)] + ["residual"]) + "\n")
            for t, u, r in zip(T, U, res_col):
                fh.write(",".join(io.fmt(v) for v in (*t, *u, r)) + "\n")
    else:
        res = pipeline.run(cfg, threads=args.threads, do_verify=False)
        path = io.write_plot_csv(_out(args, cfg, "plot.csv"), res.report)
        io.write_trace_csv(_out(args, cfg, "trace.csv"), res.report)
    print(f"plot data -> {path}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="config file or preset name (%s)" % ", ".join(cfgmod.preset_names()))
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads per sweep")

    parser = argparse.ArgumentParser(prog="fkquasi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the point set as CSV").set_defaults(func=cmd_generate)
    sub.add_parser("atlas", parents=[common], help="critical atlas and constants").set_defaults(func=cmd_atlas)
    for name in ("solve", "run"):
        sub.add_parser(name, parents=[common], help="full pipeline with verification").set_defaults(func=cmd_solve)
    v = sub.add_parser("verify", parents=[common], help="re-check an exported report")
    v.add_argument("report", help="report CSV written by solve")
    v.add_argument("--summary", default=None, help="summary JSON (default: next to the report)")
    v.set_defaults(func=cmd_verify)
    e = sub.add_parser("export-plot-data", parents=[common], help="(i M, u_i, residual) series")
    e.add_argument("--report", default=None, help="convert an existing report instead of solving")
    e.add_argument("--summary", default=None)
    e.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NonConvergenceError, DomainBreachError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except (FKError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
