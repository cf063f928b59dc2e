"""Configuration-driven pipeline: point set, potential, atlas, coding, solve, verify."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import interaction as itx
from . import landscape, pointset, potential, solver
from .errors import ConfigurationError


@dataclass
class PipelineResult:
    config: dict
    pointset: object
    potential: object
    model: object
    atlas: object
    coding: object = None
    mode: object = None
    report: object = None
    verification: object = None


def build_pointset(cfg):
    spec = cfg.get("pointset")
    if spec is None:
        return None
    fam = spec["family"]
    extent = spec["extent"]
    if fam == "periodic":
        region = pointset.as_region(extent)
        d = spec.get("dim", region.dim)
        return pointset.build_periodic(d, spec.get("spacing", 2 * np.pi), region)
    return pointset.build_cut_and_project(fam, extent)


def build_potential(cfg, pset):
    spec = cfg["potential"]
    if spec["kind"] == "bump_sum":
        if pset is None:
            raise ConfigurationError("bump_sum potential needs a pointset section")
        for key in ("amplitude", "support_radius"):
            if key not in spec:
                raise ConfigurationError(f"bump_sum potential needs '{key}'")
        return potential.make_bump_potential(pset, spec["amplitude"], spec["support_radius"],
                                             spec.get("sign", 1))
    d = spec.get("dim", 1)
    A = spec.get("affinity")
    return potential.make_periodic_potential(spec["kind"], d, None if A is None else np.asarray(A, float))


def build_interaction(cfg, pset, value_dim):
    spec = cfg["interaction"]
    fam = spec["family"]
    win = spec["window"]
    if fam == "address_neighborhood":
        if pset is None:
            raise ConfigurationError("address_neighborhood needs a pointset section")
        return itx.make_address_interaction(pset, (win["lo"], win["hi"]), spec["tau"])
    lo = np.atleast_1d(win["lo"])
    hi = np.atleast_1d(win["hi"])
    if np.any(lo != np.round(lo)) or np.any(hi != np.round(hi)):
        raise ConfigurationError("index window corners must be integers")
    return itx.make_interaction(fam, (lo.astype(np.int64), hi.astype(np.int64)), value_dim, spec.get("p"))


def type_matrix(cfg, model):
    sigma = cfg["type"]["sigma"]
    if sigma == "psi":
        table = getattr(model, "address_table", None)
        if table is None:
            raise ConfigurationError("sigma 'psi' needs an address_neighborhood interaction")
        return table.projection.T.copy()
    return np.atleast_2d(np.asarray(sigma, dtype=float)) if np.ndim(sigma) != 1 else np.asarray(sigma, float).reshape(-1, 1)


def build_atlas(cfg, P, sigma, model):
    spec = cfg["atlas"]
    if "region" in spec:
        region = pointset.as_region(spec["region"], P.dim)
    else:
        T = np.asarray(model.domain.sites, dtype=float) @ sigma
        margin = 4.0 * P.equivariance_range + 1e-9
        lo, hi = T.min(axis=0) - margin, T.max(axis=0) + margin
        region = pointset.Box(lo, hi)
    atlas = landscape.find_critical_points(P, region, spec.get("grid_step"), spec["tol"],
                                           spec["det_threshold"])
    if spec["select"] != "all":
        atlas = atlas.select(spec["select"])
    consts = landscape.estimate_constants(P, atlas, spec["probe_count"], seed=cfg["seed"])
    return atlas.with_constants(consts)


def resolve_mode(cfg, B, atlas, P):
    spec = cfg["mode"]
    kind = spec["kind"]
    if kind == "magnified":
        return solver.Mode.magnified(spec["lambda"])
    if kind == "scaled":
        return solver.Mode.scaled(spec["n"])
    regime = spec.get("regime", "scaled" if "offset" in spec else "magnified")
    if regime == "magnified":
        lam_star, _ = solver.thresholds(B, atlas.domain_radius)
        if lam_star == 0:
            lam_star = 1.0
        return solver.Mode.magnified(spec.get("multiplier", 2.0) * lam_star)
    if P.affinity is None:
        raise ConfigurationError("scaled auto mode needs a self-affinity matrix")
    _, N = solver.thresholds(B, atlas.domain_radius, P.affinity)
    return solver.Mode.scaled(N + spec.get("offset", 1))


def prepare(cfg):
    """Everything up to the atlas and its constants."""
    pset = build_pointset(cfg)
    P = build_potential(cfg, pset)
    model = build_interaction(cfg, pset, P.dim)
    sigma = type_matrix(cfg, model)
    atlas = build_atlas(cfg, P, sigma, model)
    return PipelineResult(cfg, pset, P, model, atlas)


def type_spec(cfg, res, mode):
    sigma = type_matrix(cfg, res.model)
    radius = cfg["type"]["radius"]
    if radius == "auto":
        rz = res.atlas.covering_radius_Z
        if mode is not None and mode.kind == "scaled":
            k = cfg["mode"].get("anchor_power", mode.n)
            rz = rz / solver.smallest_expansion(res.potential.affinity) ** k
        radius = 2.0 * rz
    return itx.TypeSpec(sigma, radius)


def run(cfg, threads=1, do_verify=True):
    """Run the full pipeline; solver and verification errors propagate."""
    res = prepare(cfg)
    # the bound B depends on the radius only; resolve it before the mode for auto radii
    provisional = type_spec(cfg, res, None)
    B = res.model.hessian_bound(provisional)
    mode = resolve_mode(cfg, B, res.atlas, res.potential)
    spec = type_spec(cfg, res, mode)
    res.mode = mode
    anchor_power = cfg["mode"].get("anchor_power")
    res.coding = solver.build_coding(res.atlas, spec, res.model, mode, anchor_power)
    tol = cfg["tolerances"]
    res.report = solver.solve(res.model, res.potential, res.coding, mode, tol["tol"],
                              tol["max_iter"], threads=threads)
    if do_verify:
        res.verification = solver.verify(res.report, res.model, res.potential,
                                         probes=cfg["verify"]["probes"], seed=cfg["seed"],
                                         residual_tol=tol["residual"], strict=False, threads=threads)
    return res


def recompute_residuals(cfg, indices, U_interior, collar_indices, collar_values, mode):
    """Residuals from exported values alone (the potential and model are rebuilt)."""
    pset = build_pointset(cfg)
    P = build_potential(cfg, pset)
    model = build_interaction(cfg, pset, P.dim)
    dom = model.domain
    if indices.shape != dom.interior.shape or np.any(indices != dom.interior):
        raise ConfigurationError("report indices do not match the configured domain")
    collar_indices = np.asarray(collar_indices, dtype=np.int64).reshape(-1, dom.rank)
    if collar_indices.shape != dom.collar.shape or np.any(collar_indices != dom.collar):
        raise ConfigurationError("report collar does not match the configured domain")
    U = np.vstack([U_interior, np.asarray(collar_values, dtype=float).reshape(-1, P.dim)])
    r, rs = solver.residuals(model, P, U, mode)
    return np.linalg.norm(r, axis=1), (None if rs is None else np.linalg.norm(rs, axis=1))
