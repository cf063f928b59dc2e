"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed at the end of the pytest run (see ``conftest.py``) and
when this file is executed directly.
"""
import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from fkquasi import config, interaction as it, landscape as ls, pipeline, pointset as ps
from fkquasi import potential as pot, solver as sv

import oracles

RESULTS = {}


def record(n, title, passed, detail):
    line = f"criterion {n:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS[n] = line
    print(line, flush=True)
    assert passed, line


# --------------------------------------------------------------------------
# shared instances

@pytest.fixture(scope="module")
def classic():
    cfg = config.load("fk-classic")
    t0 = time.perf_counter()
    res = pipeline.run(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cos_family():
    P = pot.make_periodic_potential("one_minus_cos", 1)
    atlas = ls.find_critical_points(P, (-540.0, 540.0))
    atlas = atlas.with_constants(ls.estimate_constants(P, atlas))
    model = it.make_interaction("nn_quadratic_1d", (-100, 100))
    coding = sv.build_coding(atlas, it.TypeSpec(5.0, math.pi), model)
    B = model.hessian_bound(coding.spec)
    lam_star, _ = sv.thresholds(B, atlas.domain_radius)
    reps = [sv.solve(model, P, coding, sv.Mode.magnified(k * lam_star)) for k in (2, 4, 8)]
    return atlas, B, lam_star, reps


@pytest.fixture(scope="module")
def wells():
    fib = ps.build_cut_and_project("fibonacci", (-1500.0, 1500.0))
    P = pot.make_bump_potential(fib, 1.0, 0.5, -1)
    region = ps.Box([-150.0], [150.0])
    atlas = ls.find_critical_points(P, region)
    atlas = atlas.with_constants(ls.estimate_constants(P, atlas))
    return fib, P, region, atlas


# --------------------------------------------------------------------------

def test_criterion_01_classical_fk(classic):
    res, elapsed = classic
    rep = res.report
    n = res.model.n_interior
    ok = (n == 201 and rep.mode.lam == 20 and rep.iterations < 200
          and rep.residual_sup < 1e-10 and elapsed < 1.0 and res.verification.passed)
    record(1, "classical FK", ok,
           f"window {n}, {rep.iterations} sweeps, residual_sup {rep.residual_sup:.2e}, "
           f"runtime {elapsed:.3f} s")


def test_criterion_02_oracle(classic):
    res, _ = classic
    model, rep = res.model, res.report
    n = model.n_interior
    U = rep.configuration[:, 0]
    t0 = time.perf_counter()
    ref = oracles.fk_direct_newton(20.0, res.coding.anchors[:n, 0],
                                   U[model.site(-101)], U[model.site(101)])
    elapsed = time.perf_counter() - t0
    diff = float(np.max(np.abs(ref - U[:n])))
    record(2, "oracle equivalence", diff < 1e-8 and elapsed < 5.0,
           f"sup difference {diff:.2e}, oracle runtime {elapsed:.3f} s")


def test_criterion_03_uniqueness(classic):
    res, _ = classic
    rep = res.report
    rng = np.random.default_rng(3)
    n = res.model.n_interior
    worst = 0.0
    for _ in range(10):
        start = rep.configuration.copy()
        start[:n] += rng.uniform(-0.1, 0.1, start[:n].shape)
        other = sv.solve(res.model, res.potential, res.coding, rep.mode, start=start)
        worst = max(worst, float(np.max(np.abs(other.configuration - rep.configuration))))
    record(3, "uniqueness", worst < 1e-10, f"10 perturbed starts, max spread {worst:.2e}")


def test_criterion_04_contraction_rate(cos_family):
    atlas, B, lam_star, reps = cos_family
    K = atlas.inverse_bound
    rhos = [r.rho_empirical for r in reps]
    bounds = [1.1 * K * B / r.mode.lam for r in reps]
    halving = [b / a for a, b in zip(rhos, rhos[1:])]
    ok = all(r <= b for r, b in zip(rhos, bounds)) and all(0.4 <= h <= 0.6 for h in halving)
    record(4, "contraction rate", ok,
           f"lambda_* {lam_star:.4g}, rho {', '.join(f'{r:.4g}' for r in rhos)} "
           f"(bounds {', '.join(f'{b:.3g}' for b in bounds)}), ratios {', '.join(f'{h:.3f}' for h in halving)}")


def test_criterion_05_anchor_distance(cos_family):
    _, _, _, reps = cos_family
    d = [r.anchor_distance for r in reps]
    ratios = [b / a for a, b in zip(d, d[1:])]
    record(5, "anchor-distance law", all(0.4 <= q <= 0.6 for q in ratios),
           f"distances {', '.join(f'{x:.4g}' for x in d)}, ratios {', '.join(f'{q:.3f}' for q in ratios)}")


def test_criterion_06_coding_feasibility(wells):
    _, _, _, atlas = wells
    model = it.make_interaction("nn_quadratic_1d", (-40, 40))
    rng = np.random.default_rng(6)
    rz = atlas.covering_radius_Z
    failures, worst = 0, 0.0
    for sigma in rng.uniform(-3, 3, 100):
        try:
            c = sv.build_coding(atlas, it.TypeSpec(float(sigma), 2 * rz), model)
        except Exception:
            failures += 1
            continue
        worst = max(worst, c.deviation)
        failures += c.deviation > 2 * rz
    record(6, "coding feasibility", failures == 0,
           f"100 draws, {failures} failures, max deviation {worst:.4f} <= 2 r_Z = {2 * rz:.4f}")


def test_criterion_07_atlas_fidelity(wells):
    fib, _, region, atlas = wells
    pts = fib.points[region.contains(fib.points, half_open=True)]
    same = len(atlas) == len(pts)
    err = float(np.max(np.abs(atlas.points - pts))) if same else math.inf
    target = ps.PHI / 2
    rz = atlas.covering_radius_Z
    # the same statistic measured directly on the generated set
    rz_set = ps.covering_radius(pts, region)
    gaps = np.diff(pts[:, 0])
    ok = same and err < 1e-9 and abs(rz / target - 1) < 0.05 and abs(rz / rz_set - 1) < 0.05
    record(7, "critical-set fidelity", ok,
           f"{len(atlas)} critical points vs {len(pts)} set points, position error {err:.1e}, "
           f"r_Z {rz:.6f} (phi/2 = {target:.6f}, set {rz_set:.6f}, max gap/2 {gaps.max() / 2:.6f})")


def test_criterion_08_self_affine(wells):
    _, P, _, atlas = wells
    t0 = time.perf_counter()
    model = it.make_interaction("nn_quadratic_1d", (-50, 50))
    spec = it.TypeSpec(2.0, 2 * atlas.covering_radius_Z)
    B = model.hessian_bound(spec)
    _, N = sv.thresholds(B, atlas.domain_radius, P.affinity)
    dist, res = [], []
    for n in (N + 1, N + 2, N + 3):
        mode = sv.Mode.scaled(n)
        coding = sv.build_coding(atlas, spec, model, mode, anchor_power=0)
        rep = sv.solve(model, P, coding, mode)
        dist.append(rep.anchor_distance)
        res.append(rep.scaled_residual_sup)
    elapsed = time.perf_counter() - t0
    ratios = [b / a for a, b in zip(dist, dist[1:])]
    target = ps.PHI ** -2
    ok = (all(r < 1e-9 for r in res) and all(abs(q / target - 1) <= 0.25 for q in ratios)
          and elapsed < 10.0)
    record(8, "self-affine mode", ok,
           f"N {N}, residuals {', '.join(f'{r:.1e}' for r in res)}, decay ratios "
           f"{', '.join(f'{q:.4f}' for q in ratios)} (phi^-2 = {target:.4f}), runtime {elapsed:.2f} s")


def test_criterion_09_multidim():
    cfg = config.load("fk-multidim")
    t0 = time.perf_counter()
    res = pipeline.run(cfg)
    elapsed = time.perf_counter() - t0
    rep = res.report
    ok = (res.model.domain.rank == 2 and res.model.n_interior == 41 * 41 and rep.mode.lam == 30
          and rep.residual_sup < 1e-10 and elapsed < 10.0)
    record(9, "multidimensional model", ok,
           f"{res.model.n_interior} sites, {rep.iterations} sweeps, residual_sup {rep.residual_sup:.2e}, "
           f"runtime {elapsed:.2f} s")


def test_criterion_10_address_model():
    cfg = config.load("fibonacci-address")
    res = pipeline.run(cfg)
    rep = res.report
    ok = res.model.tau == 2 and res.coding.deviation == 0.0 and rep.residual_sup < 1e-10
    record(10, "address-map model", ok,
           f"coding deviation {res.coding.deviation!r}, {rep.iterations} sweeps, "
           f"residual_sup {rep.residual_sup:.2e}")


def _fd_errors(P, X, h=1e-5):
    _, G, H = P.eval_batch(X)
    d = X.shape[1]
    Gfd = np.zeros_like(G)
    Hfd = np.zeros_like(H)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        Gfd[:, k] = (P(X + e) - P(X - e)) / (2 * h)
        Hfd[:, :, k] = (P.gradient(X + e) - P.gradient(X - e)) / (2 * h)
    rel = lambda a, b: float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))
    return rel(Gfd, G), rel(Hfd, H)


def test_criterion_11_derivatives():
    rng = np.random.default_rng(11)
    fib = ps.build_cut_and_project("fibonacci", (0.0, 100.0))
    ab = ps.build_cut_and_project("ammann-beenker", {"radius": 12.0})
    cases = {
        "bump fibonacci": (pot.make_bump_potential(fib, 1.3, 0.45, 1), rng.uniform(1, 99, (1000, 1))),
        "bump fibonacci scaled": (pot.make_bump_potential(fib, 1.0, 0.45, -1).scale(2),
                                  rng.uniform(1, 30, (1000, 1))),
        "bump ammann-beenker": (pot.make_bump_potential(ab, 0.7, 0.35, -1), rng.uniform(-8, 8, (1000, 2))),
        "cos d=1": (pot.make_periodic_potential("one_minus_cos", 1), rng.uniform(-10, 10, (1000, 1))),
        "cos d=2": (pot.make_periodic_potential("one_minus_cos", 2), rng.uniform(-10, 10, (1000, 2))),
    }
    worst = {name: max(_fd_errors(P, X)) for name, (P, X) in cases.items()}
    record(11, "derivative consistency", max(worst.values()) < 1e-6,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_12_geometry():
    fib = ps.build_cut_and_project("fibonacci", (-500.0, 500.0))
    gaps = np.diff(fib.points[:, 0])
    long_, short = gaps.max(), gaps.min()
    ratio_err = abs(long_ / short - ps.PHI)
    distinct = np.unique(np.round(gaps, 9)).size
    small = ps.build_cut_and_project("ammann-beenker", {"radius": 30.0})
    large = ps.build_cut_and_project("ammann-beenker", {"radius": 60.0})
    c30, c60 = ps.pair_census(small, 2.0), ps.pair_census(large, 2.0)
    ok = ratio_err < 1e-9 and distinct == 2 and c30 == c60
    record(12, "Fibonacci and Ammann-Beenker geometry", ok,
           f"gap ratio error {ratio_err:.1e}, census {len(c30)} classes at radius 30, "
           f"{len(c60)} at radius 60, equal {c30 == c60}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
