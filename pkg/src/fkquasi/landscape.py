"""Non-degenerate critical points of a potential and the local inverses of
its gradient around them.

The atlas stores every critical point ``z`` with ``grad V(z) = 0`` and
``det H(V)(z) != 0`` found in a region, together with the covering radius of
that set. :func:`estimate_constants` then samples the radius ``R_V`` on which
Newton from ``z`` inverts ``grad V`` and the bound ``K_V`` on the derivative
of those inverses.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import (ConfigurationError, DegeneratePotentialError, DomainError,
                     IllConditionedError, NumericalError)
from .pointset import Ball, Box, as_region, covering_radius, sample_grid

_EPS = np.finfo(float).eps


# --------------------------------------------------------------------------
# batched damped Newton

def _solve_batch(H, F):
    """Solve ``H x = F`` row by row; rows with singular ``H`` come back NaN."""
    d = F.shape[1]
    if d == 1:
        h = H[:, 0, 0]
        out = np.full_like(F, np.nan)
        ok = h != 0
        out[ok, 0] = F[ok, 0] / h[ok]
        return out
    det = np.linalg.det(H)
    out = np.full_like(F, np.nan)
    ok = np.abs(det) > 1e-300
    if ok.any():
        out[ok] = np.linalg.solve(H[ok], F[ok][..., None])[..., 0]
    return out


def damped_newton(P, X0, Y, tol=1e-13, max_iter=100, max_halvings=50):
    """Solve ``grad V(x) = y`` for every row, starting from ``X0``.

    A Newton step is halved until the residual norm decreases. A row counts
    as converged when the residual drops below ``tol`` or when the Newton
    step falls below the floating-point resolution of ``x``.

    Returns ``(X, converged, residual_norms)``.
    """
    X = np.array(X0, dtype=float, copy=True).reshape(-1, P.dim)
    Y = np.broadcast_to(np.asarray(Y, dtype=float).reshape(-1, P.dim), X.shape)
    m = X.shape[0]
    _, G, H = P.eval_batch(X)
    F = G - Y
    res = np.linalg.norm(F, axis=1)
    converged = res <= tol
    failed = np.zeros(m, dtype=bool)

    for _ in range(max_iter):
        act = np.flatnonzero(~converged & ~failed)
        if act.size == 0:
            break
        step = _solve_batch(H[act], F[act])
        bad = ~np.all(np.isfinite(step), axis=1)
        failed[act[bad]] = True
        act, step = act[~bad], step[~bad]
        if act.size == 0:
            break
        xnorm = np.maximum(1.0, np.linalg.norm(X[act], axis=1))
        tiny = np.linalg.norm(step, axis=1) <= 4 * _EPS * xnorm
        converged[act[tiny]] = True
        act, step = act[~tiny], step[~tiny]

        t = np.ones(act.size)
        pending = np.arange(act.size)
        for _h in range(max_halvings + 1):
            if pending.size == 0:
                break
            rows = act[pending]
            Xn = X[rows] - t[pending, None] * step[pending]
            _, Gn, Hn = P.eval_batch(Xn)
            Fn = Gn - Y[rows]
            rn = np.linalg.norm(Fn, axis=1)
            better = rn < res[rows]
            acc = rows[better]
            X[acc], F[acc], H[acc], res[acc] = Xn[better], Fn[better], Hn[better], rn[better]
            pending = pending[~better]
            t[pending] *= 0.5
        # No decrease after all halvings. At the rounding floor of the
        # residual this is convergence, anywhere else it is failure.
        stalled = act[pending]
        if stalled.size:
            _, Gs, Hs = P.eval_batch(X[stalled])
            floor = 64 * _EPS * (
                np.linalg.norm(Hs, ord=2, axis=(1, 2)) * np.maximum(1.0, np.linalg.norm(X[stalled], axis=1))
                + np.linalg.norm(Y[stalled], axis=1))
            at_floor = res[stalled] <= floor
            converged[stalled[at_floor]] = True
            failed[stalled[~at_floor]] = True
        converged |= res <= tol

    return X, (converged & ~failed) | (res <= tol), res


# --------------------------------------------------------------------------
# atlas

@dataclass(frozen=True, eq=False)
class CriticalAtlas:
    """Non-degenerate critical points of ``potential`` in ``region``.

    ``domain_radius`` (R_V), ``inverse_bound`` (K_V) and ``epsilon_prime``
    are ``None`` until :func:`estimate_constants` has been applied through
    :meth:`with_constants`.
    """

    potential: object
    points: np.ndarray
    hessians: np.ndarray
    region: Box | Ball
    covering_radius_Z: float
    det_threshold: float = 1e-8
    domain_radius: float | None = None
    inverse_bound: float | None = None
    epsilon_prime: float | None = None

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def determinants(self):
        return np.linalg.det(self.hessians)

    def select(self, kind):
        """Sub-atlas of minima, maxima or saddles (by Hessian inertia)."""
        ev = np.linalg.eigvalsh(self.hessians)
        if kind == "minima":
            keep = np.all(ev > 0, axis=1)
        elif kind == "maxima":
            keep = np.all(ev < 0, axis=1)
        elif kind == "saddles":
            keep = np.any(ev > 0, axis=1) & np.any(ev < 0, axis=1)
        elif kind == "all":
            return self
        else:
            raise ConfigurationError(f"unknown critical point kind {kind!r}")
        pts = self.points[keep]
        if pts.shape[0] == 0:
            raise DegeneratePotentialError(f"atlas has no {kind}")
        return replace(self, points=pts, hessians=self.hessians[keep],
                       covering_radius_Z=covering_radius(pts, self.region))

    def with_constants(self, constants):
        return replace(self, domain_radius=constants.domain_radius,
                       inverse_bound=constants.inverse_bound,
                       epsilon_prime=constants.epsilon_prime)

    def local_inverse(self, z, y, tol=1e-13):
        if self.domain_radius is None:
            raise ConfigurationError("atlas constants have not been estimated")
        return local_inverse(self.potential, z, y, tol, domain_radius=self.domain_radius)

    def to_csv(self, path):
        d = self.dim
        header = [f"z{k}" for k in range(d)] + ["det_hessian"] + [
            f"h{a}{b}" for a in range(d) for b in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for z, H, det in zip(self.points, self.hessians, self.determinants):
                w.writerow([f"{v:.17g}" for v in (*z, det, *H.ravel())])


def _region_points(region, X):
    return region.contains(X, half_open=True) if isinstance(region, Box) else region.contains(X)


def find_critical_points(P, region, grid_step=None, tol=1e-12, det_threshold=1e-8):
    """Newton on ``grad V`` from every node of a grid over ``region``.

    Box regions are half-open ``[lo, hi)``. Converged points closer than
    ``sqrt(tol)`` are merged; points with ``|det H| <= det_threshold`` are
    discarded.
    """
    if tol > 1e-10:
        raise ConfigurationError("critical point tolerance must be <= 1e-10")
    region = as_region(region, P.dim)
    if grid_step is None:
        grid_step = P.equivariance_range / 2.0
    if grid_step > P.equivariance_range / 2.0 * (1 + 1e-12):
        raise ConfigurationError("grid step must not exceed half the equivariance range")

    known = P.known_critical_points()
    known = known[_region_points(region, known)]
    seeds = np.vstack([known, sample_grid(region, grid_step)])
    X, ok, _ = damped_newton(P, seeds, np.zeros(P.dim), tol=tol)
    # Polish to floating resolution. Near a degenerate critical point Newton
    # only converges linearly, so the Hessian there collapses and the
    # determinant test below rejects it.
    X[ok], _, _ = damped_newton(P, X[ok], np.zeros(P.dim), tol=0.0, max_iter=200)
    _, G, H = P.eval_batch(X)
    # far from the origin the gradient cannot resolve below ~eps*|H|*|x|
    floor = 16 * _EPS * np.linalg.norm(H, ord=2, axis=(1, 2)) * np.maximum(1.0, np.linalg.norm(X, axis=1))
    keep = ok & (np.abs(np.linalg.det(H)) > det_threshold)
    keep &= np.linalg.norm(G, axis=1) <= np.maximum(tol, floor)
    keep &= _region_points(region, X)
    if not np.any(keep):
        raise DegeneratePotentialError("no non-degenerate critical points in region")

    # merge duplicates; closed-form points come first and win
    cand = np.flatnonzero(keep)
    tree = cKDTree(X[cand])
    removed = np.zeros(cand.size, dtype=bool)
    radius = math.sqrt(tol)
    for i in range(cand.size):
        if removed[i]:
            continue
        for j in tree.query_ball_point(X[cand[i]], radius):
            if j > i:
                removed[j] = True
    sel = cand[~removed]
    X, H = X[sel], H[sel]
    order = np.lexsort(X.T[::-1])
    X, H = X[order], H[order]
    if X.shape[0] < 3:
        raise DegeneratePotentialError("too few critical points to cover the region")
    rz = covering_radius(X, region)
    return CriticalAtlas(P, X, H, region, rz, det_threshold)


# --------------------------------------------------------------------------
# local inverses and uniform constants

def local_inverse(P, z, y, tol=1e-13, domain_radius=None):
    """``K_z(y)``: the solution of ``grad V(x) = y`` reached by Newton from ``z``."""
    z = np.asarray(z, dtype=float).reshape(P.dim)
    y = np.asarray(y, dtype=float).reshape(P.dim)
    if domain_radius is not None and np.linalg.norm(y) > domain_radius:
        raise DomainError(f"|y| = {np.linalg.norm(y):.6g} exceeds R_V = {domain_radius:.6g}")
    X, ok, res = damped_newton(P, z[None, :], y[None, :], tol=tol)
    if not ok[0] or np.linalg.norm(X[0] - z) > P.equivariance_range:
        raise NumericalError(f"Newton failed to invert the gradient from z={z} (residual {res[0]:.3g})")
    return X[0]


def batch_local_inverse(P, Z, Y, tol=1e-13):
    """Vectorised ``K_z(y)`` for rows of ``Z`` and ``Y``; returns ``(X, ok)``."""
    X, ok, _ = damped_newton(P, Z, Y, tol=tol)
    ok &= np.linalg.norm(X - Z, axis=1) <= P.equivariance_range
    return X, ok


def probe_directions(d, count, seed=0):
    if count < 1:
        raise ConfigurationError("probe_count must be positive")
    if d == 1:
        return np.array([[1.0], [-1.0]])[: min(count, 2)] if count < 2 else np.array([[1.0], [-1.0]])
    if d == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(count, d))
    v = np.vstack([np.eye(d), -np.eye(d), v])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class LandscapeConstants:
    domain_radius: float
    inverse_bound: float
    epsilon_prime: float
    initial_guess: float

    def __iter__(self):
        yield self.domain_radius
        yield self.inverse_bound


def _hessian_lipschitz(P, Z, radius, samples=64, seed=0):
    rng = np.random.default_rng(seed)
    Zs = Z[: min(len(Z), 16)]
    dirs = rng.normal(size=(samples, P.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rad = radius * rng.uniform(0.05, 1.0, size=samples)
    L = 0.0
    for z in Zs:
        X = z + dirs * rad[:, None]
        _, _, HX = P.eval_batch(X)
        _, _, Hz = P.eval_batch(z[None, :])
        diff = np.linalg.norm(HX - Hz, ord=2, axis=(1, 2))
        L = max(L, float(np.max(diff / rad)))
    return L


def estimate_constants(P, atlas, probe_count=8, tol=1e-13, conditioning=0.1,
                       bisection_steps=12, safety=1.05, seed=0):
    """Sample ``R_V``, ``K_V`` and ``epsilon'`` for the atlas.

    A radius ``t`` is accepted when, for every atlas point ``z`` and every
    probe direction ``e``, Newton from ``z`` solves ``grad V(x) = t e`` while
    staying within the equivariance range of ``z`` and landing where the
    Hessian keeps the inertia of ``H(z)``, ``|det H| > det_threshold`` and the
    smallest singular value is at least ``conditioning`` times that at ``z``.

    The search starts from ``s_min^2 / (2 L)`` (``s_min`` the smallest
    singular value of the Hessians on the atlas, ``L`` a sampled Lipschitz
    constant of the Hessian), brackets by doubling and bisects
    ``bisection_steps`` times. ``K_V`` is the largest sampled
    ``|H(x)^-1|_op`` over radii up to ``R_V``, times ``safety``.
    """
    if probe_count < 1:
        raise ConfigurationError("probe_count must be positive")
    if len(atlas) == 0:
        raise ConfigurationError("atlas is empty")
    Z, HZ = atlas.points, atlas.hessians
    d = P.dim
    dirs = probe_directions(d, probe_count, seed)
    sv_z = np.linalg.svd(HZ, compute_uv=False)
    smin_z = sv_z.min(axis=1)
    pos_z = np.sum(np.linalg.eigvalsh(HZ) > 0, axis=1)
    Zr = np.repeat(Z, dirs.shape[0], axis=0)
    smin_r = np.repeat(smin_z, dirs.shape[0])
    pos_r = np.repeat(pos_z, dirs.shape[0])
    Dr = np.tile(dirs, (Z.shape[0], 1))
    reach = P.equivariance_range

    def probe(t):
        X, ok, _ = damped_newton(P, Zr, t * Dr, tol=tol)
        ok &= np.linalg.norm(X - Zr, axis=1) < reach
        _, _, HX = P.eval_batch(X)
        sv = np.linalg.svd(HX, compute_uv=False)
        ok &= sv.min(axis=1) >= conditioning * smin_r
        ok &= np.abs(np.linalg.det(HX)) > atlas.det_threshold
        ok &= np.sum(np.linalg.eigvalsh(HX) > 0, axis=1) == pos_r
        return bool(ok.all()), X, sv

    L = _hessian_lipschitz(P, Z, reach / 2.0, seed=seed)
    guess = float(smin_z.min() ** 2 / (2.0 * L)) if L > 0 else 1.0
    guess = min(guess, 1e6)

    if probe(guess)[0]:
        lo, hi = guess, 2.0 * guess
        for _ in range(40):
            if not probe(hi)[0]:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise IllConditionedError("gradient inverse never failed; potential unbounded?")
    else:
        lo, hi = 0.0, guess
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        if probe(mid)[0]:
            lo = mid
        else:
            hi = mid
    R_V = lo
    if R_V < 1e-6:
        raise IllConditionedError(f"R_V collapsed to {R_V:.3g}")

    inv_norm = float((1.0 / smin_z).max())
    eps_prime = 0.0
    for frac in (0.25, 0.5, 0.75, 1.0):
        ok, X, sv = probe(frac * R_V)
        if not ok:
            raise IllConditionedError("probe failed inside the accepted radius")
        inv_norm = max(inv_norm, float((1.0 / sv.min(axis=1)).max()))
        eps_prime = max(eps_prime, float(np.linalg.norm(X - Zr, axis=1).max()))
    return LandscapeConstants(R_V, safety * inv_norm, eps_prime, guess)


def inverse_norm_at(P, atlas, radius, probe_count=8, tol=1e-13):
    """Largest ``|H(K_z(y))^-1|_op`` over atlas points and probes with ``|y| = radius``."""
    dirs = probe_directions(P.dim, probe_count)
    Zr = np.repeat(atlas.points, dirs.shape[0], axis=0)
    Y = radius * np.tile(dirs, (len(atlas), 1))
    X, ok = batch_local_inverse(P, Zr, Y, tol)
    if not ok.all():
        raise NumericalError("local inverse failed at the requested radius")
    _, _, HX = P.eval_batch(X)
    return float((1.0 / np.linalg.svd(HX, compute_uv=False).min(axis=1)).max())


def scaled_points(atlas, n, affinity):
    """``A^-n`` applied to the atlas points."""
    Ainv = np.linalg.inv(np.linalg.matrix_power(np.atleast_2d(affinity), n))
    return atlas.points @ Ainv.T
