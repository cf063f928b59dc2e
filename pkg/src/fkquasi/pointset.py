"""Delone point sets: periodic grids and cut-and-project quasicrystals.

Sets are finite realizations clipped to an extent. Besides the points they
carry packing/covering radii, the integer lattice coordinates they were
generated from (used by :func:`address_map`) and, for self-affine presets,
the linear part of the self-affinity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DeloneError, EmptySetError

PHI = (1.0 + math.sqrt(5.0)) / 2.0
SILVER = 1.0 + math.sqrt(2.0)

_CLIP_TOL = 1e-9


# --------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigurationError("box corners must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("box corners must be finite")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    @property
    def empty(self):
        return bool(np.any(self.hi <= self.lo))

    def bounds(self):
        return self.lo.copy(), self.hi.copy()

    def contains(self, X, tol=0.0, half_open=False):
        X = np.atleast_2d(X)
        lower = np.all(X >= self.lo - tol, axis=1)
        if half_open:
            return lower & np.all(X < self.hi - tol, axis=1)
        return lower & np.all(X <= self.hi + tol, axis=1)

    def shrink(self, margin):
        return Box(self.lo + margin, self.hi - margin)

    def expand(self, margin):
        return Box(self.lo - margin, self.hi + margin)

    def transform(self, M):
        """Bounding box of the image under the linear map ``M``."""
        corners = np.array(list(itertools.product(*zip(self.lo, self.hi))))
        img = corners @ np.asarray(M, dtype=float).T
        return Box(img.min(axis=0), img.max(axis=0))

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def empty(self):
        return self.radius <= 0

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def contains(self, X, tol=0.0, half_open=False):
        X = np.atleast_2d(X)
        r = np.linalg.norm(X - self.center, axis=1)
        if half_open:
            return r < self.radius - tol
        return r <= self.radius + tol

    def shrink(self, margin):
        return Ball(self.center, self.radius - margin)

    def expand(self, margin):
        return Ball(self.center, self.radius + margin)

    def transform(self, M):
        M = np.asarray(M, dtype=float)
        return Ball(M @ self.center, self.radius * np.linalg.norm(M, 2))

    def to_dict(self):
        return {"center": self.center.tolist(), "radius": self.radius}


def as_region(extent, dim=None):
    """Coerce ``extent`` into a :class:`Box` or :class:`Ball`.

    Accepts region instances, ``(lo, hi)`` pairs (scalars in 1D), or the
    dictionaries produced by ``to_dict``.
    """
    if isinstance(extent, (Box, Ball)):
        region = extent
    elif isinstance(extent, dict):
        if "radius" in extent:
            center = extent.get("center", np.zeros(dim or 2))
            region = Ball(center, extent["radius"])
        else:
            region = Box(extent["lo"], extent["hi"])
    else:
        try:
            lo, hi = extent
        except (TypeError, ValueError):
            raise ConfigurationError(f"cannot interpret extent {extent!r}") from None
        region = Box(lo, hi)
    if dim is not None and region.dim != dim:
        raise ConfigurationError(f"extent has dimension {region.dim}, expected {dim}")
    if region.empty:
        raise ConfigurationError("extent is empty")
    return region


def sample_grid(region, step):
    """Regular grid of spacing ``step`` over ``region`` (inclusive of corners)."""
    lo, hi = region.bounds()
    axes = []
    for a, b in zip(lo, hi):
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        ax = a + step * np.arange(n)
        if b - ax[-1] > 1e-9 * max(1.0, abs(b)):
            ax = np.append(ax, b)
        axes.append(ax)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    if isinstance(region, Ball):
        grid = grid[region.contains(grid)]
    return grid


# --------------------------------------------------------------------------
# Delone sets

@dataclass(frozen=True, eq=False)
class DeloneSet:
    """Finite patch of a Delone set.

    ``points`` is an ``(N, d)`` array sorted lexicographically. ``lattice_coords``
    holds the integer coordinates the points were generated from (grid index
    for periodic sets, Z^n coordinates for cut-and-project sets).
    """

    points: np.ndarray
    packing_radius: float
    covering_radius: float
    extent: Box | Ball
    self_affinity: np.ndarray | None = None
    family: str = "custom"
    lattice_coords: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ConfigurationError("points must be an (N, d) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.self_affinity is not None:
            A = np.atleast_2d(np.asarray(self.self_affinity, dtype=float))
            if A.shape != (self.dim, self.dim):
                raise ConfigurationError("self-affinity matrix has the wrong shape")
            if np.min(np.abs(np.linalg.eigvals(A))) <= 1.0:
                raise ConfigurationError("self-affinity matrix must be expanding")
            A.setflags(write=False)
            object.__setattr__(self, "self_affinity", A)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def eigenvalues(self):
        """Self-affinity eigenvalues sorted by decreasing magnitude."""
        if self.self_affinity is None:
            return None
        ev = np.linalg.eigvals(self.self_affinity)
        return ev[np.argsort(-np.abs(ev), kind="stable")]

    @property
    def smallest_expansion(self):
        ev = self.eigenvalues
        return None if ev is None else float(np.abs(ev[-1]))


def _sort_lex(points, coords=None):
    order = np.lexsort(points.T[::-1])
    points = points[order]
    if coords is not None:
        coords = coords[order]
    return points, coords


def packing_radius(points):
    """Half the minimal pairwise distance."""
    points = np.atleast_2d(points)
    if points.shape[0] < 2:
        raise DeloneError("packing radius needs at least two points")
    dist, _ = cKDTree(points).query(points, k=2)
    return 0.5 * float(dist[:, 1].min())


def _refine_farthest(tree, region, X, step):
    """Compass search maximizing the distance to the nearest point.

    All candidates in ``X`` are refined together; candidates stay inside
    ``region``. Returns the refined distances.
    """
    X = np.array(X, dtype=float, copy=True)
    d = X.shape[1]
    dirs = np.vstack([np.eye(d), -np.eye(d)])
    if d == 2:
        a = np.pi / 4 * np.arange(8)
        dirs = np.stack([np.cos(a), np.sin(a)], axis=1)
    best = tree.query(X)[0]
    h = np.full(X.shape[0], float(step))
    for _ in range(200):
        act = np.flatnonzero(h > 1e-11)
        if act.size == 0:
            break
        trial = (X[act, None, :] + h[act, None, None] * dirs[None, :, :]).reshape(-1, d)
        val = tree.query(trial)[0]
        val[~region.contains(trial)] = -np.inf
        val = val.reshape(act.size, dirs.shape[0])
        k = np.argmax(val, axis=1)
        gain = val[np.arange(act.size), k] > best[act]
        up = act[gain]
        X[up] = trial.reshape(act.size, dirs.shape[0], d)[gain, k[gain]]
        best[up] = val[gain, k[gain]]
        h[act[~gain]] *= 0.5
    return best


def covering_radius(points, region, step=None, refine=32, max_samples=250_000):
    """Estimate the covering radius of ``points`` inside ``region``.

    The empty-ball radius is sampled on a grid of spacing ``step`` (default a
    quarter of the packing radius) over the region shrunk by the current
    estimate, and the best samples are refined by a compass search. The margin is
    iterated until the estimate stops changing.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 3:
        raise DeloneError("covering radius undefined for fewer than three points")
    region = as_region(region, points.shape[1])
    tree = cKDTree(points)
    if step is None:
        step = packing_radius(points) / 4.0
    lo, hi = region.bounds()
    vol = float(np.prod(hi - lo))
    d = points.shape[1]
    if vol / step**d > max_samples:
        step = (vol / max_samples) ** (1.0 / d)

    margin, estimate = 0.0, None
    for _ in range(8):
        inner = region.shrink(margin)
        if inner.empty:
            raise DeloneError("extent too small to estimate the covering radius")
        if d == 1:
            # exact: the farthest point of each gap is its midpoint, clipped
            ilo, ihi = inner.bounds()
            xs = np.sort(points[:, 0])
            cand = np.concatenate([0.5 * (xs[1:] + xs[:-1]), ilo, ihi])
            cand = np.clip(cand, ilo[0], ihi[0])[:, None]
            new = float(tree.query(cand)[0].max())
        else:
            grid = sample_grid(inner, step)
            if grid.shape[0] == 0:
                raise DeloneError("extent too small to estimate the covering radius")
            dist, _ = tree.query(grid)
            best = np.argsort(-dist, kind="stable")[:refine]
            new = float(_refine_farthest(tree, inner, grid[best], step).max())
            new = max(new, float(dist.max()))
        if estimate is not None and abs(new - estimate) <= 1e-12 * max(1.0, new):
            estimate = new
            break
        estimate = new
        margin = estimate
    return estimate


def radii(pset):
    """``(packing_radius, covering_radius)`` recomputed from the points.

    Periodic sets use the exact closed forms; everything else is estimated.
    """
    if len(pset) < 3:
        raise DeloneError("radii need at least three points")
    if pset.family == "periodic":
        a = pset.params["spacing"]
        return 0.5 * a, 0.5 * a * math.sqrt(pset.dim)
    return packing_radius(pset.points), covering_radius(pset.points, pset.extent)


def from_points(points, extent=None, **kwargs):
    """Wrap an arbitrary point cloud, estimating its radii."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise EmptySetError("no points")
    if extent is None:
        extent = Box(points.min(axis=0), points.max(axis=0))
    extent = as_region(extent, points.shape[1])
    coords = kwargs.pop("lattice_coords", None)
    points, coords = _sort_lex(points, coords)
    r = packing_radius(points)
    R = covering_radius(points, extent)
    return DeloneSet(points, r, R, extent, lattice_coords=coords, **kwargs)


def build_periodic(d, spacing, extent):
    """The grid ``spacing * Z^d`` clipped to ``extent``."""
    if d < 1:
        raise ConfigurationError("dimension must be positive")
    if not spacing > 0:
        raise ConfigurationError("spacing must be positive")
    region = as_region(extent, d)
    lo, hi = region.bounds()
    ranges = [np.arange(math.ceil(a / spacing - _CLIP_TOL), math.floor(b / spacing + _CLIP_TOL) + 1)
              for a, b in zip(lo, hi)]
    coords = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d).astype(np.int64)
    points = coords * float(spacing)
    keep = region.contains(points, tol=_CLIP_TOL * max(1.0, spacing))
    points, coords = points[keep], coords[keep]
    if points.shape[0] == 0:
        raise EmptySetError("extent contains no grid points")
    points, coords = _sort_lex(points, coords)
    return DeloneSet(points, 0.5 * spacing, 0.5 * spacing * math.sqrt(d), region,
                     family="periodic", lattice_coords=coords,
                     params={"spacing": float(spacing)})


# --------------------------------------------------------------------------
# cut and project

@dataclass(frozen=True)
class Interval:
    """Window ``(lo, hi]`` (or ``[lo, hi)`` when ``closed_low``)."""

    lo: float
    hi: float
    closed_low: bool = False

    def contains(self, Y):
        y = np.asarray(Y, dtype=float).reshape(-1)
        if self.closed_low:
            return (y >= self.lo) & (y < self.hi)
        return (y > self.lo) & (y <= self.hi)

    def bounds(self):
        return np.array([self.lo]), np.array([self.hi])


@dataclass(frozen=True)
class ConvexPolygon:
    """Intersection of half-planes ``normals @ y <= offsets``."""

    normals: np.ndarray
    offsets: np.ndarray

    def contains(self, Y):
        Y = np.atleast_2d(Y)
        return np.all(Y @ np.asarray(self.normals).T <= np.asarray(self.offsets), axis=1)

    def bounds(self):
        from scipy.optimize import linprog

        lo, hi = [], []
        for k in range(np.asarray(self.normals).shape[1]):
            c = np.zeros(np.asarray(self.normals).shape[1])
            c[k] = 1.0
            a = linprog(c, A_ub=self.normals, b_ub=self.offsets, bounds=(None, None))
            b = linprog(-c, A_ub=self.normals, b_ub=self.offsets, bounds=(None, None))
            lo.append(a.fun)
            hi.append(-b.fun)
        return np.array(lo), np.array(hi)


@dataclass(frozen=True)
class CutAndProjectScheme:
    """Lattice ``B Z^n`` split into physical (d) and internal (n-d) parts."""

    name: str
    total_dim: int
    physical_dim: int
    lattice_basis: np.ndarray
    physical_projection: np.ndarray
    internal_projection: np.ndarray
    window: Interval | ConvexPolygon
    self_affinity: np.ndarray | None = None

    def __post_init__(self):
        B = np.asarray(self.lattice_basis)
        if B.shape != (self.total_dim, self.total_dim) or abs(round(np.linalg.det(B))) != 1:
            raise ConfigurationError("lattice basis must be unimodular")
        if not 0 < self.physical_dim < self.total_dim:
            raise ConfigurationError("physical dimension must lie strictly between 0 and n")


def fibonacci_scheme():
    """Z^2 with points ``a + b*phi`` and window ``(-phi, 1]`` on ``b - a*phi``.

    The short gap is 1 and the long gap phi; lattice coordinates are directly
    the addresses in the basis {1, phi}.
    """
    return CutAndProjectScheme(
        name="fibonacci",
        total_dim=2,
        physical_dim=1,
        lattice_basis=np.eye(2, dtype=np.int64),
        physical_projection=np.array([[1.0, PHI]]),
        internal_projection=np.array([[-PHI, 1.0]]),
        window=Interval(-PHI, 1.0),
        self_affinity=np.array([[PHI]]),
    )


# shift keeps lattice projections off the window boundary
_AB_WINDOW_SHIFT = np.array([1.3e-3 * math.sqrt(2.0) / 7.0, 1.1e-3 * math.sqrt(3.0) / 11.0])


def ammann_beenker_scheme():
    """Z^4 with the eightfold projection pair and a regular octagon window."""
    k = np.arange(4)
    phys = np.vstack([np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)])
    internal = np.vstack([np.cos(3 * k * np.pi / 4), np.sin(3 * k * np.pi / 4)])
    # octagon = internal projection of the centered unit hypercube (a zonogon)
    gens = internal.T
    normals = np.stack([[-g[1], g[0]] for g in gens])
    half = 0.5 * np.sum(np.abs(normals @ internal), axis=1)
    normals = np.vstack([normals, -normals])
    offsets = np.concatenate([half, half]) + normals @ _AB_WINDOW_SHIFT
    return CutAndProjectScheme(
        name="ammann-beenker",
        total_dim=4,
        physical_dim=2,
        lattice_basis=np.eye(4, dtype=np.int64),
        physical_projection=phys,
        internal_projection=internal,
        window=ConvexPolygon(normals, offsets),
        self_affinity=SILVER * np.eye(2),
    )


SCHEMES = {"fibonacci": fibonacci_scheme, "ammann-beenker": ammann_beenker_scheme}


def _int_range(lo, hi):
    return np.arange(math.floor(lo), math.ceil(hi) + 1, dtype=np.int64)


def enumerate_cut_and_project(scheme, extent):
    """All accepted lattice points whose physical image lies in ``extent``.

    The first ``d`` lattice coordinates are enumerated over a norm bound; the
    remaining ``n - d`` are confined by the window through the invertible
    block of the internal projection. Returns ``(points, coords)``.
    """
    n, d = scheme.total_dim, scheme.physical_dim
    region = as_region(extent, d)
    B = np.asarray(scheme.lattice_basis, dtype=float)
    P = np.asarray(scheme.physical_projection, dtype=float) @ B
    I = np.asarray(scheme.internal_projection, dtype=float) @ B
    S = np.vstack([P, I])
    smin = np.linalg.svd(S, compute_uv=False).min()
    plo, phi_ = region.bounds()
    wlo, whi = scheme.window.bounds()
    reach = math.sqrt(float(np.sum(np.maximum(np.abs(plo), np.abs(phi_)) ** 2)
                            + np.sum(np.maximum(np.abs(wlo), np.abs(whi)) ** 2)))
    kmax = reach / smin + 1.0

    I_first, I_last = I[:, :d], I[:, d:]
    inv_last = np.linalg.inv(I_last)
    first = np.stack(np.meshgrid(*[_int_range(-kmax, kmax)] * d, indexing="ij"),
                     axis=-1).reshape(-1, d)
    c = first @ I_first.T
    # box of admissible k_last for each first-block choice
    wcorners = np.array(list(itertools.product(*zip(wlo, whi))))
    img = (wcorners[None, :, :] - c[:, None, :]) @ inv_last.T
    klo = np.floor(img.min(axis=1)).astype(np.int64)
    width = int((np.ceil(img.max(axis=1)).astype(np.int64) - klo).max()) + 1
    offsets = np.stack(np.meshgrid(*[np.arange(width)] * (n - d), indexing="ij"),
                       axis=-1).reshape(-1, n - d)

    pts_all, coords_all = [], []
    for off in offsets:
        k = np.hstack([first, klo + off])
        y = k @ I.T
        ok = scheme.window.contains(y)
        k = k[ok]
        x = k @ P.T
        inside = region.contains(x)
        pts_all.append(x[inside])
        coords_all.append(k[inside])
    pts = np.vstack(pts_all)
    coords = np.vstack(coords_all)
    if pts.shape[0] == 0:
        raise EmptySetError("extent contains no accepted lattice points")
    # a lattice point can be produced by at most one offset; dedupe defensively
    coords, uniq = np.unique(coords, axis=0, return_index=True)
    pts = pts[uniq]
    pts, coords = _sort_lex(pts, coords)
    return pts, coords


def build_cut_and_project(scheme, extent):
    """Cut-and-project Delone set for a scheme or preset name."""
    if isinstance(scheme, str):
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown preset {scheme!r}; choose from {sorted(SCHEMES)}")
        scheme = SCHEMES[scheme]()
    region = as_region(extent, scheme.physical_dim)
    pts, coords = enumerate_cut_and_project(scheme, region)
    if pts.shape[0] < 3:
        raise EmptySetError("extent too small: fewer than three accepted points")
    r = packing_radius(pts)
    R = covering_radius(pts, region)
    return DeloneSet(pts, r, R, region, self_affinity=scheme.self_affinity,
                     family=scheme.name, lattice_coords=coords)


# --------------------------------------------------------------------------
# address map

@dataclass(frozen=True, eq=False)
class AddressTable:
    rank: int
    addresses: np.ndarray
    projection: np.ndarray
    points: np.ndarray
    lipschitz_estimate: float

    def reconstruct(self, addresses=None):
        a = self.addresses if addresses is None else np.atleast_2d(addresses)
        return a @ self.projection.T

    def lookup(self, address):
        """Position of the point with the given integer address."""
        hit = np.flatnonzero(np.all(self.addresses == np.asarray(address), axis=1))
        if hit.size == 0:
            raise KeyError(tuple(address))
        return self.points[hit[0]]


def address_map(pset):
    """Integer addresses for the rank-2 Fibonacci preset or a periodic grid."""
    if pset.family == "fibonacci":
        addresses = np.asarray(pset.lattice_coords, dtype=np.int64)
        psi = np.array([[1.0, PHI]])
    elif pset.family == "periodic":
        addresses = np.asarray(pset.lattice_coords, dtype=np.int64)
        psi = pset.params["spacing"] * np.eye(pset.dim)
    else:
        raise NotImplementedError(f"address map not available for family {pset.family!r}")
    recon = addresses @ psi.T
    if np.max(np.abs(recon - pset.points)) > 1e-9 * max(1.0, np.max(np.abs(pset.points))):
        raise DeloneError("address reconstruction failed")

    tree = cKDTree(pset.points)
    pairs = tree.query_pairs(3.0 * pset.covering_radius + 1e-12, output_type="ndarray")
    lip = 0.0
    if pairs.size:
        da = np.linalg.norm(addresses[pairs[:, 0]] - addresses[pairs[:, 1]], axis=1)
        dx = np.linalg.norm(pset.points[pairs[:, 0]] - pset.points[pairs[:, 1]], axis=1)
        lip = float(np.max(da / dx))
    return AddressTable(addresses.shape[1], addresses, psi, pset.points, lip)


# --------------------------------------------------------------------------
# local structure

def pair_census(pset, max_distance, decimals=6, region=None):
    """Distinct difference vectors ``y - x`` with ``|y - x| <= max_distance``.

    Only pairs with both points inside ``region`` (default: the full set) are
    counted. Finite local complexity means this set stays fixed as the patch
    grows.
    """
    pts = pset.points
    if region is not None:
        pts = pts[as_region(region, pset.dim).contains(pts)]
    pairs = cKDTree(pts).query_pairs(max_distance + 1e-9, output_type="ndarray")
    if pairs.size == 0:
        return frozenset()
    diff = pts[pairs[:, 1]] - pts[pairs[:, 0]]
    diff = np.vstack([diff, -diff])
    rounded = np.round(diff, decimals) + 0.0
    return frozenset(map(tuple, rounded.tolist()))


# --------------------------------------------------------------------------
# CSV

def save_csv(pset_or_points, path):
    """One point per row, 17 significant digits."""
    pts = pset_or_points.points if isinstance(pset_or_points, DeloneSet) else np.atleast_2d(pset_or_points)
    d = pts.shape[1]
    header = ",".join(f"x{k}" for k in range(d))
    np.savetxt(path, pts, fmt="%.17g", delimiter=",", header=header, comments="")


def load_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, dtype=float).reshape(-1, _csv_dim(path)))


def _csv_dim(path):
    with open(path) as fh:
        return len(fh.readline().strip().split(","))


# --------------------------------------------------------------------------
# self-affinity

def inflate(pset):
    """Inflate a Fibonacci set by ``phi`` and subdivide the long gaps.

    Every gap is scaled by ``phi``; a scaled long gap (length ``phi^2``) is
    split into a long and a short gap. The result is again a Fibonacci
    chain, which is the self-affinity ``A = phi`` acting on tilings.
    """
    if pset.family != "fibonacci":
        raise NotImplementedError("inflation is implemented for the Fibonacci preset only")
    x = pset.points[:, 0]
    gaps = np.diff(x)
    long_ = gaps > 0.5 * (1.0 + PHI)
    new = np.concatenate([PHI * x, PHI * x[:-1][long_] + PHI])
    return np.sort(new)[:, None]
