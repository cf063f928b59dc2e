"""Finite-range pair interactions on integer index domains.

Every family here is a sum of pair terms ``H_{i,j}(u) = |u_i - u_j|^p / p``,
counted once per unordered neighbor pair, so that

    Q_i(u) = sum_{j ~ i} |u_i - u_j|^(p-2) (u_i - u_j).

``p = 2`` gives the quadratic families. Interior sites are followed by a
frozen collar holding every neighbor outside the window; configuration arrays
are laid out the same way (interior rows first).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from . import kernels
from .errors import ConfigurationError
from .pointset import PHI, address_map, as_region

FAMILIES = ("none", "nn_quadratic_1d", "laplacian_quadratic", "p_power_1d", "address_neighborhood")


@dataclass(frozen=True)
class TypeSpec:
    """Type ``sigma`` with radius ``R``: configurations with ``|u_i - i M| <= R``.

    ``sigma`` is the ``r x d`` matrix ``M`` whose rows map unit index steps to
    displacements in value space.
    """

    sigma: np.ndarray
    radius: float

    def __post_init__(self):
        M = np.asarray(self.sigma, dtype=float)
        if M.ndim == 0:
            M = M.reshape(1, 1)
        elif M.ndim == 1:
            M = M.reshape(-1, 1)
        if not np.all(np.isfinite(M)):
            raise ConfigurationError("type matrix must have finite entries")
        if not (np.isfinite(self.radius) and self.radius >= 0):
            raise ConfigurationError("type radius must be finite and nonnegative")
        object.__setattr__(self, "sigma", M)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def rank(self):
        return self.sigma.shape[0]

    @property
    def value_dim(self):
        return self.sigma.shape[1]

    def targets(self, indices):
        """``i M`` for each row ``i`` of ``indices``."""
        return np.asarray(indices, dtype=float) @ self.sigma


@dataclass(frozen=True, eq=False)
class IndexDomain:
    """Interior indices plus the frozen collar of outside neighbors.

    ``positions`` optionally stores the physical point behind each index
    (address domains).
    """

    rank: int
    interior: np.ndarray
    collar: np.ndarray
    positions: np.ndarray | None = None

    @property
    def sites(self):
        return np.vstack([self.interior, self.collar])

    @property
    def n_interior(self):
        return self.interior.shape[0]

    def __len__(self):
        return self.interior.shape[0] + self.collar.shape[0]

    @staticmethod
    def box(lo, hi):
        """All integer points of ``[lo, hi]`` (inclusive), no collar yet."""
        lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ConfigurationError("index window is empty")
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
        return IndexDomain(lo.size, grid, np.zeros((0, lo.size), dtype=np.int64))


class InteractionModel:
    """A pair-interaction family on an :class:`IndexDomain` with CSR neighbor lists."""

    def __init__(self, family, domain, value_dim, indptr, indices, p=2.0, tau=None):
        self.family = family
        self.domain = domain
        self.value_dim = int(value_dim)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.rows = np.repeat(np.arange(domain.n_interior, dtype=np.int64), np.diff(self.indptr))
        self.p = float(p)
        self.tau = tau
        self._lookup = {tuple(s): k for k, s in enumerate(domain.sites.tolist())}

    # structure ------------------------------------------------------------
    @property
    def n_interior(self):
        return self.domain.n_interior

    @property
    def rank(self):
        return self.domain.rank

    @property
    def max_degree(self):
        deg = np.diff(self.indptr)
        return int(deg.max()) if deg.size else 0

    def site(self, i):
        """Row of index ``i`` in configuration arrays."""
        key = tuple(int(v) for v in np.atleast_1d(i))
        if key not in self._lookup:
            raise ConfigurationError(f"index {key} is outside the domain")
        return self._lookup[key]

    def neighbors(self, i):
        """Neighbor indices of interior index ``i``."""
        k = self.site(i)
        if k >= self.n_interior:
            raise ConfigurationError(f"index {tuple(np.atleast_1d(i))} is a collar index")
        sites = self.domain.sites
        return [tuple(int(v) for v in sites[j]) for j in self.indices[self.indptr[k]:self.indptr[k + 1]]]

    # forces ---------------------------------------------------------------
    def _check(self, U):
        U = np.ascontiguousarray(np.asarray(U, dtype=float))
        if U.ndim == 1:
            U = U.reshape(-1, 1)
        if U.shape != (len(self.domain), self.value_dim):
            raise ConfigurationError(
                f"configuration has shape {U.shape}, expected {(len(self.domain), self.value_dim)}"
            )
        if not np.all(np.isfinite(U)):
            raise ConfigurationError("configuration has non-finite values")
        return U

    def forces(self, U):
        """``Q_i(u)`` for all interior sites, shape ``(n_interior, d)``."""
        U = self._check(U)
        if self.indices.size == 0:
            return np.zeros((self.n_interior, self.value_dim))
        return kernels.pair_forces(U, self.indptr, self.indices, self.rows, self.p)

    def grad_at(self, U, i):
        U = self._check(U)
        k = self.site(i)
        if k >= self.n_interior:
            raise ConfigurationError("Q_i is only defined for interior indices")
        nb = self.indices[self.indptr[k]:self.indptr[k + 1]]
        diff = U[k] - U[nb]
        return (_pair_weight(diff, self.p)[:, None] * diff).sum(axis=0)

    def local_action(self, U, i):
        """``sum_{B in S_i} H_B(u)``: all pair terms containing ``i``."""
        U = self._check(U)
        k = self.site(i)
        nb = self.indices[self.indptr[k]:self.indptr[k + 1]]
        nrm = np.linalg.norm(U[k] - U[nb], axis=1)
        return float(np.sum(nrm ** self.p) / self.p)

    def site_hessians(self, U):
        """``d^2/du_i^2`` of the local action for each interior site."""
        U = self._check(U)
        d = self.value_dim
        n = self.n_interior
        if self.p == 2.0:
            deg = np.diff(self.indptr).astype(float)
            return deg[:, None, None] * np.eye(d)
        diff = U[self.rows] - U[self.indices]
        nrm = np.linalg.norm(diff, axis=1)
        p = self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(nrm > 0, nrm ** (p - 2.0), 0.0)
            w4 = np.where(nrm > 0, (p - 2.0) * nrm ** (p - 4.0), 0.0)
        blocks = w[:, None, None] * np.eye(d) + w4[:, None, None] * np.einsum("ij,ik->ijk", diff, diff)
        H = np.zeros((n, d, d))
        np.add.at(H, self.rows, blocks)
        return H

    def site_hessian_norms(self, U):
        return np.linalg.norm(self.site_hessians(U), ord=2, axis=(1, 2))

    # bound ----------------------------------------------------------------
    def hessian_bound(self, spec):
        """Upper bound on ``|Q_i(u)| + |H_i(u)|`` over configurations of type ``spec``."""
        R = spec.radius
        if self.family == "none":
            return 0.0
        if self.family == "nn_quadratic_1d":
            return 4.0 * R + 2.0
        if self.family == "laplacian_quadratic":
            r = self.rank
            return 4.0 * r * R + 2.0 * r
        if self.family == "address_neighborhood":
            n_max = self.max_degree
            c = type_spread(spec.sigma, self.tau)
            return n_max * (2.0 * R + c) + n_max + 1.0
        if self.family == "p_power_1d":
            return p_power_bound(self.p, float(spec.sigma[0, 0]), R)
        raise ConfigurationError(f"no bound for family {self.family!r}")

    def to_config(self):
        cfg = {"family": self.family}
        if self.family == "p_power_1d":
            cfg["p"] = self.p
        if self.tau is not None:
            cfg["tau"] = self.tau
        return cfg


def _pair_weight(diff, p):
    if p == 2.0:
        return np.ones(diff.shape[0])
    nrm = np.linalg.norm(diff, axis=1)
    with np.errstate(divide="ignore"):
        return np.where(nrm > 0, nrm ** (p - 2.0), 0.0)


def type_spread(sigma, tau):
    """``max |k M|`` over integer vectors ``k`` with ``0 < |k| <= tau``."""
    sigma = np.atleast_2d(sigma)
    r = sigma.shape[0]
    t = int(np.floor(tau))
    steps = np.array(list(itertools.product(range(-t, t + 1), repeat=r)), dtype=float)
    steps = steps[np.linalg.norm(steps, axis=1) <= tau + 1e-12]
    return float(np.max(np.linalg.norm(steps @ sigma, axis=1)))


def p_power_bound(p, m, R, starts=64, seed=0):
    """Maximize ``|Q_i| + |H_i|`` for the 1D p-power chain over the deviation box.

    The free variables are the deviations ``(d_{i-1}, d_i, d_{i+1})`` in
    ``[-R, R]^3``; neighbor differences are ``u_i - u_{i-1} = m + d_i - d_{i-1}``
    and ``u_i - u_{i+1} = -m + d_i - d_{i+1}``.
    """
    def g(x):
        return np.sign(x) * np.abs(x) ** (p - 1.0)

    def h(x):
        return (p - 1.0) * np.abs(x) ** (p - 2.0)

    def total(dev):
        a = m + dev[1] - dev[0]
        b = -m + dev[1] - dev[2]
        return abs(g(a) + g(b)) + h(a) + h(b)

    best = 0.0
    corners = np.array(list(itertools.product((-R, R), repeat=3)))
    for c in corners:
        best = max(best, total(c))
    if R == 0:
        return float(best)
    rng = np.random.default_rng(seed)
    for x0 in rng.uniform(-R, R, size=(starts, 3)):
        res = minimize(lambda v: -total(v), x0, method="L-BFGS-B", bounds=[(-R, R)] * 3)
        best = max(best, -float(res.fun))
    return float(best)


# --------------------------------------------------------------------------
# constructors

def _unit_offsets(rank):
    eye = np.eye(rank, dtype=np.int64)
    return np.vstack([-eye, eye])


def make_interaction(family, window, value_dim=1, p=None):
    """Box-window model for ``none``, ``nn_quadratic_1d``, ``laplacian_quadratic``
    or ``p_power_1d``.

    ``window`` is ``(lo, hi)`` with inclusive integer corners; its length sets
    the rank.
    """
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown interaction family {family!r}")
    if family == "address_neighborhood":
        raise ConfigurationError("use make_address_interaction for address models")
    lo, hi = window
    base = IndexDomain.box(lo, hi)
    r = base.rank
    if family in ("nn_quadratic_1d", "p_power_1d") and r != 1:
        raise ConfigurationError(f"{family} needs a rank-1 window")
    if family == "p_power_1d" and value_dim != 1:
        raise ConfigurationError("p_power_1d is scalar valued")
    if family == "p_power_1d":
        if p is None or not p >= 2:
            raise ConfigurationError("p_power_1d needs p >= 2")
    else:
        p = 2.0

    if family == "none":
        return InteractionModel(family, base, value_dim, np.zeros(base.n_interior + 1), [], p)

    offsets = _unit_offsets(r)
    interior = base.interior
    nb = (interior[:, None, :] + offsets[None, :, :]).reshape(-1, r)
    lo_a, hi_a = np.atleast_1d(lo), np.atleast_1d(hi)
    outside = np.any((nb < lo_a) | (nb > hi_a), axis=1)
    collar = np.unique(nb[outside], axis=0)
    domain = IndexDomain(r, interior, collar)
    lookup = {tuple(s): k for k, s in enumerate(domain.sites.tolist())}
    indices = np.array([lookup[tuple(s)] for s in nb.tolist()], dtype=np.int64)
    indptr = np.arange(0, indices.size + 1, offsets.shape[0], dtype=np.int64)
    return InteractionModel(family, domain, value_dim, indptr, indices, p)


def make_address_interaction(pset, window, tau, table=None):
    """Address-neighborhood model on the address image of ``pset``.

    Interior indices are the addresses of points inside the physical
    ``window``; neighbors are addresses ``j`` of set points with
    ``0 < |j - i| <= tau``. The window must sit far enough inside the set's
    extent that every neighbor is enumerated.
    """
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    table = address_map(pset) if table is None else table
    region = as_region(window, pset.dim)
    reach = tau * float(np.linalg.norm(table.projection, ord=2))
    lo, hi = region.bounds()
    elo, ehi = pset.extent.bounds()
    if np.any(lo - reach < elo - 1e-9) or np.any(hi + reach > ehi + 1e-9):
        raise ConfigurationError(
            f"window must lie at least {reach:.6g} inside the point set extent"
        )
    addr = table.addresses
    inside = region.contains(table.points)
    if not inside.any():
        raise ConfigurationError("window contains no points")
    inner = np.flatnonzero(inside)
    tree = cKDTree(addr.astype(float))
    lists = tree.query_ball_point(addr[inner].astype(float), tau + 1e-9)
    lists = [[j for j in sorted(lst) if j != i] for i, lst in zip(inner, lists)]
    used = sorted({j for lst in lists for j in lst} - set(inner.tolist()))
    order = np.concatenate([inner, np.asarray(used, dtype=np.int64)]).astype(np.int64)
    rowmap = {int(k): row for row, k in enumerate(order)}
    domain = IndexDomain(table.rank, addr[inner], addr[np.asarray(used, dtype=np.int64)].reshape(-1, table.rank),
                         positions=table.points[order])
    indptr = np.zeros(len(inner) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(lst) for lst in lists])
    indices = np.array([rowmap[j] for lst in lists for j in lst], dtype=np.int64)
    model = InteractionModel("address_neighborhood", domain, pset.dim, indptr, indices, 2.0, tau)
    model.address_table = table
    return model


def fibonacci_projection():
    """``psi = (1, phi)`` as an ``r x d`` type matrix."""
    return np.array([[1.0], [PHI]])
