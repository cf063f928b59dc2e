"""Pattern-equivariant potentials with exact gradients and Hessians.

Two kinds are provided: a sum of disjoint polynomial bumps centred on the
points of a Delone set, and the periodic ``sum_k (1 - cos x_k)``. Either can
be rescaled by a power of an expanding matrix ``A``, giving
``x -> V(A^n x)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, OverlapError


@dataclass(frozen=True)
class FieldSample:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class PatternPotential:
    """Base class: subclasses implement ``_raw(Y)`` for the unscaled field.

    ``scale_power`` and ``affinity`` define the pullback by ``A^n``; with
    ``n = 0`` the potential is evaluated as is.
    """

    kind = "abstract"

    def __init__(self, dim, equivariance_range, scale_power=0, affinity=None):
        if scale_power < 0:
            raise ConfigurationError("scale power must be nonnegative")
        self.dim = int(dim)
        self.base_range = float(equivariance_range)
        self.scale_power = int(scale_power)
        self.affinity = None if affinity is None else np.atleast_2d(np.asarray(affinity, dtype=float))
        if self.scale_power and self.affinity is None:
            raise ConfigurationError("scaling requires an affinity matrix")
        if self.affinity is not None:
            self._An = np.linalg.matrix_power(self.affinity, self.scale_power)
        else:
            self._An = None

    # subclasses -----------------------------------------------------------
    def _raw(self, Y):
        raise NotImplementedError

    def _replace(self, **changes):
        raise NotImplementedError

    # evaluation -----------------------------------------------------------
    @property
    def scale_matrix(self):
        """``A^n`` (identity when unscaled)."""
        return np.eye(self.dim) if self._An is None or self.scale_power == 0 else self._An

    @property
    def equivariance_range(self):
        if self.scale_power == 0:
            return self.base_range
        smallest = np.min(np.abs(np.linalg.eigvals(self.affinity)))
        return self.base_range / smallest**self.scale_power

    def eval_batch(self, X):
        """Values ``(m,)``, gradients ``(m, d)`` and Hessians ``(m, d, d)``."""
        X = np.ascontiguousarray(np.asarray(X, dtype=float).reshape(-1, self.dim))
        if self.scale_power == 0:
            return self._raw(X)
        An = self._An
        v, g, H = self._raw(np.ascontiguousarray(X @ An.T))
        return v, g @ An, np.einsum("ki,mkl,lj->mij", An, H, An)

    def eval(self, x):
        v, g, H = self.eval_batch(np.asarray(x, dtype=float).reshape(1, self.dim))
        return FieldSample(float(v[0]), g[0], H[0])

    def __call__(self, X):
        return self.eval_batch(X)[0]

    def gradient(self, X):
        return self.eval_batch(X)[1]

    def scale(self, n, affinity=None):
        """The pullback ``x -> V(A^n x)`` composed with any existing scaling."""
        if n < 0:
            raise ConfigurationError("scale power must be nonnegative")
        A = self.affinity if affinity is None else np.atleast_2d(np.asarray(affinity, dtype=float))
        if A is None:
            raise ConfigurationError("potential has no self-affinity matrix; pass one explicitly")
        if self.affinity is not None and affinity is not None and not np.allclose(A, self.affinity):
            raise ConfigurationError("cannot compose scalings by different matrices")
        return self._replace(scale_power=self.scale_power + int(n), affinity=A)

    def to_config(self):
        raise NotImplementedError

    def known_critical_points(self):
        """Critical points known in closed form (used as extra Newton seeds)."""
        return np.empty((0, self.dim))


class BumpPotential(PatternPotential):
    """``sign * h * sum_p beta(|x - p| / s)`` with ``beta(t) = (1 - t^2)^4``.

    Supports are disjoint, so each query touches at most one centre; the
    centre is found through a dense cell grid of side ``s``.
    """

    kind = "bump_sum"

    def __init__(self, base_set, amplitude, support_radius, sign=1, scale_power=0, affinity=None):
        if affinity is None:
            affinity = base_set.self_affinity
        super().__init__(base_set.dim, support_radius, scale_power, affinity)
        self.base_set = base_set
        self.amplitude = float(amplitude)
        self.support_radius = float(support_radius)
        self.sign = int(sign)
        self._build_hash()

    def _build_hash(self):
        pts = self.base_set.points
        d = self.dim
        if d > 3:
            raise ConfigurationError("bump potentials support dimensions up to 3")
        s = self.support_radius
        origin = pts.min(axis=0) - s
        shape = (np.floor((pts.max(axis=0) - origin) / s).astype(np.int64) + 2)
        if np.prod(shape.astype(float)) > 5e7:
            raise ConfigurationError("point set too large for the cell grid")
        cells = np.floor((pts - origin) / s).astype(np.int64)
        strides = np.ones(d, dtype=np.int64)
        for k in range(d - 2, -1, -1):
            strides[k] = strides[k + 1] * shape[k + 1]
        flat = cells @ strides
        if np.unique(flat).size != flat.size:
            raise OverlapError("two centres share a hash cell; support radius too large")
        cell_point = np.full(int(np.prod(shape)), -1, dtype=np.int64)
        cell_point[flat] = np.arange(pts.shape[0])
        self._hash = (
            np.ascontiguousarray(pts),
            cell_point,
            np.ascontiguousarray(shape),
            np.ascontiguousarray(origin),
            s,
            np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64),
        )

    def _raw(self, Y):
        centers, cell_point, shape, origin, s, offsets = self._hash
        return kernels.bump_field(Y, centers, cell_point, shape, origin, s, offsets,
                                  s, self.sign * self.amplitude)

    def known_critical_points(self):
        # each centre is an isolated extremum of its own bump
        C = self.base_set.points
        if self.scale_power == 0:
            return C.copy()
        return np.linalg.solve(self._An, C.T).T

    def _replace(self, **changes):
        kw = dict(base_set=self.base_set, amplitude=self.amplitude,
                  support_radius=self.support_radius, sign=self.sign,
                  scale_power=self.scale_power, affinity=self.affinity)
        kw.update(changes)
        return BumpPotential(**kw)

    def to_config(self):
        return {"kind": self.kind, "amplitude": self.amplitude,
                "support_radius": self.support_radius, "sign": self.sign,
                "scale_power": self.scale_power}


class PeriodicPotential(PatternPotential):
    """``sum_k (1 - cos x_k)``, equivariant for the grid ``2 pi Z^d``."""

    kind = "one_minus_cos"

    def __init__(self, dim, scale_power=0, affinity=None):
        super().__init__(dim, 2.0 * math.pi, scale_power, affinity)

    def _raw(self, Y):
        c = np.cos(Y)
        v = np.sum(1.0 - c, axis=1)
        g = np.sin(Y)
        H = np.zeros((Y.shape[0], self.dim, self.dim))
        idx = np.arange(self.dim)
        H[:, idx, idx] = c
        return v, g, H

    def _replace(self, **changes):
        kw = dict(dim=self.dim, scale_power=self.scale_power, affinity=self.affinity)
        kw.update(changes)
        return PeriodicPotential(**kw)

    def to_config(self):
        return {"kind": self.kind, "dim": self.dim, "scale_power": self.scale_power}


def make_bump_potential(pset, amplitude, support_radius, sign=1):
    """Bump sum over ``pset``; requires ``0 < support_radius <= packing radius``."""
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    if amplitude == 0 or not np.isfinite(amplitude):
        raise ConfigurationError("amplitude must be finite and nonzero")
    if not support_radius > 0:
        raise ConfigurationError("support radius must be positive")
    if support_radius > pset.packing_radius * (1 + 1e-12):
        raise OverlapError(
            f"support radius {support_radius} exceeds packing radius {pset.packing_radius}"
        )
    return BumpPotential(pset, amplitude, support_radius, sign)


def make_periodic_potential(name, d, affinity=None):
    if name != "one_minus_cos":
        raise ConfigurationError(f"unknown periodic potential {name!r}")
    if d < 1:
        raise ConfigurationError("dimension must be positive")
    return PeriodicPotential(d, affinity=affinity)


def scale(P, n, affinity=None):
    return P.scale(n, affinity)


def eval(P, x):  # noqa: A001 - mirrors the operation name
    return P.eval(x)
