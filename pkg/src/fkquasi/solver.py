"""Coding configurations and the contraction solver.

Given anchors ``a_i`` taken from the critical atlas, the magnified map is

    u_i <- K_{a_i}(-Q_i(u) / lam)

and the scaled map (potential ``x -> V(A^n x)``) is

    u_i <- A^-n K_{A^n a_i}(w_i),   (A^n)^T w_i = -Q_i(u),

both applied simultaneously to every interior index with the collar pinned
at the anchors. Fixed points are equilibria:
``Q_i(u) + lam grad V(u_i) = 0`` resp. ``Q_i(u) + (A^n)^T grad V(A^n u_i) = 0``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (ConfigurationError, CoverageError, DomainBreachError,
                     InfeasibleTypeError, NonConvergenceError, NotExpandingError,
                     NumericalError, VerificationError)
from .landscape import damped_newton

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Mode:
    """``magnified`` with coupling ``lam`` or ``scaled`` with power ``n``."""

    kind: str
    lam: float | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kind == "magnified":
            if self.lam is None or not (self.lam > 0 and math.isfinite(self.lam)):
                raise ConfigurationError("magnified mode needs a positive finite lambda")
        elif self.kind == "scaled":
            if self.n is None or int(self.n) != self.n or self.n < 0:
                raise ConfigurationError("scaled mode needs a nonnegative integer n")
        else:
            raise ConfigurationError(f"unknown mode {self.kind!r}")

    @classmethod
    def magnified(cls, lam):
        return cls("magnified", lam=float(lam))

    @classmethod
    def scaled(cls, n):
        return cls("scaled", n=int(n))

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam} if self.kind == "magnified" else {
            "kind": self.kind, "n": self.n}


# --------------------------------------------------------------------------
# coding

@dataclass(frozen=True, eq=False)
class CodingConfiguration:
    """Anchors ``a_i`` for every site (interior rows first, then collar)."""

    domain: object
    anchors: np.ndarray
    anchor_index: np.ndarray
    spec: object
    eta: float
    deviation: float
    atlas: object
    anchor_power: int = 0
    affinity: np.ndarray | None = None

    @property
    def interior_anchors(self):
        return self.anchors[: self.domain.n_interior]

    @property
    def targets(self):
        return self.spec.targets(self.domain.sites)


def _nearest_lex(points, X):
    """Nearest row of ``points`` (sorted lexicographically) to each row of ``X``;
    ties go to the lexicographically smallest point."""
    k = min(4, points.shape[0])
    tree = cKDTree(points)
    dist, idx = tree.query(X, k=k)
    dist = dist.reshape(X.shape[0], k)
    idx = idx.reshape(X.shape[0], k)
    dmin = dist[:, :1]
    tied = dist <= dmin * (1 + 1e-12) + 1e-15
    return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)


def build_coding(atlas, spec, model, mode=None, anchor_power=None):
    """Anchor every site at the atlas point nearest to ``i M``.

    In scaled mode the anchors come from ``A^-k Z`` with ``k = anchor_power``
    (default: the mode's ``n``); ``anchor_power = 0`` keeps the unscaled
    critical points, which are also critical for every scaled potential when
    ``A Z`` is contained in ``Z``.
    """
    domain = model.domain
    if spec.rank != domain.rank:
        raise ConfigurationError(f"type matrix has {spec.rank} rows, index rank is {domain.rank}")
    if spec.value_dim != atlas.dim:
        raise ConfigurationError(f"type matrix has {spec.value_dim} columns, potential dimension is {atlas.dim}")
    if model.value_dim != atlas.dim:
        raise ConfigurationError("interaction and potential dimensions differ")
    k = 0
    A = None
    if mode is not None and mode.kind == "scaled":
        k = mode.n if anchor_power is None else int(anchor_power)
        A = atlas.potential.affinity
        if A is None:
            raise ConfigurationError("scaled mode needs a self-affinity matrix")
        if k < 0 or k > mode.n:
            raise ConfigurationError("anchor power must lie in [0, n]")
    points = atlas.points
    region = atlas.region
    rz = atlas.covering_radius_Z
    if k:
        Ainv = np.linalg.inv(np.linalg.matrix_power(A, k))
        points = points @ Ainv.T
        region = region.transform(Ainv)
        rz = rz / float(np.min(np.abs(np.linalg.eigvals(A)))) ** k
        order = np.lexsort(points.T[::-1])
        points = points[order]
    else:
        order = np.arange(points.shape[0])

    T = spec.targets(domain.sites)
    inside = region.shrink(rz).contains(T, tol=1e-9 * max(1.0, float(np.abs(T).max())))
    if not np.all(inside):
        bad = T[~inside][0]
        raise CoverageError(f"atlas region does not cover target {bad} with margin r_Z = {rz:.6g}")
    if spec.radius < 2.0 * rz * (1 - 1e-9):
        raise InfeasibleTypeError(f"type radius {spec.radius:.6g} is below 2 r_Z = {2 * rz:.6g}")

    idx = _nearest_lex(points, T)
    anchors = np.ascontiguousarray(points[idx])
    deviation = float(np.max(np.linalg.norm(anchors - T, axis=1)))
    if deviation > spec.radius * (1 + 1e-9) + 1e-12:
        raise InfeasibleTypeError(f"coding deviation {deviation:.6g} exceeds type radius {spec.radius:.6g}")
    Q = model.forces(anchors)
    eta = float(np.max(np.linalg.norm(Q, axis=1))) if Q.size else 0.0
    return CodingConfiguration(domain, anchors, order[idx], spec, eta, deviation, atlas, k, A)


# --------------------------------------------------------------------------
# thresholds

def smallest_expansion(A):
    return float(np.min(np.abs(np.linalg.eigvals(np.atleast_2d(A)))))


def thresholds(B, R_V, A=None):
    """``(lambda_star, N)``: ``B / R_V`` and ``ceil(log(B/R_V) / log lambda_d)``."""
    if not (B >= 0 and R_V > 0):
        raise ConfigurationError("need B >= 0 and R_V > 0")
    lam_star = B / R_V
    if A is None:
        return lam_star, None
    lam_d = smallest_expansion(A)
    if lam_d <= 1.0:
        raise NotExpandingError(f"smallest eigenvalue magnitude {lam_d:.6g} is not > 1")
    if lam_star <= 0:
        return lam_star, 0
    x = math.log(lam_star) / math.log(lam_d)
    return lam_star, max(0, math.ceil(x - 1e-12))


# --------------------------------------------------------------------------
# the contraction map

class ContractionMap:
    """One Jacobi sweep of the magnified or scaled map."""

    def __init__(self, model, P, coding, mode, threads=1, newton_tol=1e-15):
        atlas = coding.atlas
        if atlas.domain_radius is None:
            raise ConfigurationError("atlas constants must be estimated before solving")
        self.model = model
        self.coding = coding
        self.mode = mode
        self.threads = max(1, int(threads))
        self.newton_tol = newton_tol
        self.R_V = atlas.domain_radius
        n_int = model.n_interior
        a = coding.interior_anchors
        if mode.kind == "magnified":
            self.base = P
            self.An = None
            self.centers = a
        else:
            A = P.affinity if P.affinity is not None else coding.affinity
            if A is None:
                raise ConfigurationError("scaled mode needs a self-affinity matrix")
            if P.scale_power not in (0, mode.n):
                raise ConfigurationError("potential is scaled by a different power")
            self.base = P._replace(scale_power=0, affinity=A)
            self.An = np.linalg.matrix_power(A, mode.n)
            self.AnT = self.An.T
            self.Aninv = np.linalg.inv(self.An)
            self.centers = np.ascontiguousarray(a @ self.An.T)
        # every centre has to be a critical point of the base potential
        Z, ok, _ = damped_newton(self.base, self.centers, np.zeros(self.base.dim), tol=0.0)
        scale = np.maximum(1.0, np.linalg.norm(self.centers, axis=1))
        det = np.abs(np.linalg.det(self.base.eval_batch(self.centers)[2]))
        if (not ok.all() or np.any(np.linalg.norm(Z - self.centers, axis=1) > 1e-8 * scale)
                or np.any(det <= atlas.det_threshold)):
            raise ConfigurationError(
                "anchors are not non-degenerate critical points of the potential "
                "(is the point set large enough for the scaled anchors?)")
        self.n_interior = n_int

    def targets(self, Q):
        """Right-hand sides ``y`` with ``grad V(x) = y`` for the local inverses."""
        if self.mode.kind == "magnified":
            return -Q / self.mode.lam
        return np.linalg.solve(self.AnT, -Q.T).T

    def _invert(self, Y):
        def work(sl):
            return damped_newton(self.base, self.centers[sl], Y[sl], tol=self.newton_tol)[:2]

        n = Y.shape[0]
        if self.threads == 1 or n < 256:
            X, ok = work(slice(0, n))
        else:
            bounds = np.linspace(0, n, self.threads + 1).astype(int)
            slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(work, slices))
            X = np.vstack([p[0] for p in parts])
            ok = np.concatenate([p[1] for p in parts])
        return X, ok

    def apply(self, U):
        """Return the next iterate (collar rows are copied unchanged)."""
        Q = self.model.forces(U)
        Y = self.targets(Q)
        norms = np.linalg.norm(Y, axis=1)
        worst = int(np.argmax(norms)) if norms.size else 0
        if norms.size and norms[worst] > self.R_V:
            raise DomainBreachError(
                f"local inverse argument {norms[worst]:.6g} exceeds R_V = {self.R_V:.6g} at "
                f"index {tuple(self.model.domain.interior[worst])}; increase lambda or n"
            )
        X, ok = self._invert(Y)
        if not ok.all():
            raise NumericalError("local inverse failed inside the admissible domain")
        reach = self.base.equivariance_range
        if np.any(np.linalg.norm(X - self.centers, axis=1) > reach):
            raise NumericalError("local inverse left the equivariance ball of its anchor")
        out = U.copy()
        out[: self.n_interior] = X if self.An is None else X @ self.Aninv.T
        return out


# --------------------------------------------------------------------------
# report

@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    mode: Mode
    configuration: np.ndarray
    coding: CodingConfiguration
    residuals: np.ndarray
    residual_sup: float
    scaled_residuals: np.ndarray | None
    scaled_residual_sup: float | None
    anchor_distance: float
    type_deviation: float
    iterations: int
    delta_trace: list
    rho_empirical: float
    tol: float
    constants: dict = field(default_factory=dict)
    verification: object = None

    @property
    def interior(self):
        return self.configuration[: self.coding.domain.n_interior]


def residuals(model, P, U, mode):
    """Per-site equilibrium residuals.

    Returns ``(r, r_scaled)``: ``Q_i + lam grad V(u_i)`` (magnified) or
    ``Q_i + (A^n)^T grad V(A^n u_i)`` (scaled), and in scaled mode also the
    same equation multiplied by ``(A^n)^-T``.
    """
    U = np.asarray(U, dtype=float).reshape(len(model.domain), -1)
    n = model.n_interior
    Q = model.forces(U)
    if mode.kind == "magnified":
        G = P.eval_batch(U[:n])[1]
        return Q + mode.lam * G, None
    A = P.affinity
    base = P._replace(scale_power=0, affinity=A)
    An = np.linalg.matrix_power(A, mode.n)
    G = base.eval_batch(U[:n] @ An.T)[1]
    r = Q + G @ An
    r_scaled = np.linalg.solve(An.T, Q.T).T + G
    return r, r_scaled


def empirical_rate(trace, scale, burn_in=3):
    """Largest ratio of successive deltas after ``burn_in`` sweeps.

    Deltas at the rounding floor ``1e3 eps scale`` carry no rate
    information and are skipped.
    """
    d = np.asarray(trace, dtype=float)
    floor = 1e3 * _EPS * max(1.0, scale)
    ratios = [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > floor and d[k + 1] > floor]
    late = [d[k + 1] / d[k] for k in range(burn_in, len(d) - 1) if d[k] > floor and d[k + 1] > floor]
    pick = late if late else ratios
    return float(max(pick)) if pick else 0.0


def _as_mode(mode):
    if isinstance(mode, Mode):
        return mode
    if isinstance(mode, dict):
        return Mode.magnified(mode["lambda"]) if mode["kind"] == "magnified" else Mode.scaled(mode["n"])
    raise ConfigurationError(f"cannot interpret mode {mode!r}")


def solve(model, P, coding, mode, tol=1e-12, max_iter=10_000, start=None, threads=1):
    """Iterate the contraction map from ``start`` (default: the anchors)."""
    mode = _as_mode(mode)
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    if mode.kind == "scaled" and P.affinity is None:
        raise ConfigurationError("scaled mode needs a potential with a self-affinity matrix")
    phi = ContractionMap(model, P, coding, mode, threads=threads)
    n = model.n_interior
    U = coding.anchors.copy()
    if start is not None:
        start = np.asarray(start, dtype=float).reshape(U.shape)
        U[:n] = start[:n]
    trace = []
    converged = False
    it = 0
    while it < max_iter:
        Unew = phi.apply(U)
        it += 1
        delta = float(np.max(np.linalg.norm(Unew[:n] - U[:n], axis=1))) if n else 0.0
        trace.append(delta)
        U = Unew
        if delta < tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(f"no convergence after {max_iter} sweeps (last delta {trace[-1]:.3g})")

    return _report(model, P, coding, mode, U, it, trace, tol)


def _report(model, P, coding, mode, U, iterations, trace, tol):
    n = model.n_interior
    r, rs = residuals(model, P, U, mode)
    res = np.linalg.norm(r, axis=1)
    res_s = None if rs is None else np.linalg.norm(rs, axis=1)
    a = coding.anchors[:n]
    T = coding.spec.targets(coding.domain.interior)
    B = model.hessian_bound(coding.spec)
    atlas = coding.atlas
    lam_star, N = thresholds(B, atlas.domain_radius, P.affinity if mode.kind == "scaled" else None)
    constants = {
        "B": B, "R_V": atlas.domain_radius, "K_V": atlas.inverse_bound,
        "epsilon_prime": atlas.epsilon_prime, "lambda_star": lam_star, "N": N,
        "r_Z": atlas.covering_radius_Z, "eta": coding.eta, "coding_deviation": coding.deviation,
    }
    if mode.kind == "scaled":
        constants["lambda_d"] = smallest_expansion(P.affinity)
    return EquilibriumReport(
        mode=mode,
        configuration=U,
        coding=coding,
        residuals=res,
        residual_sup=float(res.max()) if n else 0.0,
        scaled_residuals=res_s,
        scaled_residual_sup=None if res_s is None else (float(res_s.max()) if n else 0.0),
        anchor_distance=float(np.max(np.linalg.norm(U[:n] - a, axis=1))) if n else 0.0,
        type_deviation=float(np.max(np.linalg.norm(U[:n] - T, axis=1))) if n else 0.0,
        iterations=iterations,
        delta_trace=list(trace),
        rho_empirical=empirical_rate(trace, float(np.abs(U).max()) if U.size else 1.0),
        tol=tol,
        constants=constants,
    )


# --------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationSummary:
    clauses: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.clauses)

    @property
    def failed(self):
        return [c.name for c in self.clauses if not c.passed]

    def to_dict(self):
        return {c.name: {"passed": c.passed, "value": c.value, "limit": c.limit, "detail": c.detail}
                for c in self.clauses}


def contraction_limit(report):
    c = report.constants
    if report.mode.kind == "magnified":
        return 1.1 * c["K_V"] * c["B"] / report.mode.lam
    return 1.1 * c["K_V"] * c["B"] * c["lambda_d"] ** (-2 * report.mode.n)


def verify(report, model, P, probes=5, seed=0, residual_tol=1e-8, strict=True, threads=1):
    """Re-check a solve: residual, type bound, uniqueness and contraction rate.

    Raises :class:`VerificationError` naming the failed clauses when
    ``strict``; otherwise returns the summary either way.
    """
    mode = report.mode
    coding = report.coding
    n = model.n_interior
    clauses = []

    r, rs = residuals(model, P, report.configuration, mode)
    check = r if rs is None else rs
    sup = float(np.max(np.linalg.norm(check, axis=1))) if n else 0.0
    reported = report.residual_sup if rs is None else report.scaled_residual_sup
    consistent = abs(sup - reported) <= 1e-12 + 1e-9 * abs(reported)
    clauses.append(Clause("residual", bool(sup <= residual_tol and consistent), sup, residual_tol,
                          "" if consistent else f"reported {reported:.17g}"))

    eps = coding.atlas.epsilon_prime or 0.0
    if mode.kind == "scaled":
        eps = eps / report.constants["lambda_d"] ** mode.n
    limit = coding.spec.radius + eps
    clauses.append(Clause("type_bound", bool(report.type_deviation <= limit), report.type_deviation, limit))

    amp = min(eps, 0.2) / 2.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        xi = rng.uniform(-amp, amp, size=(n, coding.anchors.shape[1]))
        start = coding.anchors.copy()
        start[:n] += xi
        try:
            other = solve(model, P, coding, mode, tol=report.tol, start=start, threads=threads)
        except (DomainBreachError, NonConvergenceError, NumericalError) as exc:
            worst = math.inf
            clauses.append(Clause("uniqueness", False, worst, 10 * report.tol, str(exc)))
            break
        worst = max(worst, float(np.max(np.abs(other.configuration - report.configuration))))
    else:
        clauses.append(Clause("uniqueness", bool(worst <= 10 * report.tol), worst, 10 * report.tol))

    rho_lim = contraction_limit(report)
    clauses.append(Clause("contraction", bool(report.rho_empirical <= rho_lim), report.rho_empirical, rho_lim))

    summary = VerificationSummary(tuple(clauses))
    if strict and not summary.passed:
        raise VerificationError("verification failed: " + ", ".join(summary.failed), summary)
    return summary
