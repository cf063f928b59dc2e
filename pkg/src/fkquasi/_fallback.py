"""Pure numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` module exactly; see
:mod:`fkquasi.kernels` for the selection logic.
"""
import numpy as np


def _strides(shape):
    d = shape.shape[0]
    strides = np.ones(d, dtype=np.int64)
    for k in range(d - 2, -1, -1):
        strides[k] = strides[k + 1] * shape[k + 1]
    return strides


def bump_field(X, centers, cell_point, shape, origin, cell, offsets, radius, coeff):
    """Value, gradient and Hessian of ``coeff * (1 - |x-p|^2/radius^2)^4``.

    ``cell_point`` is a dense grid (C order, dimensions ``shape``) mapping each
    cell of side ``cell`` to the index of the single center it contains, or -1.
    """
    m, d = X.shape
    values = np.zeros(m)
    grads = np.zeros((m, d))
    hess = np.zeros((m, d, d))
    if m == 0 or centers.shape[0] == 0:
        return values, grads, hess

    base = np.floor((X - origin) / cell)
    base = np.clip(base, -2, shape + 1).astype(np.int64)
    strides = _strides(shape)
    owner = np.full(m, -1, dtype=np.int64)
    r2max = radius * radius
    for off in offsets:
        c = base + off
        inside = np.all((c >= 0) & (c < shape), axis=1)
        flat = np.where(inside, c @ strides, 0)
        cand = np.where(inside, cell_point[flat], -1)
        hit = np.flatnonzero((cand >= 0) & (owner < 0))
        if hit.size == 0:
            continue
        diff = X[hit] - centers[cand[hit]]
        close = np.einsum("ij,ij->i", diff, diff) < r2max
        owner[hit[close]] = cand[hit[close]]

    act = np.flatnonzero(owner >= 0)
    if act.size == 0:
        return values, grads, hess
    diff = X[act] - centers[owner[act]]
    q = 1.0 - np.einsum("ij,ij->i", diff, diff) / r2max
    q2 = q * q
    values[act] = coeff * q2 * q2
    g = -8.0 * coeff / r2max * q2 * q
    grads[act] = g[:, None] * diff
    hess[act] = g[:, None, None] * np.eye(d) + (
        48.0 * coeff / (r2max * r2max) * q2
    )[:, None, None] * np.einsum("ij,ik->ijk", diff, diff)
    return values, grads, hess


def pair_forces(U, indptr, indices, rows, p):
    """Q_i = sum over neighbors j of |u_i - u_j|^(p-2) (u_i - u_j).

    Interior sites occupy the first ``len(indptr) - 1`` rows of ``U``.
    """
    n = indptr.shape[0] - 1
    d = U.shape[1]
    Q = np.zeros((n, d))
    if indices.shape[0] == 0:
        return Q
    diff = U[rows] - U[indices]
    if p != 2.0:
        nrm = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        w = np.zeros_like(nrm)
        nz = nrm > 0
        w[nz] = nrm[nz] ** (p - 2.0)
        diff = diff * w[:, None]
    for k in range(d):
        Q[:, k] = np.bincount(rows, weights=diff[:, k], minlength=n)
    return Q
