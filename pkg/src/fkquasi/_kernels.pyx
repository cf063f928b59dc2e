# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors fkquasi._fallback."""
import numpy as np

from libc.math cimport floor, pow

cdef enum:
    MAXDIM = 8


def bump_field(const double[:, ::1] X, const double[:, ::1] centers,
               const long long[::1] cell_point, const long long[::1] shape,
               const double[::1] origin, double cell,
               const long long[:, ::1] offsets, double radius, double coeff):
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], noff = offsets.shape[0]
    values_a = np.zeros(m)
    grads_a = np.zeros((m, d))
    hess_a = np.zeros((m, d, d))
    if m == 0 or centers.shape[0] == 0:
        return values_a, grads_a, hess_a
    if d > MAXDIM:
        raise ValueError("dimension too large for compiled kernel")
    cdef double[::1] values = values_a
    cdef double[:, ::1] grads = grads_a
    cdef double[:, :, ::1] hess = hess_a
    cdef long long base[MAXDIM]
    cdef double diff[MAXDIM]
    cdef Py_ssize_t i, k, l, o
    cdef long long c, flat, p
    cdef double r2, r2max = radius * radius, q, q2, g, h2, b
    cdef bint inside
    with nogil:
        for i in range(m):
            for k in range(d):
                b = floor((X[i, k] - origin[k]) / cell)
                if b < -2:
                    b = -2
                elif b > shape[k] + 1:
                    b = shape[k] + 1
                base[k] = <long long>b
            for o in range(noff):
                flat = 0
                inside = True
                for k in range(d):
                    c = base[k] + offsets[o, k]
                    if c < 0 or c >= shape[k]:
                        inside = False
                        break
                    flat = flat * shape[k] + c
                if not inside:
                    continue
                p = cell_point[flat]
                if p < 0:
                    continue
                r2 = 0.0
                for k in range(d):
                    diff[k] = X[i, k] - centers[p, k]
                    r2 = r2 + diff[k] * diff[k]
                if r2 >= r2max:
                    continue
                q = 1.0 - r2 / r2max
                q2 = q * q
                values[i] = coeff * q2 * q2
                g = -8.0 * coeff / r2max * q2 * q
                h2 = 48.0 * coeff / (r2max * r2max) * q2
                for k in range(d):
                    grads[i, k] = g * diff[k]
                    for l in range(d):
                        hess[i, k, l] = h2 * diff[k] * diff[l]
                    hess[i, k, k] = hess[i, k, k] + g
                break
    return values_a, grads_a, hess_a


def pair_forces(const double[:, ::1] U, const long long[::1] indptr,
                const long long[::1] indices, rows, double p):
    cdef Py_ssize_t n = indptr.shape[0] - 1, d = U.shape[1]
    Q_a = np.zeros((n, d))
    if n == 0:
        return Q_a
    if d > MAXDIM:
        raise ValueError("dimension too large for compiled kernel")
    cdef double[:, ::1] Q = Q_a
    cdef double diff[MAXDIM]
    cdef Py_ssize_t i, k
    cdef long long jj, j
    cdef double nrm, w
    cdef bint linear = p == 2.0
    # |x|^(p-2) = (|x|^2)^h; small integer h is done by repeated products
    cdef double h = 0.5 * (p - 2.0)
    cdef int ih = <int>h
    cdef bint integral = h == ih and ih <= 8
    cdef int m
    with nogil:
        for i in range(n):
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                nrm = 0.0
                for k in range(d):
                    diff[k] = U[i, k] - U[j, k]
                    nrm = nrm + diff[k] * diff[k]
                if linear:
                    w = 1.0
                elif integral:
                    w = 1.0
                    for m in range(ih):
                        w = w * nrm
                elif nrm > 0.0:
                    w = pow(nrm, h)
                else:
                    w = 0.0
                for k in range(d):
                    Q[i, k] = Q[i, k] + w * diff[k]
    return Q_a
