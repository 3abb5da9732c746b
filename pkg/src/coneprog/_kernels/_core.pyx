# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver inner loop: dense matvecs, triangular solves, cone projection."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def admm_span(double[:, ::1] L, double[:, ::1] A, double[:, ::1] AT,
              double[::1] c, double[::1] b,
              Py_ssize_t zero_dim, Py_ssize_t nonneg_dim,
              cnp.int64_t[::1] soc_dims,
              double rho, double sigma, double alpha,
              double[::1] x, double[::1] z, double[::1] y,
              Py_ssize_t n_iters):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = z.shape[0]
    cdef Py_ssize_t n_soc = soc_dims.shape[0]
    cdef double[::1] rhs = np.empty(n)
    cdef double[::1] xt = np.empty(n)
    cdef double[::1] zt = np.empty(m) if m else np.empty(0)
    cdef double[::1] u = np.empty(m) if m else np.empty(0)
    cdef double[::1] w = np.empty(m) if m else np.empty(0)
    cdef Py_ssize_t it, i, j, k, d, off
    cdef double acc, t, nv, sc, oma = 1.0 - alpha

    with nogil:
        for it in range(n_iters):
            for i in range(m):
                u[i] = rho * z[i] - y[i]
            for j in range(n):
                acc = sigma * x[j] - c[j]
                for i in range(m):
                    acc += AT[j, i] * u[i]
                rhs[j] = acc
            # solve (L L^T) xt = rhs
            for j in range(n):
                acc = rhs[j]
                for k in range(j):
                    acc -= L[j, k] * xt[k]
                xt[j] = acc / L[j, j]
            for j in range(n - 1, -1, -1):
                acc = xt[j]
                for k in range(j + 1, n):
                    acc -= L[k, j] * xt[k]
                xt[j] = acc / L[j, j]
            for i in range(m):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * xt[j]
                zt[i] = acc
            for j in range(n):
                x[j] = alpha * xt[j] + oma * x[j]
            for i in range(m):
                u[i] = b[i] - (alpha * zt[i] + oma * z[i] + y[i] / rho)
            for i in range(zero_dim):
                w[i] = 0.0
            for i in range(zero_dim, zero_dim + nonneg_dim):
                w[i] = u[i] if u[i] > 0.0 else 0.0
            off = zero_dim + nonneg_dim
            for k in range(n_soc):
                d = soc_dims[k]
                t = u[off]
                nv = 0.0
                for i in range(off + 1, off + d):
                    nv += u[i] * u[i]
                nv = sqrt(nv)
                if nv <= t:
                    for i in range(off, off + d):
                        w[i] = u[i]
                elif nv <= -t:
                    for i in range(off, off + d):
                        w[i] = 0.0
                else:
                    sc = 0.5 * (t + nv)
                    w[off] = sc
                    for i in range(off + 1, off + d):
                        w[i] = (sc / nv) * u[i]
                off += d
            for i in range(m):
                z[i] = b[i] - w[i]
                y[i] = rho * (w[i] - u[i])
