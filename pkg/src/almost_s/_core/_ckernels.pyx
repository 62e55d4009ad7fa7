# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled curvature kernel; same contract as the numpy fallback."""
cimport cython
import numpy as np


@cython.wraparound(True)
def curvature_arrays(g, ginv, dg, d2g):
    g = np.asarray(g, dtype=np.float64)
    m = g.shape[-1]
    lead = g.shape[:-2]
    out = _curvature(
        np.ascontiguousarray(g).reshape(-1, m, m),
        np.ascontiguousarray(ginv, dtype=np.float64).reshape(-1, m, m),
        np.ascontiguousarray(dg, dtype=np.float64).reshape(-1, m, m, m),
        np.ascontiguousarray(d2g, dtype=np.float64).reshape(-1, m, m, m, m),
    )
    gamma, riemann, ricci, scalar = out
    return (
        gamma.reshape(lead + (m, m, m)),
        riemann.reshape(lead + (m, m, m, m)),
        ricci.reshape(lead + (m, m)),
        scalar.reshape(lead),
    )


cdef tuple _curvature(const double[:, :, ::1] G, const double[:, :, ::1] Gi,
                      const double[:, :, :, ::1] D1, const double[:, :, :, :, ::1] D2):
    cdef Py_ssize_t N = G.shape[0]
    cdef Py_ssize_t m = G.shape[1]

    gamma_a = np.zeros((N, m, m, m))
    riemann_a = np.zeros((N, m, m, m, m))
    ricci_a = np.zeros((N, m, m))
    scalar_a = np.zeros(N)
    cdef double[:, :, :, ::1] Gam = gamma_a
    cdef double[:, :, :, :, ::1] R = riemann_a
    cdef double[:, :, ::1] Ric = ricci_a
    cdef double[::1] S = scalar_a

    cdef double[:, :, ::1] low = np.empty((m, m, m))
    cdef double[:, :, :, ::1] dlow = np.empty((m, m, m, m))
    cdef double[:, :, ::1] tmp = np.empty((m, m, m))
    cdef double[:, :, ::1] dgi = np.empty((m, m, m))
    cdef double[:, :, :, ::1] dGam = np.empty((m, m, m, m))

    cdef Py_ssize_t n, i, j, k, l, a, b, q
    cdef double acc
    for n in range(N):
        for l in range(m):
            for i in range(m):
                for j in range(m):
                    low[l, i, j] = 0.5 * (D1[n, j, l, i] + D1[n, i, l, j] - D1[n, i, j, l])
                    for q in range(m):
                        dlow[l, i, j, q] = 0.5 * (D2[n, j, l, i, q] + D2[n, i, l, j, q] - D2[n, i, j, l, q])
        for k in range(m):
            for i in range(m):
                for j in range(m):
                    acc = 0.0
                    for l in range(m):
                        acc += Gi[n, k, l] * low[l, i, j]
                    Gam[n, k, i, j] = acc
        # tmp[a, l, q] = sum_b dg[a, b, q] ginv[b, l]
        for a in range(m):
            for l in range(m):
                for q in range(m):
                    acc = 0.0
                    for b in range(m):
                        acc += D1[n, a, b, q] * Gi[n, b, l]
                    tmp[a, l, q] = acc
        for k in range(m):
            for l in range(m):
                for q in range(m):
                    acc = 0.0
                    for a in range(m):
                        acc += Gi[n, k, a] * tmp[a, l, q]
                    dgi[k, l, q] = -acc
        for k in range(m):
            for i in range(m):
                for j in range(m):
                    for q in range(m):
                        acc = 0.0
                        for l in range(m):
                            acc += dgi[k, l, q] * low[l, i, j] + Gi[n, k, l] * dlow[l, i, j, q]
                        dGam[k, i, j, q] = acc
        for l in range(m):
            for k in range(m):
                for i in range(m):
                    for j in range(m):
                        acc = dGam[l, j, k, i] - dGam[l, i, k, j]
                        for a in range(m):
                            acc += Gam[n, l, i, a] * Gam[n, a, j, k] - Gam[n, l, j, a] * Gam[n, a, i, k]
                        R[n, l, k, i, j] = acc
        for j in range(m):
            for k in range(m):
                acc = 0.0
                for i in range(m):
                    acc += R[n, i, k, i, j]
                Ric[n, j, k] = acc
        acc = 0.0
        for j in range(m):
            for k in range(m):
                acc += Gi[n, j, k] * Ric[n, j, k]
        S[n] = acc

    return gamma_a, riemann_a, ricci_a, scalar_a
