# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pure.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()

cdef double SQRT5 = sqrt(5.0)
cdef double FIVE_THIRDS = 5.0 / 3.0
cdef double RESCALE = 1e200


cdef inline double _matern_pair(const double[:, :] x1, Py_ssize_t a,
                                const double[:, :] x2, Py_ssize_t b,
                                const double[:, :] C, Py_ssize_t m,
                                Py_ssize_t d) nogil:
    cdef double poly = 1.0
    cdef double acc = 0.0
    cdef double diff, r
    cdef Py_ssize_t l, i
    for i in range(d):
        diff = fabs(x1[a, i] - x2[b, i])
        if diff == 0.0:
            continue
        for l in range(m):
            r = C[l, i] * diff
            poly *= 1.0 + SQRT5 * r + FIVE_THIRDS * r * r
            acc += r
        if poly > RESCALE:
            # fold the polynomial into the exponent before it overflows
            poly *= exp(-SQRT5 * acc)
            acc = 0.0
    return poly * exp(-SQRT5 * acc)


def cross_cov(X1, X2, C):
    cdef bint same = X1 is X2
    cdef const double[:, :] x1 = np.ascontiguousarray(X1, dtype=np.float64)
    cdef const double[:, :] x2 = x1 if same else np.ascontiguousarray(X2, dtype=np.float64)
    cdef const double[:, :] c = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n1 = x1.shape[0], n2 = x2.shape[0], d = x1.shape[1], m = c.shape[0]
    out_arr = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t a, b
    with nogil:
        if same:
            # symmetric: fill the upper triangle and mirror it
            for a in range(n1):
                out[a, a] = 1.0
                for b in range(a + 1, n2):
                    out[a, b] = _matern_pair(x1, a, x1, b, c, m, d)
                    out[b, a] = out[a, b]
        else:
            for a in range(n1):
                for b in range(n2):
                    out[a, b] = _matern_pair(x1, a, x2, b, c, m, d)
    return out_arr


def lml_grad_terms(X, C, M, bint by_row):
    cdef const double[:, :] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :] c = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[:, :] w = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], m = c.shape[0]
    out_arr = np.zeros(m if by_row else d, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t a, b, l, i
    cdef double diff, r, t, weight
    with nogil:
        for a in range(n):
            for b in range(a + 1, n):
                weight = w[a, b] + w[b, a]
                if weight == 0.0:
                    continue
                for i in range(d):
                    diff = fabs(x[a, i] - x[b, i])
                    if diff == 0.0:
                        continue
                    for l in range(m):
                        r = c[l, i] * diff
                        t = -FIVE_THIRDS * r * r * (1.0 + SQRT5 * r) / (
                            1.0 + SQRT5 * r + FIVE_THIRDS * r * r)
                        if by_row:
                            out[l] += weight * t
                        else:
                            out[i] += weight * t
    return out_arr


def nondominated_ranks(F):
    cdef const double[:, :] f = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], k = f.shape[1]
    ranks_arr = np.full(n, -1, dtype=np.intp)
    if n == 0:
        return ranks_arr
    cdef Py_ssize_t[:] ranks = ranks_arr
    count_arr = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[:] count = count_arr
    dom_arr = np.zeros((n, n), dtype=np.uint8)
    cdef unsigned char[:, :] dom = dom_arr
    cdef Py_ssize_t p, q, j, rank, remaining
    cdef bint p_le, q_le, p_lt, q_lt
    with nogil:
        for p in range(n):
            for q in range(p + 1, n):
                p_le = True
                q_le = True
                p_lt = False
                q_lt = False
                for j in range(k):
                    if f[p, j] < f[q, j]:
                        p_lt = True
                        q_le = False
                    elif f[p, j] > f[q, j]:
                        q_lt = True
                        p_le = False
                if p_le and p_lt:
                    dom[p, q] = 1
                    count[q] += 1
                elif q_le and q_lt:
                    dom[q, p] = 1
                    count[p] += 1
        rank = 0
        remaining = n
        while remaining > 0:
            for p in range(n):
                if ranks[p] < 0 and count[p] == 0:
                    ranks[p] = rank
                    remaining -= 1
            for p in range(n):
                if ranks[p] == rank:
                    for q in range(n):
                        if dom[p, q]:
                            count[q] -= 1
            rank += 1
    return ranks_arr
