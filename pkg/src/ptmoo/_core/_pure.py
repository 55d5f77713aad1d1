"""NumPy reference implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics. Scale matrices ``C`` have shape ``(m, d)``: entry
``C[l, i]`` multiplies ``|x_i - x'_i|`` inside factor ``(l, i)`` of the
Matern 5/2 product. Plain anisotropic GPR uses ``m = 1``; KPLS uses
``C[l, i] = theta_l * |w*_il|``.
"""
import numpy as np

SQRT5 = np.sqrt(5.0)
_CHUNK = 4096


def _scaled_distances(X1, X2, C):
    diff = np.abs(X1[:, None, :] - X2[None, :, :])
    return diff[:, :, None, :] * C[None, None, :, :]


def cross_cov(X1, X2, C):
    """Unit-variance Matern 5/2 product kernel between rows of X1 and X2."""
    X1 = np.ascontiguousarray(X1, dtype=float)
    X2 = np.ascontiguousarray(X2, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    out = np.empty((X1.shape[0], X2.shape[0]))
    rows = max(1, _CHUNK // max(1, X2.shape[0]))
    for start in range(0, X1.shape[0], rows):
        r = _scaled_distances(X1[start:start + rows], X2, C)
        poly = np.prod(1.0 + SQRT5 * r + (5.0 / 3.0) * r * r, axis=(2, 3))
        out[start:start + rows] = poly * np.exp(-SQRT5 * r.sum(axis=(2, 3)))
    return out


def lml_grad_terms(X, C, M, by_row):
    """Contract ``M`` against d(log k)/d(log C) over all training pairs.

    Returns one entry per row of ``C`` when ``by_row`` is true, otherwise one
    entry per column. ``M`` is typically ``(alpha alpha^T - K^-1) * K``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    r = _scaled_distances(X, X, C)
    t = -(5.0 / 3.0) * r * r * (1.0 + SQRT5 * r) / (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r)
    if by_row:
        return np.einsum("ab,ablj->l", M, t)
    return np.einsum("ab,ablj->j", M, t)


def nondominated_ranks(F):
    """Front index (0 = non-dominated) of each row of F under minimization."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dominates = le & lt
    count = dominates.sum(axis=0)
    ranks = np.full(n, -1, dtype=np.intp)
    current = np.flatnonzero(count == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        count = count - dominates[current].sum(axis=0)
        count[ranks >= 0] = -1
        current = np.flatnonzero(count == 0)
        rank += 1
    return ranks
