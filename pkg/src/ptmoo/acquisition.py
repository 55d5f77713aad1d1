"""Acquisition functions for constrained (multi-objective) minimisation.

All functions broadcast over arrays of candidates. Standard deviations are
floored at ``STD_FLOOR`` inside every CDF argument.
"""
import numpy as np
from scipy.special import ndtr

from .errors import UnsupportedDimensionError

STD_FLOOR = 1e-9
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def expected_improvement(mean, std, best):
    """Closed-form expected improvement below the incumbent ``best``."""
    mean = np.asarray(mean, dtype=float)
    std = np.maximum(np.asarray(std, dtype=float), 0.0)
    gap = best - mean
    z = gap / np.maximum(std, STD_FLOOR)
    return np.maximum(gap * ndtr(z) + std * _pdf(z), 0.0)


def probability_of_feasibility(constraint_stats):
    """Product of per-constraint normal CDFs.

    ``constraint_stats`` is an iterable of ``(mean, std, limit)`` triples whose
    entries may be scalars or equal-length arrays. An empty iterable gives 1.
    """
    pf = 1.0
    for mean, std, limit in constraint_stats:
        pf = pf * ndtr((limit - np.asarray(mean, dtype=float))
                       / np.maximum(np.asarray(std, dtype=float), STD_FLOOR))
    return pf


def constrained_ei(mean, std, best, constraint_stats):
    return expected_improvement(mean, std, best) * probability_of_feasibility(constraint_stats)


def _front_within(front, ref):
    front = np.asarray(front, dtype=float).reshape(-1, ref.size)
    if ref.size != 2:
        raise UnsupportedDimensionError(f"exact hypervolume is implemented for 2 objectives, got {ref.size}")
    return front[np.all(front <= ref, axis=1)]


def nondominated_staircase(front, ref):
    """Points of ``front`` inside the reference box that form the 2-D staircase.

    Returned sorted by the first objective ascending (second descending).
    """
    ref = np.asarray(ref, dtype=float)
    pts = _front_within(front, ref)
    if pts.shape[0] == 0:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    keep = []
    best2 = np.inf
    for p in pts:
        if p[1] < best2:
            keep.append(p)
            best2 = p[1]
    return np.array(keep)


def hypervolume(front, ref):
    """Area dominated by a 2-D front and bounded above by ``ref``.

    Points outside the reference box contribute nothing.
    """
    ref = np.asarray(ref, dtype=float)
    stairs = nondominated_staircase(front, ref)
    if stairs.shape[0] == 0:
        return 0.0
    next_f1 = np.append(stairs[1:, 0], ref[0])
    return float(np.sum((next_f1 - stairs[:, 0]) * (ref[1] - stairs[:, 1])))


def hypervolume_improvement(point, front, ref):
    point = np.asarray(point, dtype=float)[None, :]
    front = np.asarray(front, dtype=float).reshape(-1, point.shape[1])
    return hypervolume(np.vstack([front, point]), ref) - hypervolume(front, ref)


def _psi(b, mean, std):
    # integral of Phi((z - mean)/std) dz from -inf to b
    u = (b - mean) / std
    return (b - mean) * ndtr(u) + std * _pdf(u)


def ehvi(mean, std, front, ref):
    """Exact 2-D expected hypervolume improvement under independent Gaussians.

    The region not dominated by ``front`` inside the reference box is split
    into vertical strips, one per staircase step; on each strip the
    expectation factorises into two one-dimensional Gaussian integrals.

    Parameters
    ----------
    mean, std : array_like, shape (2,) or (n, 2)
    front : array_like, shape (k, 2)
    ref : array_like, shape (2,)
    """
    ref = np.asarray(ref, dtype=float)
    if ref.size != 2:
        raise UnsupportedDimensionError(f"EHVI is implemented for 2 objectives, got {ref.size}")
    mean = np.asarray(mean, dtype=float)
    single = mean.ndim == 1
    mean = np.atleast_2d(mean)
    std = np.maximum(np.atleast_2d(np.asarray(std, dtype=float)), STD_FLOOR)
    if mean.shape[1] != 2:
        raise UnsupportedDimensionError(f"EHVI is implemented for 2 objectives, got {mean.shape[1]}")
    stairs = nondominated_staircase(front, ref)
    # strip edges a_0 = -inf < a_1 < ... < a_k < a_{k+1} = r1, heights b_0 = r2, b_j = f2 of step j
    a = np.concatenate((stairs[:, 0], [ref[0]]))
    b = np.concatenate(([ref[1]], stairs[:, 1]))
    psi1 = _psi(a[None, :], mean[:, :1], std[:, :1])
    width = np.diff(np.concatenate((np.zeros((mean.shape[0], 1)), psi1), axis=1), axis=1)
    height = _psi(b[None, :], mean[:, 1:], std[:, 1:])
    out = np.maximum(np.sum(width * height, axis=1), 0.0)
    return float(out[0]) if single else out


def cehvi(mean, std, constraint_stats, front, ref):
    return probability_of_feasibility(constraint_stats) * ehvi(mean, std, front, ref)


def normalize_objectives(F, fmin, fmax):
    """Min-max scale objectives; a degenerate range maps to zero."""
    F = np.asarray(F, dtype=float)
    span = np.asarray(fmax, dtype=float) - np.asarray(fmin, dtype=float)
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (F - fmin) / safe, 0.0)
