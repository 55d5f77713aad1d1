"""Truncated proper orthogonal decomposition of field snapshots.

Snapshots are stored column-wise (one column per design, one row per field
station). Snapshots are not mean-centred; centre them beforehand if needed.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, ConfigurationError

DEFAULT_EPS2 = 0.01


@dataclass(frozen=True)
class PodBasis:
    modes: np.ndarray            # (n_h, n_pod), orthonormal columns
    singular_values: np.ndarray  # (min(n_h, n_s),), descending
    coefficients: np.ndarray     # (n_pod, n_s) = modes.T @ snapshots
    energy_tolerance: float

    @property
    def n_pod(self):
        return self.modes.shape[1]

    @property
    def n_h(self):
        return self.modes.shape[0]

    def captured_energy(self):
        s2 = self.singular_values ** 2
        return float(s2[:self.n_pod].sum() / s2.sum())


def truncation_rank(singular_values, eps2):
    """Smallest m whose leading squared singular values exceed ``1 - eps2`` of the total."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    ratio = np.cumsum(s2) / s2.sum()
    above = np.flatnonzero(ratio > 1.0 - eps2)
    # rounding can leave the full sum a hair under 1 - eps2 for tiny eps2
    return int(above[0]) + 1 if above.size else s2.size


def compute_pod(snapshots, eps2=DEFAULT_EPS2):
    """Thin-SVD POD basis keeping the fewest modes that satisfy the energy rule.

    Parameters
    ----------
    snapshots : array_like, shape (n_h, n_s)
    eps2 : float
        Squared projection tolerance, ``0 < eps2 < 1``.

    Raises
    ------
    DegenerateInputError
        If the matrix is all zeros.
    """
    Y = np.asarray(snapshots, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.size == 0:
        raise DimensionError("snapshot matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(Y)):
        raise DegenerateInputError("snapshot matrix contains non-finite entries")
    if not 0.0 < eps2 < 1.0:
        raise ConfigurationError(f"eps2 must lie in (0, 1), got {eps2}")
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    if s[0] == 0.0:
        raise DegenerateInputError("snapshot matrix is identically zero")
    m = truncation_rank(s, eps2)
    L = np.ascontiguousarray(U[:, :m])
    return PodBasis(modes=L, singular_values=s, coefficients=L.T @ Y,
                    energy_tolerance=float(eps2))


def project(basis, field):
    """Projection coefficients ``L^T field`` (works on a vector or column stack)."""
    field = np.asarray(field, dtype=float)
    if field.shape[0] != basis.n_h:
        raise DimensionError(f"field has {field.shape[0]} stations, basis has {basis.n_h}")
    return basis.modes.T @ field


def reconstruct(basis, coeffs):
    """Field ``L coeffs`` from projection coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != basis.n_pod:
        raise DimensionError(f"got {coeffs.shape[0]} coefficients, basis has {basis.n_pod} modes")
    return basis.modes @ coeffs
