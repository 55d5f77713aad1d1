"""Latin hypercube designs over a bounded box.

Each column draws from its own child stream of ``SeedSequence(seed)`` so that
adding dimensions never changes the earlier columns.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, DimensionError

NORMAL_HALF_WIDTH = 3.0


@dataclass(frozen=True)
class DesignSpace:
    """Axis-aligned box ``[lower, upper]`` in problem units."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ConfigurationError("bounds must be two 1-D vectors of equal length >= 1")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ConfigurationError("bounds must be finite")
        if np.any(lower >= upper):
            bad = np.flatnonzero(lower >= upper).tolist()
            raise ConfigurationError(f"lower bound not below upper bound in dimension(s) {bad}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self):
        return self.lower.size

    @property
    def span(self):
        return self.upper - self.lower

    def normalize(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.d:
            raise DimensionError(f"expected {self.d} columns, got {X.shape[-1]}")
        return (X - self.lower) / self.span

    def denormalize(self, U):
        return self.lower + np.asarray(U, dtype=float) * self.span

    def clip(self, X):
        return np.clip(X, self.lower, self.upper)

    def contains(self, X):
        X = np.atleast_2d(X)
        return bool(np.all((X >= self.lower) & (X <= self.upper)))


def _column_streams(seed, d):
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))
            for j in range(d)]


def _stratified_unit(n, rng):
    # one uniform draw inside each of n equal slices, slices shuffled
    perm = rng.permutation(n)
    return (perm + rng.random(n)) / n


def _check_count(n):
    if int(n) != n or n < 1:
        raise ConfigurationError(f"sample count must be a positive integer, got {n!r}")
    return int(n)


def lhs_uniform(space, n, seed):
    """Latin hypercube sample with uniform marginals.

    Parameters
    ----------
    space : DesignSpace
    n : int
        Number of designs.
    seed : int
        Seed; identical arguments give bit-identical output.

    Returns
    -------
    ndarray, shape (n, d)
    """
    n = _check_count(n)
    U = np.column_stack([_stratified_unit(n, rng) for rng in _column_streams(seed, space.d)])
    return space.clip(space.denormalize(U))


def lhs_normal(space, n, seed):
    """Latin hypercube sample with normal marginals.

    Strata are equal-probability slices of the standard normal CDF. The
    normal axis maps the mean to the box midpoint and +/-3 sigma to the
    bounds; the rare draws beyond 3 sigma are clamped onto the bounds.
    """
    n = _check_count(n)
    P = np.column_stack([_stratified_unit(n, rng) for rng in _column_streams(seed, space.d)])
    Z = np.clip(ndtri(P), -NORMAL_HALF_WIDTH, NORMAL_HALF_WIDTH)
    mid = 0.5 * (space.lower + space.upper)
    return space.clip(mid + Z * space.span / (2.0 * NORMAL_HALF_WIDTH))


def lhs(space, n, seed, distribution="uniform"):
    if distribution == "uniform":
        return lhs_uniform(space, n, seed)
    if distribution == "normal":
        return lhs_normal(space, n, seed)
    raise ConfigurationError(f"unknown sampling distribution {distribution!r}")
