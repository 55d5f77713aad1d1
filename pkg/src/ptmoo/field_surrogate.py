"""POD + per-coefficient GP predictors for field-valued constraints."""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import gp
from .errors import DimensionError
from .pod import DEFAULT_EPS2, compute_pod

STD_FLOOR = 1e-9


@dataclass(frozen=True)
class FieldSurrogate:
    basis: object            # PodBasis
    coeff_models: tuple      # one GpModel per retained mode
    limit: float
    station_count: int

    @property
    def n_pod(self):
        return self.basis.n_pod

    def coefficient_moments(self, X):
        """Predicted means and variances of every projection coefficient, shape (n_pod, n)."""
        moments = [m.predict(X) for m in self.coeff_models]
        return (np.array([mu for mu, _ in moments]),
                np.array([var for _, var in moments]))

    def record(self):
        return {"n_pod": self.n_pod, "limit": self.limit,
                "captured_energy": self.basis.captured_energy(),
                "coefficients": [m.record() for m in self.coeff_models]}


def fit_field(X, fields, eps2=DEFAULT_EPS2, limit=1.0, gp_config=None, bounds=None):
    """Fit the POD basis of ``fields`` (n_h, n_s) and one GP per retained coefficient.

    Column j of ``fields`` must be the field observed at row j of ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(fields, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape[1] != X.shape[0]:
        raise DimensionError(f"{Y.shape[1]} snapshots for {X.shape[0]} designs")
    basis = compute_pod(Y, eps2)
    models = tuple(gp.fit(X, basis.coefficients[i], gp_config, bounds=bounds)
                   for i in range(basis.n_pod))
    return FieldSurrogate(basis=basis, coeff_models=models, limit=float(limit),
                          station_count=Y.shape[0])


def predict_field(surrogate, X):
    """Mean and variance fields at designs ``X``.

    A single design returns vectors of length ``n_h``; a matrix of designs
    returns ``(n, n_h)`` arrays. Variances assume independent coefficients:
    ``var_j = sum_i L_ji^2 var_i``.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    mu, var = surrogate.coefficient_moments(np.atleast_2d(X))
    L = surrogate.basis.modes
    mean_field = (L @ mu).T
    var_field = ((L * L) @ var).T
    if single:
        return mean_field[0], var_field[0]
    return mean_field, var_field


def critical_station_stats(mean_field, var_field):
    """Mean and std at the station with the largest predicted mean (lowest index on ties)."""
    mean_field = np.atleast_2d(mean_field)
    var_field = np.atleast_2d(var_field)
    j = np.argmax(mean_field, axis=1)
    rows = np.arange(mean_field.shape[0])
    return mean_field[rows, j], np.maximum(np.sqrt(np.maximum(var_field[rows, j], 0.0)), STD_FLOOR)


def feasibility_stat(surrogate, X):
    """Probability of feasibility at the critical station.

    Returns ``(prob_feasible, critical_mean, critical_std)``; scalars for one
    design, arrays for a matrix of designs.
    """
    X = np.asarray(X, dtype=float)
    mean_field, var_field = predict_field(surrogate, np.atleast_2d(X))
    mean, std = critical_station_stats(mean_field, var_field)
    prob = ndtr((surrogate.limit - mean) / std)
    if X.ndim == 1:
        return float(prob[0]), float(mean[0]), float(std[0])
    return prob, mean, std
