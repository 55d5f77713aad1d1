"""Gaussian process regression with an anisotropic Matern 5/2 kernel.

Inputs are scaled to the unit box and targets standardised before fitting,
so the zero-mean prior acts on centred data. Hyperparameters are fitted by
maximising the log marginal likelihood in log space with multi-start
L-BFGS-B and analytic gradients. Passing ``h`` in :class:`FitConfig`
switches to the KPLS kernel, where the per-dimension inverse lengthscales are
replaced by ``h`` values acting through a PLS rotation.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from . import _core
from .errors import (ConfigurationError, DegenerateInputError, DimensionError,
                     DuplicateInputError, IllConditionedError)
from .pls import PlsRotation, fit_pls
from .sampling import DesignSpace, lhs_uniform

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2.0 * math.pi)
NOISE_FLOOR = 1e-10
MAX_JITTER = 1e-6


@dataclass(frozen=True)
class Hyperparameters:
    signal_variance: float
    lengthscale_inverse: np.ndarray
    noise_variance: float = NOISE_FLOOR

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.lengthscale_inverse, dtype=float))
        object.__setattr__(self, "lengthscale_inverse", theta)
        if not self.signal_variance > 0 or np.any(theta <= 0) or self.noise_variance < 0:
            raise ConfigurationError("hyperparameters must be positive")

    def to_log_vector(self):
        return np.concatenate(([math.log(self.signal_variance)],
                               np.log(self.lengthscale_inverse),
                               [math.log(self.noise_variance)]))

    @classmethod
    def from_log_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(math.exp(v[0]), np.exp(v[1:-1]), math.exp(v[-1]))

    def as_dict(self):
        return {"signal_variance": self.signal_variance,
                "lengthscale_inverse": self.lengthscale_inverse.tolist(),
                "noise_variance": self.noise_variance}


def scale_matrix(hyper, rotation=None):
    """Per-factor distance multipliers: ``(1, d)`` plain, ``(h, d)`` for KPLS."""
    theta = hyper.lengthscale_inverse
    if rotation is None:
        return theta[None, :]
    if theta.size != rotation.h:
        raise DimensionError(f"KPLS kernel needs {rotation.h} inverse lengthscales, got {theta.size}")
    return theta[:, None] * np.abs(rotation.rotation.T)


def _as_point(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def kernel_matern52(x, x2, hyper):
    x, x2 = _as_point(x), _as_point(x2)
    if x.size != x2.size or hyper.lengthscale_inverse.size != x.size:
        raise DimensionError("point and lengthscale dimensions disagree")
    r = hyper.lengthscale_inverse * np.abs(x - x2)
    return hyper.signal_variance * float(np.prod((1.0 + SQRT5 * r + 5.0 / 3.0 * r * r)
                                                 * np.exp(-SQRT5 * r)))


def kernel_kpls(x, x2, hyper, rotation):
    x, x2 = _as_point(x), _as_point(x2)
    if x.size != x2.size or x.size != rotation.d:
        raise DimensionError("point and rotation dimensions disagree")
    r = scale_matrix(hyper, rotation) * np.abs(x - x2)[None, :]
    return hyper.signal_variance * float(np.prod((1.0 + SQRT5 * r + 5.0 / 3.0 * r * r)
                                                 * np.exp(-SQRT5 * r)))


def covariance(X1, X2, hyper, rotation=None):
    return hyper.signal_variance * _core.cross_cov(X1, X2, scale_matrix(hyper, rotation))


def _factorize(K0, signal, noise):
    """Cholesky of ``signal*K0 + noise*I``, escalating the diagonal on failure."""
    n = K0.shape[0]
    jitter = max(noise, NOISE_FLOOR)
    while True:
        K = signal * K0
        K[np.diag_indices(n)] += jitter
        try:
            return sla.cholesky(K, lower=True, check_finite=False), jitter
        except (np.linalg.LinAlgError, ValueError):
            if jitter >= MAX_JITTER:
                raise IllConditionedError("covariance not positive definite", jitter=jitter)
            jitter = min(jitter * 10.0, MAX_JITTER) if jitter >= NOISE_FLOOR else NOISE_FLOOR


def log_marginal_likelihood(hyper, X, y, rotation=None, gradient=False):
    """Log marginal likelihood of standardised targets ``y`` at unit-box inputs ``X``.

    With ``gradient=True`` also returns the derivative with respect to
    ``hyper.to_log_vector()``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    C = scale_matrix(hyper, rotation)
    K0 = _core.cross_cov(X, X, C)
    chol, jitter = _factorize(K0, hyper.signal_variance, hyper.noise_variance)
    alpha = sla.cho_solve((chol, True), y, check_finite=False)
    value = (-np.log(np.diag(chol)).sum() - 0.5 * y @ alpha - 0.5 * n * LOG_2PI)
    if not gradient:
        return float(value)
    Kinv = sla.cho_solve((chol, True), np.eye(n), check_finite=False)
    A = np.outer(alpha, alpha) - Kinv
    AK = A * (hyper.signal_variance * K0)
    g_theta = 0.5 * _core.lml_grad_terms(X, C, AK, rotation is not None)
    grad = np.concatenate(([0.5 * AK.sum()], g_theta,
                           [0.5 * hyper.noise_variance * np.trace(A)]))
    return float(value), grad


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameter search options.

    Bounds for the signal variance are relative to the standardised target
    variance (i.e. absolute, since targets have unit variance).
    """

    h: int | None = None
    n_starts: int = 8
    seed: int = 0
    theta_bounds: tuple = (1e-2, 1e2)
    signal_bounds: tuple = (1e-3, 1e3)
    noise_bounds: tuple = (NOISE_FLOOR, 1e-2)
    maxiter: int = 200

    def __post_init__(self):
        if self.h is not None and (int(self.h) != self.h or self.h < 1):
            raise ConfigurationError(f"KPLS component count must be a positive integer, got {self.h}")
        if self.n_starts < 1:
            raise ConfigurationError("n_starts must be >= 1")


@dataclass(frozen=True)
class GpModel:
    hyper: Hyperparameters | None
    rotation: PlsRotation | None
    train_inputs: np.ndarray
    train_targets: np.ndarray
    target_mean: float
    target_std: float
    chol: np.ndarray | None
    alpha: np.ndarray | None
    lower: np.ndarray
    upper: np.ndarray
    jitter: float = NOISE_FLOOR
    log_likelihood: float = float("nan")
    start_log_likelihoods: tuple = field(default=(), repr=False)

    @property
    def constant(self):
        return self.hyper is None

    @property
    def d(self):
        return self.lower.size

    def normalize(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise DimensionError(f"query has {X.shape[1]} columns, model expects {self.d}")
        return (X - self.lower) / (self.upper - self.lower)

    def predict(self, X):
        return predict(self, X)

    def record(self):
        """JSON-friendly summary used in run traces."""
        return {
            "hyper": None if self.hyper is None else self.hyper.as_dict(),
            "kpls_components": None if self.rotation is None else self.rotation.h,
            "log_likelihood": None if self.constant else self.log_likelihood,
            "target_mean": self.target_mean,
            "target_std": self.target_std,
            "jitter": self.jitter,
        }


def predict(model, X):
    """Posterior mean and variance at raw-unit query rows ``X``.

    Returns
    -------
    means, variances : ndarray
        De-standardised; variances clamped at zero.
    """
    Xn = model.normalize(X)
    if model.constant:
        return np.full(Xn.shape[0], model.target_mean), np.zeros(Xn.shape[0])
    Ks = covariance(Xn, model.train_inputs, model.hyper, model.rotation)
    mean = Ks @ model.alpha
    v = sla.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = np.maximum(model.hyper.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
    return model.target_mean + model.target_std * mean, var * model.target_std ** 2


def _check_duplicates(Xn):
    keys = np.round(Xn, 12)
    if np.unique(keys, axis=0).shape[0] < keys.shape[0]:
        raise DuplicateInputError("training inputs contain duplicate rows")


def _log_bounds(config, n_theta):
    lo = [math.log(config.signal_bounds[0])] + [math.log(config.theta_bounds[0])] * n_theta \
        + [math.log(config.noise_bounds[0])]
    hi = [math.log(config.signal_bounds[1])] + [math.log(config.theta_bounds[1])] * n_theta \
        + [math.log(config.noise_bounds[1])]
    return np.array(lo), np.array(hi)


def _starts(lo, hi, config):
    centre = 0.5 * (lo + hi)
    if config.n_starts == 1:
        return centre[None, :]
    space = DesignSpace(lo, hi)
    return np.vstack([centre, lhs_uniform(space, config.n_starts - 1, config.seed)])


def _finalize(Xn, ys, hyper, rotation, base):
    C = scale_matrix(hyper, rotation)
    K0 = _core.cross_cov(Xn, Xn, C)
    chol, jitter = _factorize(K0, hyper.signal_variance, hyper.noise_variance)
    alpha = sla.cho_solve((chol, True), ys, check_finite=False)
    return replace(base, hyper=hyper, rotation=rotation, chol=chol, alpha=alpha, jitter=jitter)


def fit(X, y, config=None, bounds=None, rotation=None):
    """Fit a GP to raw-unit inputs ``X`` (n, d) and targets ``y`` (n,).

    Parameters
    ----------
    config : FitConfig, optional
    bounds : DesignSpace or (lower, upper), optional
        Box used to scale inputs to ``[0, 1]^d``; defaults to the data range.
    rotation : PlsRotation, optional
        Use this KPLS rotation instead of fitting one from ``config.h``.

    Raises
    ------
    DuplicateInputError
        Repeated training rows.
    IllConditionedError
        Every optimiser start failed to factorise.
    """
    config = config or FitConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise DimensionError(f"{X.shape[0]} input rows but {y.size} targets")
    if X.shape[0] < 2:
        raise ConfigurationError("at least two training points are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("training data contain non-finite values")
    if bounds is None:
        lower, upper = X.min(axis=0), X.max(axis=0)
        upper = np.where(upper > lower, upper, lower + 1.0)
    elif isinstance(bounds, DesignSpace):
        lower, upper = bounds.lower, bounds.upper
    else:
        lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    Xn = (X - lower) / (upper - lower)
    _check_duplicates(Xn)

    mean = float(y.mean())
    std = float(y.std())
    base = GpModel(hyper=None, rotation=None, train_inputs=Xn, train_targets=np.zeros_like(y),
                   target_mean=mean, target_std=0.0, chol=None, alpha=None,
                   lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))
    if std <= 1e-12 * max(1.0, abs(mean)):
        return base
    ys = (y - mean) / std
    base = replace(base, train_targets=ys, target_std=std)

    if rotation is None and config.h is not None:
        if config.h > X.shape[1]:
            raise ConfigurationError(f"h={config.h} exceeds input dimension {X.shape[1]}")
        rotation = fit_pls(Xn, ys, min(config.h, X.shape[0]))
    n_theta = X.shape[1] if rotation is None else rotation.h
    lo, hi = _log_bounds(config, n_theta)

    def objective(v):
        try:
            value, grad = log_marginal_likelihood(Hyperparameters.from_log_vector(v), Xn, ys,
                                                  rotation, gradient=True)
        except IllConditionedError:
            return 1e25, np.zeros_like(v)
        if not np.isfinite(value):
            return 1e25, np.zeros_like(v)
        return -value, -grad

    best_v, best_val = None, -np.inf
    start_values = []
    for v0 in _starts(lo, hi, config):
        f0, _ = objective(v0)
        start_values.append(-f0)
        if -f0 > best_val:
            best_v, best_val = v0, -f0
        res = minimize(objective, v0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"maxiter": config.maxiter})
        if np.isfinite(res.fun) and -res.fun > best_val:
            best_v, best_val = res.x, -res.fun
    if best_val <= -1e24:
        raise IllConditionedError("all hyperparameter starts failed to factorise", jitter=MAX_JITTER)
    hyper = Hyperparameters.from_log_vector(np.clip(best_v, lo, hi))
    model = _finalize(Xn, ys, hyper, rotation, base)
    return replace(model, log_likelihood=float(best_val), start_log_likelihoods=tuple(start_values))
