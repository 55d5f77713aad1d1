"""Single-response partial least squares (NIPALS) and the KPLS rotation."""
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, DimensionError

_TINY = 1e-12


@dataclass(frozen=True)
class PlsRotation:
    weights: np.ndarray   # W, (d, h), unit columns
    loadings: np.ndarray  # P, (d, h)
    rotation: np.ndarray  # W (P^T W)^-1, (d, h)

    @property
    def h(self):
        return self.weights.shape[1]

    @property
    def d(self):
        return self.weights.shape[0]


def fit_pls(X, y, h):
    """Fit ``h`` PLS1 components by NIPALS deflation.

    ``X`` and ``y`` are centred internally. Each weight column is flipped so
    that its largest-magnitude entry is positive. If the deflated response
    becomes orthogonal to the deflated inputs before ``h`` components are
    found, fewer components are returned with a ``RuntimeWarning``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionError("X must be (n, d) with one response per row")
    n, d = X.shape
    if int(h) != h or not 1 <= h <= min(d, n):
        raise ConfigurationError(f"component count h={h} must satisfy 1 <= h <= min(d, n) = {min(d, n)}")
    h = int(h)
    yc = y - y.mean()
    if np.allclose(yc, 0.0, atol=_TINY * max(1.0, abs(y.mean()))):
        raise DegenerateInputError("response has zero variance")
    Xk = X - X.mean(axis=0)
    yk = yc.copy()
    W, P = [], []
    for k in range(h):
        w = Xk.T @ yk
        norm = np.linalg.norm(w)
        if norm < _TINY:
            warnings.warn(f"PLS stopped after {k} components: response fully explained",
                          RuntimeWarning, stacklevel=2)
            break
        w /= norm
        if w[np.argmax(np.abs(w))] < 0:
            w = -w
        t = Xk @ w
        tt = t @ t
        p = Xk.T @ t / tt
        Xk = Xk - np.outer(t, p)
        yk = yk - (yk @ t / tt) * t
        W.append(w)
        P.append(p)
    if not W:
        raise DegenerateInputError("inputs carry no information about the response")
    W = np.column_stack(W)
    P = np.column_stack(P)
    while np.linalg.cond(P.T @ W) > 1e12:
        if W.shape[1] == 1:
            raise DegenerateInputError("loadings^T weights is singular")
        warnings.warn(f"loadings^T weights singular; reducing h to {W.shape[1] - 1}",
                      RuntimeWarning, stacklevel=2)
        W, P = W[:, :-1], P[:, :-1]
    return PlsRotation(weights=W, loadings=P, rotation=W @ np.linalg.inv(P.T @ W))


def identity_rotation(d):
    """Rotation that makes the KPLS kernel coincide with the plain kernel (h = d)."""
    eye = np.eye(d)
    return PlsRotation(weights=eye, loadings=eye, rotation=eye)
