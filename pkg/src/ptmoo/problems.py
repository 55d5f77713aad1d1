"""Synthetic constrained bi-objective test problems.

All evaluators are vectorised: they take an ``(n, d)`` array and return
``(n, n_f)`` objectives or ``(n, stations)`` constraint fields. A design is
feasible when every station of every constraint satisfies ``g <= limit``.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .sampling import DesignSpace


@dataclass(frozen=True)
class Constraint:
    name: str
    evaluate: Callable
    limit: float
    station_count: int = 1


@dataclass(frozen=True)
class Problem:
    name: str
    space: DesignSpace
    n_f: int
    objectives: Callable
    constraints: tuple
    witness: np.ndarray = field(default=None)
    params: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.space.d

    def evaluate(self, X):
        """Objectives ``(n, n_f)`` and a list of constraint fields ``(n, stations)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.asarray(self.objectives(X), dtype=float).reshape(X.shape[0], self.n_f)
        G = [np.asarray(c.evaluate(X), dtype=float).reshape(X.shape[0], c.station_count)
             for c in self.constraints]
        return F, G

    def feasibility(self, G):
        """Per-constraint feasibility flags ``(n, n_c)`` from evaluated fields."""
        return np.column_stack([np.all(g <= c.limit, axis=1) for g, c in zip(G, self.constraints)])

    def is_feasible(self, X):
        _, G = self.evaluate(X)
        return np.all(self.feasibility(G), axis=1)


def _cols(X):
    X = np.atleast_2d(X)
    return X[:, 0], X[:, 1]


def bnh():
    """Binh and Korn: x1 in [0, 5], x2 in [0, 3]."""
    def objectives(X):
        x1, x2 = _cols(X)
        return np.column_stack([4 * x1**2 + 4 * x2**2, (x1 - 5) ** 2 + (x2 - 5) ** 2])

    def g1(X):
        x1, x2 = _cols(X)
        return (x1 - 5) ** 2 + x2**2

    def g2(X):
        x1, x2 = _cols(X)
        return 7.7 - ((x1 - 8) ** 2 + (x2 + 3) ** 2)

    return Problem("bnh", DesignSpace([0.0, 0.0], [5.0, 3.0]), 2, objectives,
                   (Constraint("g1", g1, 25.0), Constraint("g2", g2, 0.0)),
                   witness=np.array([1.0, 1.0]))


def srn():
    """Srinivas and Deb: x in [-20, 20]^2."""
    def objectives(X):
        x1, x2 = _cols(X)
        return np.column_stack([2 + (x1 - 2) ** 2 + (x2 - 1) ** 2, 9 * x1 - (x2 - 1) ** 2])

    def g1(X):
        x1, x2 = _cols(X)
        return x1**2 + x2**2

    def g2(X):
        x1, x2 = _cols(X)
        return x1 - 3 * x2 + 10

    return Problem("srn", DesignSpace([-20.0, -20.0], [20.0, 20.0]), 2, objectives,
                   (Constraint("g1", g1, 225.0), Constraint("g2", g2, 0.0)),
                   witness=np.array([-5.0, 5.0]))


def tnk():
    """Tanaka: x in [0, pi]^2, identity objectives."""
    def objectives(X):
        x1, x2 = _cols(X)
        return np.column_stack([x1, x2])

    def g1(X):
        x1, x2 = _cols(X)
        return -(x1**2) - x2**2 + 1 + 0.1 * np.cos(16 * np.arctan2(x1, x2))

    def g2(X):
        x1, x2 = _cols(X)
        return (x1 - 0.5) ** 2 + (x2 - 0.5) ** 2

    return Problem("tnk", DesignSpace([0.0, 0.0], [np.pi, np.pi]), 2, objectives,
                   (Constraint("g1", g1, 0.0), Constraint("g2", g2, 0.5)),
                   witness=np.array([0.8, 0.8]))


# Beam constants (kN, m). ALLOWABLE_STRESS is set so the stiffest section
# (H = 1.5, B = 1.0) stays feasible at the largest load multiplier.
SPAN = 20.0
UNIFORM_LOAD = 30.0
POINT_LOAD = 300.0
UNIT_WEIGHT = 25.0
YOUNGS_MODULUS = 3.3e7
ALLOWABLE_STRESS = 2.0e4
DEFLECTION_LIMIT = SPAN / 350.0
N_SHAPE = 13
_LOAD_WEIGHTS = 1.0 / (1.0 + np.arange(N_SHAPE))


def load_multiplier(Z):
    """Smooth multiplier in [0.9, 1.1]; equals 1.1 when every shape variable is 0.5."""
    Z = np.atleast_2d(Z)
    return 0.9 + 0.2 * (np.sin(np.pi * Z) @ _LOAD_WEIGHTS) / _LOAD_WEIGHTS.sum()


def beam_response(H, B, multiplier, shift, stations, point_factor=1.0):
    """Bending stress (kPa) and deflection (m) along a simply supported beam.

    Uniform load (live * multiplier + self-weight) plus a point load at
    ``SPAN / 2 + shift`` scaled by ``multiplier * point_factor``. Inputs
    broadcast over designs; output shape is ``(n, stations.size)``.
    """
    H, B = np.asarray(H, dtype=float)[:, None], np.asarray(B, dtype=float)[:, None]
    mult = np.asarray(multiplier, dtype=float)[:, None]
    a = SPAN / 2.0 + np.asarray(shift, dtype=float)[:, None]
    b = SPAN - a
    x = stations[None, :]
    w = UNIFORM_LOAD * mult + UNIT_WEIGHT * B * H
    P = POINT_LOAD * mult * np.broadcast_to(np.asarray(point_factor, dtype=float), mult.shape[:1])[:, None]
    EI = YOUNGS_MODULUS * B * H**3 / 12.0
    section_modulus = B * H**2 / 6.0

    left = x <= a
    moment = w * x * (SPAN - x) / 2.0 + np.where(left, P * b * x / SPAN, P * a * (SPAN - x) / SPAN)
    xr = SPAN - x
    defl_point = np.where(left,
                          P * b * x * (SPAN**2 - b**2 - x**2),
                          P * a * xr * (SPAN**2 - a**2 - xr**2)) / (6.0 * EI * SPAN)
    defl_uniform = w * x * (SPAN**3 - 2.0 * SPAN * x**2 + x**3) / (24.0 * EI)
    return moment / section_modulus, defl_uniform + defl_point


def beam_field_problem(n_stations=61):
    """15-variable girder sizing problem with field-valued constraints.

    Variables: section height H in [0.3, 1.5] m, width B in [0.2, 1.0] m and
    13 shape variables in [0, 1] that scale the uniform and midspan point
    loads through one smooth multiplier. Objectives: a monetary cost that penalises width and an
    environmental cost that penalises height, so the two conflict along the
    constraint boundary. Constraints: bending-stress and deflection
    utilisation at every station, both limited to 1.
    """
    if n_stations < 11:
        raise ConfigurationError(f"beam problem needs at least 11 stations, got {n_stations}")
    stations = np.linspace(0.0, SPAN, n_stations)
    lower = np.concatenate(([0.3, 0.2], np.zeros(N_SHAPE)))
    upper = np.concatenate(([1.5, 1.0], np.ones(N_SHAPE)))

    def shape_penalty(Z):
        return 1.0 + 0.05 * np.mean(4.0 * (Z - 0.5) ** 2, axis=1)

    def objectives(X):
        X = np.atleast_2d(X)
        H, B, Z = X[:, 0], X[:, 1], X[:, 2:]
        pen = shape_penalty(Z)
        monetary = SPAN * (B * H + 0.5 * B) * pen
        environmental = SPAN * (B * H + 0.8 * H**2) * pen
        return np.column_stack([monetary, environmental])

    def response(X):
        X = np.atleast_2d(X)
        return beam_response(X[:, 0], X[:, 1], load_multiplier(X[:, 2:]), np.zeros(X.shape[0]),
                             stations)

    def stress(X):
        return response(X)[0] / ALLOWABLE_STRESS

    def deflection(X):
        return response(X)[1] / DEFLECTION_LIMIT

    witness = np.concatenate(([1.5, 1.0], np.full(N_SHAPE, 0.5)))
    return Problem("beam", DesignSpace(lower, upper), 2, objectives,
                   (Constraint("stress", stress, 1.0, n_stations),
                    Constraint("deflection", deflection, 1.0, n_stations)),
                   witness=witness, params={"n_stations": n_stations, "stations": stations})


PROBLEMS = {"bnh": bnh, "srn": srn, "tnk": tnk, "beam": beam_field_problem}


def get_problem(name, **kwargs):
    try:
        factory = PROBLEMS[name.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**kwargs)
