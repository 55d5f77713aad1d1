"""NSGA-II for maximising a vector of acquisition values over a box.

Variation operators work in unit-box coordinates: bounded SBX crossover and
bounded polynomial mutation (Deb's formulations). Survival is elitist
(parents + offspring) by non-domination rank, then crowding distance.
"""
from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import ConfigurationError, EvaluationError
from .sampling import lhs_uniform, DesignSpace


@dataclass(frozen=True)
class GaConfig:
    population: int = 200
    generations: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: float | None = None  # None -> 1/d
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ConfigurationError(f"population must be even and >= 4, got {self.population}")
        if self.generations < 1:
            raise ConfigurationError(f"generations must be >= 1, got {self.generations}")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ConfigurationError("crossover_prob must lie in [0, 1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigurationError("mutation_prob must lie in [0, 1]")


@dataclass(frozen=True)
class ParetoSet:
    points: np.ndarray   # (n, m) objective (or acquisition) vectors
    designs: np.ndarray  # (n, d)

    def __len__(self):
        return self.points.shape[0]


def _ranks(F, maximize):
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    return _core.nondominated_ranks(-F if maximize else F)


def non_dominated_sort(points, maximize=True):
    """Split points into successive non-dominated fronts.

    Returns a list of index arrays, best front first.
    """
    ranks = _ranks(points, maximize)
    if ranks.size == 0:
        return []
    return [np.flatnonzero(ranks == r) for r in range(ranks.max() + 1)]


def _crowding_by_rank(F, rank):
    n, m = F.shape
    dist = np.zeros(n)
    for k in range(m):
        order = np.lexsort((F[:, k], rank))
        fs = F[order, k]
        rs = rank[order]
        first = np.ones(n, dtype=bool)
        first[1:] = rs[1:] != rs[:-1]
        last = np.ones(n, dtype=bool)
        last[:-1] = rs[:-1] != rs[1:]
        group = np.cumsum(first) - 1
        lo = fs[first][group]
        hi = fs[last][group]
        span = hi - lo
        gap = np.zeros(n)
        interior = ~(first | last)
        idx = np.flatnonzero(interior)
        gap[idx] = fs[idx + 1] - fs[idx - 1]
        contrib = np.where(span > 0, gap / np.where(span > 0, span, 1.0), 0.0)
        contrib[first | last] = np.inf
        dist[order] += contrib
    return dist


def crowding_distance(front):
    """Crowding distance of each member of a single front.

    Boundary members get infinity; interior members sum their normalised
    neighbour gaps over all objectives.
    """
    F = np.asarray(front, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    return _crowding_by_rank(F, np.zeros(F.shape[0], dtype=np.intp))


def _tournament(rng, rank, crowd, n):
    a = rng.integers(0, rank.size, n)
    b = rng.integers(0, rank.size, n)
    coin = rng.random(n) < 0.5
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] > crowd[b])) | \
        ((rank[a] == rank[b]) & (crowd[a] == crowd[b]) & coin)
    return np.where(a_wins, a, b)


def _sbx(rng, p1, p2, prob, eta):
    c1, c2 = p1.copy(), p2.copy()
    npairs, d = p1.shape
    u = rng.random((npairs, d))
    do_var = rng.random((npairs, d)) < 0.5
    do_pair = rng.random(npairs) < prob
    swap = rng.random((npairs, d)) < 0.5
    y1 = np.minimum(p1, p2)
    y2 = np.maximum(p1, p2)
    mask = do_var & do_pair[:, None] & (np.abs(p1 - p2) > 1e-14)
    delta = np.where(mask, y2 - y1, 1.0)
    expo = 1.0 / (eta + 1.0)

    def betaq(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        low = u <= 1.0 / alpha
        return np.where(low, (u * alpha) ** expo,
                        (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** expo)

    child1 = 0.5 * (y1 + y2 - betaq(1.0 + 2.0 * y1 / delta) * delta)
    child2 = 0.5 * (y1 + y2 + betaq(1.0 + 2.0 * (1.0 - y2) / delta) * delta)
    child1 = np.clip(child1, 0.0, 1.0)
    child2 = np.clip(child2, 0.0, 1.0)
    first = np.where(swap, child2, child1)
    second = np.where(swap, child1, child2)
    c1[mask] = first[mask]
    c2[mask] = second[mask]
    return c1, c2


def _polynomial_mutation(rng, X, prob, eta):
    u = rng.random(X.shape)
    mask = rng.random(X.shape) < prob
    expo = 1.0 / (eta + 1.0)
    low = u < 0.5
    xy_low = 1.0 - X
    xy_high = X
    val_low = 2.0 * u + (1.0 - 2.0 * u) * xy_low ** (eta + 1.0)
    val_high = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy_high ** (eta + 1.0)
    deltaq = np.where(low, val_low ** expo - 1.0, 1.0 - val_high ** expo)
    return np.clip(np.where(mask, X + deltaq, X), 0.0, 1.0)


def _evaluate(evaluate, space, U):
    X = space.denormalize(U)
    try:
        F = np.asarray(evaluate(X), dtype=float)
    except Exception as exc:
        for row in X:
            try:
                evaluate(row[None, :])
            except Exception as inner:
                raise EvaluationError(f"evaluator failed at design {row.tolist()}: {inner}",
                                      design=row) from inner
        raise EvaluationError(f"evaluator failed on batch: {exc}") from exc
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != X.shape[0] or not np.all(np.isfinite(F)):
        bad = np.flatnonzero(~np.all(np.isfinite(F), axis=1)) if F.shape[0] == X.shape[0] else [0]
        raise EvaluationError("evaluator returned non-finite or mis-shaped values",
                              design=X[bad[0]] if len(bad) else None)
    return F


def nsga2_maximize(evaluate, space, cfg=None, callback=None):
    """Approximate the Pareto set of ``evaluate`` (to be maximised) over ``space``.

    Parameters
    ----------
    evaluate : callable
        Maps an ``(n, d)`` array of designs to an ``(n, m)`` array of values
        (``(n,)`` is accepted for one objective).
    space : DesignSpace
    cfg : GaConfig
    callback : callable, optional
        Called as ``callback(generation, designs, values)`` after each
        survival step; useful for tracing.

    Returns
    -------
    ParetoSet
        First front of the final population, duplicates removed.
    """
    cfg = cfg or GaConfig()
    if not isinstance(space, DesignSpace):
        space = DesignSpace(*space)
    d = space.d
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0x6a,)))
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / d
    n = cfg.population

    U = space.normalize(lhs_uniform(space, n, cfg.seed))
    F = _evaluate(evaluate, space, U)
    rank = _ranks(F, True)
    crowd = _crowding_by_rank(F, rank)
    for gen in range(cfg.generations):
        parents = _tournament(rng, rank, crowd, n)
        c1, c2 = _sbx(rng, U[parents[0::2]], U[parents[1::2]], cfg.crossover_prob, cfg.crossover_eta)
        children = _polynomial_mutation(rng, np.vstack([c1, c2]), pm, cfg.mutation_eta)
        Fc = _evaluate(evaluate, space, children)
        U = np.vstack([U, children])
        F = np.vstack([F, Fc])
        rank = _ranks(F, True)
        crowd = _crowding_by_rank(F, rank)
        keep = np.lexsort((-crowd, rank))[:n]
        U, F, rank = U[keep], F[keep], rank[keep]
        crowd = _crowding_by_rank(F, rank)
        if callback is not None:
            callback(gen, space.denormalize(U), F)

    front = np.flatnonzero(rank == 0)
    _, first = np.unique(np.round(U[front], 15), axis=0, return_index=True)
    front = front[np.sort(first)]
    return ParetoSet(points=F[front].copy(), designs=space.denormalize(U[front]))
