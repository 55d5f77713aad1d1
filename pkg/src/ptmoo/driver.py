"""Outer Bayesian optimisation loops.

Two candidate-selection strategies share one loop:

``ptmoo``
    NSGA-II approximates the Pareto set of the per-objective constrained
    expected improvements, measured against the objective values of the
    current preferred design; the candidate with the largest sum of squared
    relative improvements is evaluated next.
``cehvi``
    A single-objective GA maximises PF x EHVI over the observed feasible
    front in min-max normalised objective space.

Every iteration refits all surrogates (objective GPs and POD field
surrogates, including PLS rotations) on the grown dataset.
"""
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import acquisition as acq
from . import gp
from .errors import ConfigurationError, PtmooError
from .field_surrogate import critical_station_stats, fit_field, predict_field
from .moga import GaConfig, nsga2_maximize
from .pod import DEFAULT_EPS2
from .sampling import lhs

log = logging.getLogger(__name__)

STRATEGIES = ("ptmoo", "cehvi")
DENOMINATOR_EPS = 1e-12
DUPLICATE_TOL = 1e-8


@dataclass
class Dataset:
    """Observed designs with objectives and per-constraint fields."""

    X: np.ndarray                   # (N, d)
    objectives: np.ndarray          # (N, n_f)
    constraint_fields: list         # n_c arrays of shape (N, stations)
    feasible_by_constraint: np.ndarray  # (N, n_c) bool

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def feasible(self):
        return np.all(self.feasible_by_constraint, axis=1)

    @classmethod
    def from_evaluations(cls, problem, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F, G = problem.evaluate(X)
        return cls(X.copy(), F, [g.copy() for g in G], problem.feasibility(G))

    def append(self, problem, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        F, G = problem.evaluate(x)
        self.X = np.vstack([self.X, x])
        self.objectives = np.vstack([self.objectives, F])
        self.constraint_fields = [np.vstack([a, g]) for a, g in zip(self.constraint_fields, G)]
        self.feasible_by_constraint = np.vstack([self.feasible_by_constraint,
                                                 problem.feasibility(G)])
        return F[0], G


def aggregate_scores(F, fmin, fmax):
    """Sum of min-max normalised objectives per row; degenerate objectives add 0."""
    return np.sum(acq.normalize_objectives(F, fmin, fmax), axis=1)


def preferred_index(F, feasible, fmin=None, fmax=None):
    """Row of the feasible design with the smallest normalised aggregate, or None.

    ``fmin``/``fmax`` default to the column extremes over all rows, feasible or
    not. Ties go to the lowest row index.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    feasible = np.asarray(feasible, dtype=bool)
    if not feasible.any():
        return None
    fmin = F.min(axis=0) if fmin is None else fmin
    fmax = F.max(axis=0) if fmax is None else fmax
    scores = np.where(feasible, aggregate_scores(F, fmin, fmax), np.inf)
    return int(np.argmin(scores))


def preferred_design(data):
    return preferred_index(data.objectives, data.feasible)


@dataclass(frozen=True)
class Surrogates:
    objective_models: tuple
    constraint_models: tuple

    def objective_moments(self, X):
        moments = [m.predict(X) for m in self.objective_models]
        mean = np.column_stack([mu for mu, _ in moments])
        std = np.sqrt(np.column_stack([var for _, var in moments]))
        return mean, std

    def constraint_stats(self, X):
        stats = []
        for s in self.constraint_models:
            mean_field, var_field = predict_field(s, X)
            mean, std = critical_station_stats(mean_field, var_field)
            stats.append((mean, std, s.limit))
        return stats

    def probability_of_feasibility(self, X):
        return np.broadcast_to(acq.probability_of_feasibility(self.constraint_stats(X)),
                               (np.atleast_2d(X).shape[0],))

    def record(self):
        return {"objectives": [m.record() for m in self.objective_models],
                "constraints": [s.record() for s in self.constraint_models]}


def _child_seed(seed, *key):
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def fit_surrogates(data, problem, surrogate="gpr", eps2=DEFAULT_EPS2, n_starts=8, seed=0):
    """Fit one GP per objective and one POD field surrogate per constraint."""
    h = kpls_components(surrogate)
    objective_models = tuple(
        gp.fit(data.X, data.objectives[:, k],
               gp.FitConfig(h=h, n_starts=n_starts, seed=_child_seed(seed, 0, k)),
               bounds=problem.space)
        for k in range(data.objectives.shape[1]))
    constraint_models = tuple(
        fit_field(data.X, data.constraint_fields[i].T, eps2, c.limit,
                  gp.FitConfig(h=h, n_starts=n_starts, seed=_child_seed(seed, 1, i)),
                  bounds=problem.space)
        for i, c in enumerate(problem.constraints))
    return Surrogates(objective_models, constraint_models)


def kpls_components(surrogate):
    if surrogate == "gpr":
        return None
    if isinstance(surrogate, str) and surrogate.startswith("kpls_"):
        try:
            return int(surrogate.split("_", 1)[1])
        except ValueError:
            pass
    raise ConfigurationError(f"surrogate must be 'gpr' or 'kpls_<h>', got {surrogate!r}")


def _is_new(x, data, space):
    if data.n == 0:
        return True
    gap = np.abs(space.normalize(data.X) - space.normalize(x)).max(axis=1)
    return bool(gap.min() > DUPLICATE_TOL)


def _first_new(candidates, data, space, rng):
    for x in candidates:
        if _is_new(x, data, space):
            return np.asarray(x, dtype=float), False
    # every proposal repeats an observation: draw a fresh uniform point
    return space.denormalize(rng.random(space.d)), True


class _LastPopulation:
    def __init__(self):
        self.designs = None
        self.values = None

    def __call__(self, gen, designs, values):
        self.designs, self.values = designs, values


def _ranked_candidates(pareto, last, score_front, score_pop):
    front_order = np.argsort(-score_front, kind="stable")
    pop_order = np.argsort(-score_pop, kind="stable")
    return list(pareto.designs[front_order]) + list(last.designs[pop_order])


def select_next_pf(surrogates, data, space, ga, rng):
    """Candidate maximising the probability of feasibility alone."""
    last = _LastPopulation()
    pareto = nsga2_maximize(surrogates.probability_of_feasibility, space, ga, callback=last)
    cands = _ranked_candidates(pareto, last, pareto.points[:, 0], last.values[:, 0])
    x, random_draw = _first_new(cands, data, space, rng)
    return x, {"rule": "pf", "random_draw": random_draw}


def ptmoo_scores(ei_c, incumbent):
    """Sum over objectives of squared constrained EI relative to the incumbent values."""
    denom = np.maximum(np.abs(np.asarray(incumbent, dtype=float)), DENOMINATOR_EPS)
    return np.sum((np.atleast_2d(ei_c) / denom) ** 2, axis=1)


def constrained_ei_matrix(surrogates, X, incumbent):
    mean, std = surrogates.objective_moments(X)
    pf = surrogates.probability_of_feasibility(X)
    ei = acq.expected_improvement(mean, std, np.asarray(incumbent)[None, :])
    return ei * pf[:, None]


def select_next_ptmoo(surrogates, data, space, ga, rng, front_restricted=True):
    """Preferred trade-off candidate, or the PF fallback when nothing is feasible yet."""
    pref = preferred_design(data)
    if pref is None:
        return select_next_pf(surrogates, data, space, ga, rng)
    incumbent = data.objectives[pref]
    clamped = [bool(abs(v) < DENOMINATOR_EPS) for v in incumbent]
    last = _LastPopulation()
    if front_restricted:
        pareto = nsga2_maximize(lambda X: constrained_ei_matrix(surrogates, X, incumbent),
                                space, ga, callback=last)
        score_front = ptmoo_scores(pareto.points, incumbent)
        score_pop = ptmoo_scores(last.values, incumbent)
    else:
        pareto = nsga2_maximize(
            lambda X: ptmoo_scores(constrained_ei_matrix(surrogates, X, incumbent), incumbent),
            space, ga, callback=last)
        score_front, score_pop = pareto.points[:, 0], last.values[:, 0]
    cands = _ranked_candidates(pareto, last, score_front, score_pop)
    x, random_draw = _first_new(cands, data, space, rng)
    return x, {"rule": "ptmoo", "random_draw": random_draw, "front_size": len(pareto),
               "best_score": float(score_front.max()) if len(pareto) else 0.0,
               "denominator_clamped": clamped}


def cehvi_front(data, reference="unit"):
    """Normalisation constants, normalised feasible front and reference point."""
    F = data.objectives
    fmin, fmax = F.min(axis=0), F.max(axis=0)
    Fn = acq.normalize_objectives(F, fmin, fmax)
    feas = Fn[data.feasible]
    front = acq.nondominated_staircase(feas, np.full(F.shape[1], np.inf))
    if reference == "unit":
        ref = np.ones(F.shape[1])
    elif reference == "preferred":
        ref = Fn[preferred_design(data)]
    else:
        raise ConfigurationError(f"reference must be 'unit' or 'preferred', got {reference!r}")
    return fmin, fmax, front, ref


def select_next_cehvi(surrogates, data, space, ga, rng, reference="unit"):
    """Maximiser of PF x EHVI, or the PF fallback when nothing is feasible yet."""
    if not data.feasible.any():
        return select_next_pf(surrogates, data, space, ga, rng)
    fmin, fmax, front, ref = cehvi_front(data, reference)
    span = np.where(fmax > fmin, fmax - fmin, 1.0)

    def value(X):
        mean, std = surrogates.objective_moments(X)
        return acq.cehvi((mean - fmin) / span, std / span, surrogates.constraint_stats(X),
                         front, ref)

    last = _LastPopulation()
    pareto = nsga2_maximize(value, space, ga, callback=last)
    cands = _ranked_candidates(pareto, last, pareto.points[:, 0], last.values[:, 0])
    x, random_draw = _first_new(cands, data, space, rng)
    return x, {"rule": "cehvi", "random_draw": random_draw,
               "best_value": float(pareto.points[:, 0].max())}


@dataclass(frozen=True)
class RunConfig:
    problem: str = "bnh"
    strategy: str = "ptmoo"
    surrogate: str = "gpr"
    n_initial: int = 30
    iterations: int = 50
    repetitions: int = 1
    seed: int = 0
    initial_seed: int | None = None   # shared initial sample when set
    sampling: str = "uniform"
    eps2: float = DEFAULT_EPS2
    n_starts: int = 8
    front_restricted: bool = True
    reference: str = "unit"
    ga: GaConfig = field(default_factory=GaConfig)
    problem_options: dict = field(default_factory=dict)
    output_dir: str = "runs"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        kpls_components(self.surrogate)
        if self.n_initial < 2:
            raise ConfigurationError("n_initial must be >= 2")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if not 0.0 < self.eps2 < 1.0:
            raise ConfigurationError("eps2 must lie in (0, 1)")
        if self.reference not in ("unit", "preferred"):
            raise ConfigurationError("reference must be 'unit' or 'preferred'")

    def for_repetition(self, k):
        """Config of repetition ``k``: seed offset by k, initial sample shared if configured."""
        return replace(self, seed=self.seed + k, repetitions=1)

    def as_dict(self):
        d = asdict(self)
        d["ga"] = asdict(self.ga)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("ga"), dict):
            d["ga"] = GaConfig(**d["ga"])
        return cls(**d)


@dataclass
class IterationRecord:
    iteration: int
    row: int | None                 # dataset row added this iteration
    preferred_row: int | None
    wall_time: float
    degraded: bool = False
    selection: dict = field(default_factory=dict)
    models: dict | None = None


@dataclass
class RunTrace:
    """Everything needed to audit or replot a run."""

    config: dict
    problem: str
    n_initial: int
    X: np.ndarray
    objectives: np.ndarray
    constraint_max: np.ndarray        # (N, n_c) max utilisation per constraint
    feasible_by_constraint: np.ndarray
    records: list = field(default_factory=list)
    status: str = "complete"
    backend: str = ""

    @property
    def feasible(self):
        return np.all(self.feasible_by_constraint, axis=1)

    def rows_at(self, iteration):
        return self.n_initial + iteration

    def preferred_rows(self):
        return [r.preferred_row for r in self.records]

    def recomputed_preferred(self, fmin=None, fmax=None):
        """Preferred rows and aggregates per iteration under fixed normalisation.

        The preferred design at iteration N is re-selected among the first
        ``n_initial + N`` rows using ``fmin``/``fmax`` (default: extremes over
        the whole trace). Because the candidate set only grows, the returned
        aggregates are non-increasing. Entries are ``None``/NaN until a
        feasible row exists.
        """
        F = self.objectives
        fmin = F.min(axis=0) if fmin is None else np.asarray(fmin, dtype=float)
        fmax = F.max(axis=0) if fmax is None else np.asarray(fmax, dtype=float)
        scores = np.where(self.feasible, aggregate_scores(F, fmin, fmax), np.inf)
        rows, aggs = [], []
        for rec in self.records:
            n = self.rows_at(rec.iteration)
            if np.isfinite(scores[:n]).any():
                j = int(np.argmin(scores[:n]))
                rows.append(j)
                aggs.append(float(scores[j]))
            else:
                rows.append(None)
                aggs.append(float("nan"))
        return rows, np.array(aggs)

    def to_json_dict(self):
        return {
            "schema_version": 1,
            "config": self.config,
            "problem": self.problem,
            "status": self.status,
            "backend": self.backend,
            "n_initial": self.n_initial,
            "observations": [
                {"row": j, "design": self.X[j].tolist(), "objectives": self.objectives[j].tolist(),
                 "constraint_max": self.constraint_max[j].tolist(),
                 "feasible_by_constraint": [bool(v) for v in self.feasible_by_constraint[j]],
                 "feasible": bool(self.feasible[j])}
                for j in range(self.X.shape[0])],
            "iterations": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_json_dict(cls, d):
        obs = d["observations"]
        n_c = len(obs[0]["constraint_max"]) if obs else 0
        return cls(
            config=d["config"], problem=d["problem"], n_initial=d["n_initial"],
            X=np.array([o["design"] for o in obs], dtype=float),
            objectives=np.array([o["objectives"] for o in obs], dtype=float),
            constraint_max=np.array([o["constraint_max"] for o in obs], dtype=float).reshape(-1, n_c),
            feasible_by_constraint=np.array([o["feasible_by_constraint"] for o in obs],
                                            dtype=bool).reshape(-1, n_c),
            records=[IterationRecord(**r) for r in d["iterations"]],
            status=d.get("status", "complete"), backend=d.get("backend", ""))


class RunAborted(PtmooError):
    """The true problem failed; ``trace`` holds everything up to the failure."""

    def __init__(self, message, trace):
        self.trace = trace
        super().__init__(message)


def initial_design(problem, cfg):
    seed = cfg.seed if cfg.initial_seed is None else cfg.initial_seed
    return lhs(problem.space, cfg.n_initial, _child_seed(seed, 0x1d), cfg.sampling)


def _snapshot(data, problem, cfg, records, status):
    from . import BACKEND
    cmax = np.column_stack([g.max(axis=1) for g in data.constraint_fields]) \
        if data.constraint_fields else np.zeros((data.n, 0))
    return RunTrace(config=cfg.as_dict(), problem=problem.name, n_initial=cfg.n_initial,
                    X=data.X.copy(), objectives=data.objectives.copy(), constraint_max=cmax,
                    feasible_by_constraint=data.feasible_by_constraint.copy(),
                    records=list(records), status=status, backend=BACKEND)


def run_optimization(problem, cfg, record_models=False, on_iteration=None):
    """Run one Bayesian optimisation and return its trace.

    Parameters
    ----------
    problem : Problem
    cfg : RunConfig
    record_models : bool
        Store fitted hyperparameters in each iteration record.
    on_iteration : callable, optional
        Called with the partial trace after every iteration.

    Raises
    ------
    RunAborted
        If evaluating the true problem fails.
    """
    h = kpls_components(cfg.surrogate)
    if h is not None and h > problem.d:
        raise ConfigurationError(f"KPLS h={h} exceeds problem dimension {problem.d}")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xfa11,)))
    t0 = time.perf_counter()
    try:
        data = Dataset.from_evaluations(problem, initial_design(problem, cfg))
    except Exception as exc:
        raise RunAborted(f"initial evaluation failed: {exc}",
                         RunTrace(cfg.as_dict(), problem.name, cfg.n_initial, np.zeros((0, problem.d)),
                                  np.zeros((0, problem.n_f)), np.zeros((0, len(problem.constraints))),
                                  np.zeros((0, len(problem.constraints)), dtype=bool),
                                  status="aborted")) from exc
    records = [IterationRecord(0, None, preferred_design(data), time.perf_counter() - t0)]
    if on_iteration is not None:
        on_iteration(_snapshot(data, problem, cfg, records, "running"))

    for it in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        ga = replace(cfg.ga, seed=_child_seed(cfg.seed, 0x9a, it))
        degraded = False
        models = None
        try:
            surrogates = fit_surrogates(data, problem, cfg.surrogate, cfg.eps2, cfg.n_starts,
                                        _child_seed(cfg.seed, 0x6e, it))
            models = surrogates.record() if record_models else None
            if cfg.strategy == "ptmoo":
                x, info = select_next_ptmoo(surrogates, data, problem.space, ga, rng,
                                            cfg.front_restricted)
            else:
                x, info = select_next_cehvi(surrogates, data, problem.space, ga, rng, cfg.reference)
        except (PtmooError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("iteration %d degraded: %s", it, exc)
            degraded = True
            x, info = _degraded_candidate(data, problem, cfg, ga, rng, exc)
        x = problem.space.clip(x)
        try:
            data.append(problem, x)
        except Exception as exc:
            trace = _snapshot(data, problem, cfg, records, "aborted")
            raise RunAborted(f"evaluation failed at iteration {it}: {exc}", trace) from exc
        records.append(IterationRecord(it, data.n - 1, preferred_design(data),
                                       time.perf_counter() - t0, degraded, info, models))
        if on_iteration is not None:
            on_iteration(_snapshot(data, problem, cfg, records, "running"))
    return _snapshot(data, problem, cfg, records, "complete")


def _degraded_candidate(data, problem, cfg, ga, rng, exc):
    try:
        constraint_models = tuple(
            fit_field(data.X, data.constraint_fields[i].T, cfg.eps2, c.limit,
                      gp.FitConfig(n_starts=cfg.n_starts), bounds=problem.space)
            for i, c in enumerate(problem.constraints))
        x, info = select_next_pf(Surrogates((), constraint_models), data, problem.space, ga, rng)
    except (PtmooError, np.linalg.LinAlgError, FloatingPointError):
        x, info = problem.space.denormalize(rng.random(problem.d)), {"rule": "random"}
    info["error"] = str(exc)
    return x, info
