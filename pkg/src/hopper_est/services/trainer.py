"""Offline genetic-algorithm training of estimator parameters.

Candidates are plain vectors over ``trainable_params(kind)``; everything not
in the vector comes from a base ``EstimatorParams``. Fitness is the apex
cost of replaying every trial of a dataset.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..models import (
    CostBreakdown,
    EstimatorParams,
    EventKind,
    FilterKind,
    GaConfig,
    HpeConfig,
    PARAM_BOUNDS,
    PARAM_NAMES,
    RobotParams,
)
from ..utils.results import BatchFailure, require_outputs
from .dataset import DataError, Dataset
from .dynamics import detect_true_transitions
from .estimator import replay
from .hvse import EstimatorFault, trainable_params
from .runner import RunnerError, run_batch

logger = logging.getLogger(__name__)

APEX_WEIGHT = 100.0
TRACKING_WEIGHT = 10.0
MAX_HALVINGS = 10

# stream tags for per-individual generators
_INIT, _SELECT, _CROSS, _MUTATE = 0, 1, 2, 3


@dataclass(frozen=True, slots=True)
class TrainingProblem:
    """Everything a cost evaluation needs besides the candidate vector."""

    dataset: Dataset
    kind: FilterKind
    names: tuple[str, ...]
    base: EstimatorParams = field(default_factory=EstimatorParams)
    robot: RobotParams = field(default_factory=RobotParams)
    hpe_config: HpeConfig = field(default_factory=HpeConfig)

    def params(self, vector: Sequence[float]) -> EstimatorParams:
        return self.base.with_vector(self.names, vector)


@dataclass(frozen=True, slots=True)
class GaResult:
    best: EstimatorParams
    best_cost: CostBreakdown
    names: tuple[str, ...]
    history: list[dict[str, float]]


def combine_cost(
    gamma1: float, gamma2: float, gamma3: float, n_ha: int, n_ha_true: int
) -> CostBreakdown:
    """Apex error when the apex counts agree, tracking error otherwise."""
    if n_ha == n_ha_true:
        L_c = APEX_WEIGHT * gamma1
    else:
        L_c = TRACKING_WEIGHT * gamma2 + TRACKING_WEIGHT * gamma3
    return CostBreakdown(
        L_c=L_c, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, n_ha=n_ha, n_ha_true=n_ha_true
    )


def _faulted(n_ha_true: int) -> CostBreakdown:
    return CostBreakdown(
        L_c=math.inf, gamma1=math.inf, gamma2=math.inf, gamma3=math.inf, n_ha=0, n_ha_true=n_ha_true
    )


def evaluate_cost(
    params: EstimatorParams,
    ds: Dataset,
    filter_kind: FilterKind,
    robot: RobotParams | None = None,
    hpe_config: HpeConfig | None = None,
) -> CostBreakdown:
    """Replay every trial and score the estimated apexes.

    Apexes are paired in order within each trial, up to the smaller of the
    estimated and true counts. A candidate that drives the filter into a
    numerical fault gets an infinite cost.

    Raises:
        DataError: If the dataset holds no true apex
    """
    rp = robot or RobotParams()
    true_apexes = [
        [tr for tr in detect_true_transitions(log) if tr.kind is EventKind.HA] for log in ds.trials
    ]
    n_ha_true = sum(len(apexes) for apexes in true_apexes)
    if n_ha_true == 0:
        raise DataError("Dataset contains no true apex", code="empty_dataset")

    ape: list[float] = []
    sq_z = 0.0
    sq_v = 0.0
    n_samples = 0
    n_ha = 0
    for log, apexes in zip(ds.trials, true_apexes, strict=True):
        try:
            trace = replay(log, params, filter_kind, rp, hpe_config=hpe_config)
        except EstimatorFault as e:
            logger.debug("Candidate faulted on %s: %s", log.name, e)
            return _faulted(n_ha_true)
        if not (np.all(np.isfinite(trace.z_est)) and np.all(np.isfinite(trace.v_est))):
            return _faulted(n_ha_true)
        est_apexes = trace.event_indices(EventKind.HA)
        n_ha += len(est_apexes)
        for est_idx, tr in zip(est_apexes, apexes, strict=False):
            ape.append(abs(trace.z_est[est_idx] - tr.z) / abs(tr.z))
        sq_z += float(np.sum((trace.z_est - log.z_true) ** 2))
        sq_v += float(np.sum((trace.v_est - log.v_true) ** 2))
        n_samples += len(log)

    # no matched apex counts as a full miss
    gamma1 = float(np.mean(ape)) if ape else 1.0
    gamma2 = math.sqrt(sq_z / n_samples)
    gamma3 = math.sqrt(sq_v / n_samples)
    return combine_cost(gamma1, gamma2, gamma3, n_ha, n_ha_true)


def _cost_worker(problem: TrainingProblem, vector: tuple[float, ...]) -> dict[str, float]:
    cost = evaluate_cost(
        problem.params(vector), problem.dataset, problem.kind, problem.robot, problem.hpe_config
    )
    return cost.model_dump()


def rank_weights(costs: Sequence[float]) -> np.ndarray:
    """Linear rank weights: 2 for the best, 1 for the worst."""
    c = np.asarray(costs, dtype=float)
    n = len(c)
    if n == 1:
        return np.ones(1)
    order = np.argsort(c, kind="stable")
    weights = np.empty(n)
    weights[order] = 2.0 - np.arange(n) / (n - 1)
    return weights


def sus_select(weights: Sequence[float], n_parents: int, rng: np.random.Generator) -> np.ndarray:
    """Stochastic universal sampling.

    Places ``n_parents`` equally spaced pointers over the cumulative weights
    after a single random offset, so each index is picked within one of its
    expected count. All-zero weights select uniformly.

    Raises:
        ValueError: On negative or non-finite weights
    """
    w = np.asarray(weights, dtype=float)
    if len(w) == 0 or n_parents < 1:
        raise ValueError("Selection needs at least one weight and one parent")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("Selection weights must be finite and non-negative")
    total = float(w.sum())
    if total <= 0.0:
        w = np.ones_like(w)
        total = float(len(w))
    step = total / n_parents
    pointers = rng.uniform(0.0, step) + step * np.arange(n_parents)
    idx = np.searchsorted(np.cumsum(w), pointers, side="right")
    return np.minimum(idx, len(w) - 1)


def _crossover_vectors(x1: np.ndarray, x2: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, x1, x2)


def crossover_uniform_scatter(
    p1: EstimatorParams,
    p2: EstimatorParams,
    rng: np.random.Generator,
    names: tuple[str, ...] = PARAM_NAMES,
    mask: Sequence[bool] | None = None,
) -> EstimatorParams:
    """Child taking each named parameter from ``p1`` where the mask is set, else ``p2``."""
    x1 = np.asarray(p1.vector(names))
    x2 = np.asarray(p2.vector(names))
    m = rng.integers(0, 2, len(names)).astype(bool) if mask is None else np.asarray(mask, bool)
    if m.shape != x1.shape:
        raise ValueError(f"Mask length {m.size} does not match {len(names)} parameters")
    return p1.with_vector(names, _crossover_vectors(x1, x2, m))


def _mutate_vector(
    x: np.ndarray,
    generation: int,
    cfg: GaConfig,
    rng: np.random.Generator,
    lo: np.ndarray,
    hi: np.ndarray,
    d: np.ndarray | None = None,
    alpha0: float | None = None,
) -> np.ndarray:
    if d is None:
        d = rng.standard_normal(len(x))
        while not np.any(d):
            d = rng.standard_normal(len(x))
    d = np.asarray(d, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("Mutation direction must be non-zero")
    scale = (cfg.alpha0 * (hi - lo)) if alpha0 is None else alpha0
    step = scale * math.exp(generation / cfg.generations) * d / norm

    halvings = 0
    while np.any((x + step < lo) | (x + step > hi)) and halvings < MAX_HALVINGS:
        step = step / 2.0
        halvings += 1
    return np.clip(x + step, lo, hi)


def mutate_adaptive(
    x: EstimatorParams,
    generation: int,
    cfg: GaConfig,
    rng: np.random.Generator,
    names: tuple[str, ...] = PARAM_NAMES,
    d: Sequence[float] | None = None,
    alpha0: float | None = None,
) -> EstimatorParams:
    """Step along a random unit direction with a step growing by exp(gen/generations).

    Without ``alpha0`` the step is ``cfg.alpha0`` times each parameter's
    bound range; an explicit ``alpha0`` is an absolute step. An out-of-bounds
    step is halved up to ten times and then clamped.
    """
    lo = np.array([cfg.bounds_for(n)[0] for n in names])
    hi = np.array([cfg.bounds_for(n)[1] for n in names])
    vec = _mutate_vector(
        np.asarray(x.vector(names)),
        generation,
        cfg,
        rng,
        lo,
        hi,
        None if d is None else np.asarray(d, dtype=float),
        alpha0,
    )
    return x.with_vector(names, vec)


def _evaluate_population(
    population: np.ndarray,
    problem: TrainingProblem,
    cache: dict[tuple[float, ...], CostBreakdown],
    generation: int,
    workers: int,
) -> list[CostBreakdown]:
    keys = [tuple(float(v) for v in row) for row in population]
    pending: dict[str, tuple[float, ...]] = {}
    for idx, key in enumerate(keys):
        if key not in cache and key not in pending.values():
            pending[f"g{generation}_i{idx}"] = key
    if pending:
        raw = run_batch(
            _cost_worker, pending, shared=problem, workers=workers, label=f"generation {generation}"
        )
        try:
            outputs = require_outputs(raw)
        except BatchFailure as e:
            raise RunnerError(f"Cost evaluation failed: {e}", code=e.code) from e
        for item, key in pending.items():
            cache[key] = CostBreakdown.model_validate(outputs[item])
    return [cache[key] for key in keys]


def run_ga(
    cfg: GaConfig,
    ds: Dataset,
    filter_kind: FilterKind,
    *,
    base: EstimatorParams | None = None,
    robot: RobotParams | None = None,
    hpe_config: HpeConfig | None = None,
    names: tuple[str, ...] | None = None,
    workers: int = 1,
) -> GaResult:
    """Minimize the apex cost over ``ds`` with elitism, crossover and mutation.

    Each generation keeps the best ``elite_frac`` of the population, adds
    ``mutation_frac`` adaptive mutants and fills the rest by uniform scatter
    crossover of SUS-selected parents. The same seed and dataset give
    the same result regardless of ``workers``.

    Returns:
        GaResult with the best candidate ever evaluated and one history row
        per generation
    """
    names = names or trainable_params(filter_kind)
    problem = TrainingProblem(
        dataset=ds,
        kind=filter_kind,
        names=names,
        base=base or EstimatorParams(),
        robot=robot or RobotParams(),
        hpe_config=hpe_config or HpeConfig(),
    )
    if not ds.trials:
        raise DataError("Training dataset is empty", code="empty_dataset")

    lo = np.array([cfg.bounds_for(n)[0] for n in names])
    hi = np.array([cfg.bounds_for(n)[1] for n in names])
    N = cfg.population
    n_elite, n_cross, n_mut = cfg.composition()
    logger.info(
        "GA on %s: %d params, population %d (%d elite, %d crossover, %d mutation), %d generations",
        filter_kind,
        len(names),
        N,
        n_elite,
        n_cross,
        n_mut,
        cfg.generations,
    )

    population = np.random.default_rng([cfg.seed, 0, 0, _INIT]).uniform(lo, hi, (N, len(names)))
    cache: dict[tuple[float, ...], CostBreakdown] = {}
    history: list[dict[str, float]] = []
    best_vec: np.ndarray | None = None
    best_cost: CostBreakdown | None = None

    for gen in range(cfg.generations):
        costs = _evaluate_population(population, problem, cache, gen, workers)
        values = np.array([c.L_c for c in costs])
        order = np.argsort(values, kind="stable")
        top = int(order[0])
        if best_cost is None or costs[top].L_c < best_cost.L_c:
            best_cost = costs[top]
            best_vec = population[top].copy()

        finite = values[np.isfinite(values)]
        history.append(
            {
                "generation": gen,
                "best_cost": float(values[top]),
                "mean_cost": float(np.mean(finite)) if finite.size else math.inf,
                "median_cost": float(np.median(finite)) if finite.size else math.inf,
                "best_ever_cost": best_cost.L_c,
                "evaluations": len(cache),
            }
        )
        logger.info(
            "Generation %d: best %.4f, mean %.4f, cache %d",
            gen,
            history[-1]["best_cost"],
            history[-1]["mean_cost"],
            len(cache),
        )
        if gen == cfg.generations - 1:
            break

        select_rng = np.random.default_rng([cfg.seed, gen, 0, _SELECT])
        parents = sus_select(rank_weights(values), 2 * n_cross + n_mut, select_rng)
        parents = parents[select_rng.permutation(len(parents))]

        children = np.empty((n_cross, len(names)))
        for j in range(n_cross):
            rng = np.random.default_rng([cfg.seed, gen + 1, j, _CROSS])
            mask = rng.integers(0, 2, len(names)).astype(bool)
            children[j] = _crossover_vectors(
                population[parents[2 * j]], population[parents[2 * j + 1]], mask
            )
        mutants = np.empty((n_mut, len(names)))
        for j in range(n_mut):
            rng = np.random.default_rng([cfg.seed, gen + 1, n_cross + j, _MUTATE])
            mutants[j] = _mutate_vector(population[parents[2 * n_cross + j]], gen, cfg, rng, lo, hi)

        population = np.vstack([population[order[:n_elite]], children, mutants])

    assert best_vec is not None and best_cost is not None
    return GaResult(
        best=problem.params(best_vec), best_cost=best_cost, names=names, history=history
    )


def sensitivity_sweep(
    params: EstimatorParams,
    ds: Dataset,
    filter_kind: FilterKind,
    fractions: Sequence[float] = (-0.1, 0.1),
    *,
    names: tuple[str, ...] | None = None,
    robot: RobotParams | None = None,
    hpe_config: HpeConfig | None = None,
    workers: int = 1,
) -> list[dict[str, float | str]]:
    """Relative cost change for one-at-a-time parameter perturbations.

    A parameter is moved by ``fraction`` of its value (of its bound range
    when the value is zero) and clamped to its bounds. ``sensitivity`` is
    the relative cost change over the relative parameter change.
    """
    names = names or trainable_params(filter_kind)
    problem = TrainingProblem(
        dataset=ds,
        kind=filter_kind,
        names=names,
        base=params,
        robot=robot or RobotParams(),
        hpe_config=hpe_config or HpeConfig(),
    )
    base_vec = np.asarray(params.vector(names), dtype=float)
    items: dict[str, tuple[float, ...]] = {"base": tuple(base_vec)}
    meta: dict[str, tuple[str, float, float, float]] = {}
    for k, name in enumerate(names):
        lo, hi = PARAM_BOUNDS[name]
        value = float(base_vec[k])
        scale = abs(value) if value != 0.0 else hi - lo
        for fraction in fractions:
            perturbed = float(np.clip(value + fraction * scale, lo, hi))
            vec = base_vec.copy()
            vec[k] = perturbed
            key = f"{name}@{fraction:+g}"
            items[key] = tuple(vec)
            meta[key] = (name, fraction, perturbed, (perturbed - value) / scale)

    try:
        outputs = require_outputs(
            run_batch(_cost_worker, items, shared=problem, workers=workers, label="sensitivity")
        )
    except BatchFailure as e:
        raise RunnerError(f"Sensitivity evaluation failed: {e}", code=e.code) from e

    base_cost = float(outputs["base"]["L_c"])
    rows: list[dict[str, float | str]] = []
    for key, (name, fraction, perturbed, rel_param) in meta.items():
        cost = float(outputs[key]["L_c"])
        if base_cost > 0.0 and math.isfinite(base_cost) and math.isfinite(cost):
            rel_cost = (cost - base_cost) / base_cost
        else:
            rel_cost = math.nan
        rows.append(
            {
                "param": name,
                "fraction": fraction,
                "value": perturbed,
                "base_cost": base_cost,
                "cost": cost,
                "pct_cost_change": 100.0 * rel_cost,
                "sensitivity": rel_cost / rel_param if rel_param != 0.0 else math.nan,
            }
        )
    return rows


__all__: list[str] = [
    "GaResult",
    "TrainingProblem",
    "combine_cost",
    "crossover_uniform_scatter",
    "evaluate_cost",
    "mutate_adaptive",
    "rank_weights",
    "run_ga",
    "sensitivity_sweep",
    "sus_select",
]
