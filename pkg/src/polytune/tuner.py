"""The tuning loop: sample, evaluate, fit, perturb, optimize, repeat.

Each iteration tops up the elite archive on every instance visited so far,
fits a penalized polynomial surface to all summary scores, maximizes the
fitted surface plus several coefficient-perturbed copies, and evaluates
the resulting candidates. Elites are the best-scoring configurations under
the newest archive snapshot. The loop runs while the full cost of the next
iteration still fits in the evaluation budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .evaluation import (
    EvaluationError,
    EvaluatorBinding,
    PerformanceArchive,
    evaluate_batch,
    summarize_all,
)
from .regression import (
    PolynomialBasis,
    RegressionModel,
    expand_design,
    fit_model,
    loo_standard_errors,
    perturb_model,
    select_lambda_cv,
)
from .sampling import InstanceDescriptor, InstancePool, lhs_sample, sample_instances
from .search import SimplexSettings, maximize_surface, nudge_apart
from .space import Configuration, ParameterSpace

SEED_BOUND = 2**31 - 1

STOP_BUDGET = "budget"
STOP_MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class TunerSettings:
    """Loop-shape knobs; defaults match the reference setup."""

    initial_configs: int = 100
    configs_per_iteration: int = 10
    initial_instances: int = 5
    instances_per_iteration: int = 1
    elite_size: int = 10
    budget: int = 1000
    basis_order: int = 4
    penalty_order: int = 1
    cv_folds: int = 5
    seed: int = 0
    max_iterations: int | None = None

    def __post_init__(self) -> None:
        if self.initial_configs < 1:
            raise ValueError("initial_configs must be >= 1")
        if self.configs_per_iteration < 1:
            raise ValueError("configs_per_iteration must be >= 1")
        if self.initial_instances < 1:
            raise ValueError("initial_instances must be >= 1")
        if not 0 <= self.instances_per_iteration <= self.initial_instances:
            raise ValueError(
                "instances_per_iteration must be in [0, initial_instances]"
            )
        if self.elite_size < 1:
            raise ValueError("elite_size must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.basis_order < 1:
            raise ValueError("basis_order must be >= 1")
        if self.penalty_order not in (1, 2):
            raise ValueError("penalty_order must be 1 or 2")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


def minimum_budget(settings: TunerSettings, runs_per_pair: int) -> int:
    """Observations the initialization alone will store."""
    startup_instances = max(
        1, settings.initial_instances - settings.instances_per_iteration
    )
    return settings.initial_configs * startup_instances * runs_per_pair


@dataclass
class TunerState:
    """Mutable loop state shared between the driver and the stop check."""

    iteration: int
    configs: list[Configuration]
    elites: list[Configuration]
    pool: InstancePool
    visited: list[InstanceDescriptor]
    archive: PerformanceArchive


@dataclass(frozen=True)
class IterationRecord:
    """One trace row; model fields are None for the initialization row."""

    iteration: int
    evaluations_used: int
    best_performance: float | None
    lam: float | None
    support_size: int | None
    elite_ids: tuple[int, ...]
    model_rows: int | None = None


@dataclass
class TunerResult:
    """Everything a finished run reports."""

    elites: list[tuple[Configuration, float]]
    final_model: RegressionModel | None
    configs: list[Configuration]
    archive: PerformanceArchive
    trace: list[IterationRecord]
    stop_reason: str
    settings: TunerSettings
    space: ParameterSpace

    @property
    def evaluations_used(self) -> int:
        return self.archive.evaluation_count

    @property
    def iterations(self) -> int:
        return max(record.iteration for record in self.trace) if self.trace else 0


class TunerAbort(RuntimeError):
    """A run died mid-flight; carries the partial state for flushing."""

    def __init__(
        self,
        detail: str,
        configs: list[Configuration],
        archive: PerformanceArchive,
        trace: list[IterationRecord],
    ):
        super().__init__(detail)
        self.configs = configs
        self.archive = archive
        self.trace = trace


def select_k_best(
    configs: Sequence[Configuration],
    performances: dict[int, float],
    archive: PerformanceArchive,
    k: int,
) -> list[Configuration]:
    """Top-k configurations by summary score.

    Ties break toward the configuration evaluated on more instances, then
    toward the smaller (older) id.
    """
    ranked = sorted(
        configs,
        key=lambda c: (
            -performances[c.id],
            -len(archive.instances_evaluated(c.id)),
            c.id,
        ),
    )
    return ranked[:k]


def next_iteration_cost(state: TunerState, settings: TunerSettings) -> int:
    """Observations the next iteration would store, in full."""
    fresh = min(settings.instances_per_iteration, state.pool.remaining)
    total_instances = len(state.visited) + fresh
    topup_pairs = sum(
        total_instances - len(state.archive.instances_evaluated(elite.id))
        for elite in state.elites
    )
    candidate_pairs = settings.configs_per_iteration * total_instances
    return (topup_pairs + candidate_pairs) * state.archive.runs_per_pair


def check_stop(state: TunerState, settings: TunerSettings) -> str | None:
    """Reason to stop before the next iteration, or None to continue.

    Instance-pool exhaustion alone never stops the run; the fresh-instance
    draw just truncates to whatever remains.
    """
    if (
        settings.max_iterations is not None
        and state.iteration >= settings.max_iterations
    ):
        return STOP_MAX_ITERATIONS
    remaining = state.archive.remaining_budget
    if remaining is not None and next_iteration_cost(state, settings) > remaining:
        return STOP_BUDGET
    return None


def _draw_seeds(rng: np.random.Generator, count: int) -> list[tuple[int, int]]:
    """Pre-draw (seed, retry_seed) per task so retries never shift the stream."""
    flat = rng.integers(0, SEED_BOUND, size=2 * count)
    return [(int(flat[2 * i]), int(flat[2 * i + 1])) for i in range(count)]


def _evaluate_pairs(
    state: TunerState,
    space: ParameterSpace,
    binding: EvaluatorBinding,
    pairs: list[tuple[Configuration, InstanceDescriptor]],
    rng_seeds: np.random.Generator,
    jobs: int,
) -> None:
    """Evaluate runs_per_pair observations for every (config, instance) pair."""
    if not pairs:
        return
    tasks = []
    repeats = state.archive.runs_per_pair
    seeds = _draw_seeds(rng_seeds, len(pairs) * repeats)
    for index, (config, instance) in enumerate(pairs):
        for r in range(repeats):
            seed, retry_seed = seeds[index * repeats + r]
            tasks.append((config, instance, seed, retry_seed))
    evaluate_batch(state.archive, space, binding, tasks, jobs=jobs)


def _fit_surface(
    configs: Sequence[Configuration],
    performances: dict[int, float],
    basis: PolynomialBasis,
    settings: TunerSettings,
) -> RegressionModel:
    """CV-tuned penalized fit with leave-one-out errors filled in."""
    X = expand_design([c.unit for c in configs], basis)
    y = np.array([performances[c.id] for c in configs])
    lam = select_lambda_cv(X, y, settings.cv_folds, settings.penalty_order)
    model = fit_model(X, y, lam, settings.penalty_order, basis)
    errors, intercept_error = loo_standard_errors(X, y, model)
    return replace(model, standard_errors=errors, intercept_se=intercept_error)


def _propose_candidates(
    model: RegressionModel,
    start: np.ndarray,
    existing: np.ndarray,
    settings: TunerSettings,
    simplex: SimplexSettings,
    rng_perturb: np.random.Generator,
    rng_jitter: np.random.Generator,
) -> list[np.ndarray]:
    """Optimize the fitted surface and perturbed copies; keep points distinct."""
    proposals: list[np.ndarray] = []
    for j in range(settings.configs_per_iteration):
        surface = model if j == 0 else perturb_model(model, rng_perturb)
        point = maximize_surface(surface.predict, start, simplex)
        taken = (
            np.vstack([existing] + [p[None, :] for p in proposals])
            if proposals
            else existing
        )
        proposals.append(nudge_apart(point, taken, rng_jitter))
    return proposals


def run_tuner(
    space: ParameterSpace,
    pool: InstancePool,
    binding: EvaluatorBinding,
    settings: TunerSettings,
    jobs: int = 1,
) -> TunerResult:
    """Run the full tuning loop.

    Args:
        space: the parameter space to search.
        pool: instances to tune on; drawn from without replacement.
        binding: how to evaluate (configuration, instance) pairs.
        settings: loop-shape knobs.
        jobs: evaluator invocations to run concurrently.

    Returns:
        TunerResult with elites, the final fitted surface, the full
        archive, and the per-iteration trace.

    Raises:
        TunerAbort: an evaluation failed twice; partial state attached.
    """
    k = space.k
    if settings.initial_configs < k + 2:
        raise ValueError(
            f"initial_configs must be >= k + 2 = {k + 2} to fit a surface, "
            f"got {settings.initial_configs}"
        )
    floor = minimum_budget(settings, binding.runs_per_pair)
    if settings.budget < floor:
        raise ValueError(
            f"budget {settings.budget} cannot cover initialization; "
            f"need at least {floor}"
        )
    startup_instances = settings.initial_instances - settings.instances_per_iteration
    if startup_instances == 0 and (
        settings.instances_per_iteration == 0 or pool.remaining == 0
    ):
        raise ValueError("initialization would evaluate no instances")

    streams = np.random.SeedSequence(settings.seed).spawn(5)
    rng_lhs = np.random.default_rng(streams[0])
    rng_instances = np.random.default_rng(streams[1])
    rng_seeds = np.random.default_rng(streams[2])
    rng_perturb = np.random.default_rng(streams[3])
    rng_jitter = np.random.default_rng(streams[4])

    archive = PerformanceArchive(binding.runs_per_pair, settings.budget)
    basis = PolynomialBasis.create(k, settings.basis_order)
    simplex = SimplexSettings()

    points = lhs_sample(k, settings.initial_configs, rng_lhs)
    configs = [
        Configuration.from_unit(i, points[i], space, "initial-sample", 0)
        for i in range(settings.initial_configs)
    ]
    startup, _ = sample_instances(pool, startup_instances, rng_instances)
    state = TunerState(
        iteration=0,
        configs=configs,
        elites=list(configs),
        pool=pool,
        visited=list(startup),
        archive=archive,
    )
    trace: list[IterationRecord] = []

    try:
        _evaluate_pairs(
            state,
            space,
            binding,
            [(c, inst) for c in configs for inst in state.visited],
            rng_seeds,
            jobs,
        )
        performances = summarize_all(archive)
        trace.append(
            IterationRecord(
                iteration=0,
                evaluations_used=archive.evaluation_count,
                best_performance=max(performances.values()) if performances else None,
                lam=None,
                support_size=None,
                elite_ids=tuple(c.id for c in state.elites),
            )
        )

        while check_stop(state, settings) is None:
            state.iteration += 1
            fresh, _ = sample_instances(
                pool, settings.instances_per_iteration, rng_instances
            )
            state.visited.extend(fresh)

            topup = [
                (elite, inst)
                for elite in state.elites
                for inst in state.visited
                if archive.runs(elite.id, inst.id) == 0
            ]
            _evaluate_pairs(state, space, binding, topup, rng_seeds, jobs)

            performances = summarize_all(archive)
            model_rows = len(state.configs)
            model = _fit_surface(state.configs, performances, basis, settings)

            start = select_k_best(state.configs, performances, archive, 1)[0].unit
            existing = np.array([c.unit for c in state.configs])
            proposals = _propose_candidates(
                model, start, existing, settings, simplex, rng_perturb, rng_jitter
            )
            candidates = [
                Configuration.from_unit(
                    len(state.configs) + j,
                    point,
                    space,
                    "surface-optimum",
                    state.iteration,
                )
                for j, point in enumerate(proposals)
            ]
            _evaluate_pairs(
                state,
                space,
                binding,
                [(c, inst) for c in candidates for inst in state.visited],
                rng_seeds,
                jobs,
            )
            state.configs.extend(candidates)

            performances = summarize_all(archive)
            state.elites = select_k_best(
                state.configs, performances, archive, settings.elite_size
            )
            trace.append(
                IterationRecord(
                    iteration=state.iteration,
                    evaluations_used=archive.evaluation_count,
                    best_performance=performances[state.elites[0].id],
                    lam=model.lam,
                    support_size=model.support_size,
                    elite_ids=tuple(c.id for c in state.elites),
                    model_rows=model_rows,
                )
            )
    except EvaluationError as err:
        raise TunerAbort(str(err), state.configs, archive, trace) from err

    stop_reason = check_stop(state, settings) or STOP_BUDGET
    performances = summarize_all(archive)
    scored = [c for c in state.configs if c.id in performances]
    elites = select_k_best(scored, performances, archive, settings.elite_size)

    final_model: RegressionModel | None = None
    if len(scored) >= 2:
        final_model = _fit_surface(scored, performances, basis, settings)

    return TunerResult(
        elites=[(c, performances[c.id]) for c in elites],
        final_model=final_model,
        configs=state.configs,
        archive=archive,
        trace=trace,
        stop_reason=stop_reason,
        settings=settings,
        space=space,
    )


def run_random_search(
    space: ParameterSpace,
    pool: InstancePool,
    binding: EvaluatorBinding,
    settings: TunerSettings,
    jobs: int = 1,
) -> TunerResult:
    """Budget-matched baseline: one large space-filling sample, no modeling.

    Draws initial_instances instances once, spends the whole budget on a
    single Latin hypercube sample, and reports elites the same way the
    tuner does. Uses the same stream layout, so a seed pins the baseline
    and the tuner run independently.
    """
    streams = np.random.SeedSequence(settings.seed).spawn(5)
    rng_lhs = np.random.default_rng(streams[0])
    rng_instances = np.random.default_rng(streams[1])
    rng_seeds = np.random.default_rng(streams[2])

    instances, _ = sample_instances(pool, settings.initial_instances, rng_instances)
    if not instances:
        raise ValueError("instance pool is empty")
    per_config = len(instances) * binding.runs_per_pair
    count = settings.budget // per_config
    if count < 1:
        raise ValueError(
            f"budget {settings.budget} cannot cover one configuration "
            f"({per_config} observations)"
        )

    archive = PerformanceArchive(binding.runs_per_pair, settings.budget)
    points = lhs_sample(k=space.k, count=count, rng=rng_lhs)
    configs = [
        Configuration.from_unit(i, points[i], space, "initial-sample", 0)
        for i in range(count)
    ]
    state = TunerState(0, configs, list(configs), pool, list(instances), archive)
    try:
        _evaluate_pairs(
            state,
            space,
            binding,
            [(c, inst) for c in configs for inst in instances],
            rng_seeds,
            jobs,
        )
    except EvaluationError as err:
        raise TunerAbort(str(err), configs, archive, []) from err

    performances = summarize_all(archive)
    elites = select_k_best(configs, performances, archive, settings.elite_size)
    trace = [
        IterationRecord(
            iteration=0,
            evaluations_used=archive.evaluation_count,
            best_performance=performances[elites[0].id],
            lam=None,
            support_size=None,
            elite_ids=tuple(c.id for c in elites),
        )
    ]
    return TunerResult(
        elites=[(c, performances[c.id]) for c in elites],
        final_model=None,
        configs=configs,
        archive=archive,
        trace=trace,
        stop_reason=STOP_BUDGET,
        settings=settings,
        space=space,
    )
