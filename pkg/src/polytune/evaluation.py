"""Evaluator bindings, the observation archive, and quality summaries.

Raw indicator values are canonicalized to larger-is-better the moment they
enter the archive. Per instance, per-configuration means are rescaled to
[0, 1] using the spread observed so far across configurations; a
configuration's summary score is the median of its per-instance rescaled
values. Summaries are recomputed from the live archive on every call
because those rescaling bounds move as observations arrive.
"""

from __future__ import annotations

import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import fmean, median
from typing import Sequence

import numpy as np

from .sampling import InstanceDescriptor
from .space import Configuration, ParameterSpace

KIND_EXTERNAL = "external-command"
KIND_BUILTIN = "builtin-synthetic"
SENSE_MAXIMIZE = "maximize"
SENSE_MINIMIZE = "minimize"
TESTBED_SPHERE = "sphere"
TESTBED_INTERACTION = "interaction"

DEFAULT_TIMEOUT = 3600.0


class EvaluationError(RuntimeError):
    """An evaluator invocation failed twice for the same (config, instance)."""

    def __init__(self, config_id: int, instance_id: str, detail: str):
        super().__init__(
            f"evaluation failed for configuration {config_id} on instance "
            f"{instance_id!r}: {detail}"
        )
        self.config_id = config_id
        self.instance_id = instance_id
        self.detail = detail


@dataclass(frozen=True)
class EvaluatorBinding:
    """How to obtain a raw quality value for a (configuration, instance) pair."""

    kind: str = KIND_BUILTIN
    sense: str = SENSE_MAXIMIZE
    runs_per_pair: int = 1
    command: tuple[str, ...] = ()
    timeout: float = DEFAULT_TIMEOUT
    testbed: str = TESTBED_SPHERE
    noise_sd: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (KIND_EXTERNAL, KIND_BUILTIN):
            raise ValueError(f"unknown evaluator kind {self.kind!r}")
        if self.sense not in (SENSE_MAXIMIZE, SENSE_MINIMIZE):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.runs_per_pair < 1:
            raise ValueError(f"runs_per_pair must be >= 1, got {self.runs_per_pair}")
        object.__setattr__(self, "command", tuple(self.command))
        if self.kind == KIND_EXTERNAL and not self.command:
            raise ValueError("external-command evaluator needs a non-empty command")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.kind == KIND_BUILTIN and self.testbed not in (
            TESTBED_SPHERE,
            TESTBED_INTERACTION,
        ):
            raise ValueError(f"unknown testbed {self.testbed!r}")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class Observation:
    """One stored evaluator result, already canonicalized to larger-is-better."""

    config_id: int
    instance_id: str
    seed: int
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"observation value must be finite, got {self.value}")


class BudgetExhausted(RuntimeError):
    """Recording would exceed the run's total evaluation budget."""


class PerformanceArchive:
    """Append-only store of observations keyed by (configuration, instance)."""

    def __init__(self, runs_per_pair: int = 1, budget: int | None = None):
        if runs_per_pair < 1:
            raise ValueError(f"runs_per_pair must be >= 1, got {runs_per_pair}")
        if budget is not None and budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.runs_per_pair = runs_per_pair
        self.budget = budget
        self._observations: list[Observation] = []
        self._pairs: dict[tuple[int, str], list[float]] = {}
        self._by_instance: dict[str, dict[int, list[float]]] = {}
        self._by_config: dict[int, list[str]] = {}

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(self._observations)

    @property
    def evaluation_count(self) -> int:
        return len(self._observations)

    @property
    def remaining_budget(self) -> int | None:
        if self.budget is None:
            return None
        return self.budget - self.evaluation_count

    def record(self, observation: Observation) -> None:
        """Store one observation; rejects budget and per-pair-cap overruns."""
        if self.budget is not None and self.evaluation_count >= self.budget:
            raise BudgetExhausted(
                f"budget of {self.budget} observations already spent"
            )
        key = (observation.config_id, observation.instance_id)
        values = self._pairs.setdefault(key, [])
        if len(values) >= self.runs_per_pair:
            raise ValueError(
                f"pair (config {key[0]}, instance {key[1]!r}) already has "
                f"{self.runs_per_pair} runs"
            )
        values.append(observation.value)
        self._observations.append(observation)
        column = self._by_instance.setdefault(observation.instance_id, {})
        column.setdefault(observation.config_id, []).append(observation.value)
        instances = self._by_config.setdefault(observation.config_id, [])
        if observation.instance_id not in instances:
            instances.append(observation.instance_id)

    def runs(self, config_id: int, instance_id: str) -> int:
        return len(self._pairs.get((config_id, instance_id), []))

    def pair_values(self, config_id: int, instance_id: str) -> tuple[float, ...]:
        return tuple(self._pairs.get((config_id, instance_id), ()))

    def instances_evaluated(self, config_id: int) -> tuple[str, ...]:
        return tuple(self._by_config.get(config_id, ()))

    def instance_ids(self) -> tuple[str, ...]:
        return tuple(self._by_instance)

    def config_ids(self) -> tuple[int, ...]:
        return tuple(self._by_config)


def normalize_instance_column(
    archive: PerformanceArchive, instance_id: str
) -> dict[int, float]:
    """Rescale one instance's per-configuration means onto [0, 1].

    The best mean observed so far on the instance maps to 1, the worst to
    0; a degenerate column (all means equal, including the single-config
    case) maps everything to 0.5.
    """
    column = archive._by_instance.get(instance_id)
    if not column:
        raise KeyError(f"no observations for instance {instance_id!r}")
    means = {cid: fmean(values) for cid, values in column.items()}
    lo = min(means.values())
    hi = max(means.values())
    if hi == lo:
        return {cid: 0.5 for cid in means}
    span = hi - lo
    return {cid: (m - lo) / span for cid, m in means.items()}


def summarize(archive: PerformanceArchive, config_id: int) -> float:
    """Median of a configuration's per-instance rescaled values."""
    instance_ids = archive.instances_evaluated(config_id)
    if not instance_ids:
        raise KeyError(f"no observations for configuration {config_id}")
    values = [
        normalize_instance_column(archive, iid)[config_id] for iid in instance_ids
    ]
    return float(median(values))


def summarize_all(archive: PerformanceArchive) -> dict[int, float]:
    """Summary scores for every configuration with at least one observation."""
    columns = {
        iid: normalize_instance_column(archive, iid) for iid in archive.instance_ids()
    }
    scores: dict[int, float] = {}
    for config_id in archive.config_ids():
        values = [
            columns[iid][config_id]
            for iid in archive.instances_evaluated(config_id)
        ]
        scores[config_id] = float(median(values))
    return scores


class _InvocationFailure(Exception):
    """Internal: one evaluator attempt failed (retryable)."""


def _run_external(
    binding: EvaluatorBinding,
    space: ParameterSpace,
    config: Configuration,
    instance: InstanceDescriptor,
    seed: int,
) -> float:
    request = json.dumps(
        {"params": config.params(space), "instance": instance.payload, "seed": seed}
    )
    try:
        proc = subprocess.run(
            list(binding.command),
            input=request + "\n",
            capture_output=True,
            text=True,
            timeout=binding.timeout,
        )
    except subprocess.TimeoutExpired:
        raise _InvocationFailure(f"timed out after {binding.timeout}s")
    except OSError as err:
        raise _InvocationFailure(f"could not start command: {err}")
    if proc.returncode != 0:
        raise _InvocationFailure(
            f"exit status {proc.returncode}; stderr: {proc.stderr.strip()[:500]!r}"
        )
    text = proc.stdout.strip()
    if len(text.split()) != 1:
        raise _InvocationFailure(f"expected one number on stdout, got {text[:200]!r}")
    try:
        value = float(text)
    except ValueError:
        raise _InvocationFailure(f"non-numeric stdout {text[:200]!r}")
    if not math.isfinite(value):
        raise _InvocationFailure(f"non-finite value {value}")
    return value


def _run_builtin(
    binding: EvaluatorBinding,
    config: Configuration,
    instance: InstanceDescriptor,
    seed: int,
) -> float:
    unit = config.unit
    if binding.testbed == TESTBED_SPHERE:
        try:
            center = np.array([float(f) for f in instance.payload.split(",")])
        except ValueError:
            raise _InvocationFailure(
                f"sphere payload {instance.payload!r} is not comma-separated floats"
            )
        if center.shape != unit.shape:
            raise _InvocationFailure(
                f"sphere payload has {center.size} coordinates, expected {unit.size}"
            )
        value = 1.0 - float(np.sum((unit - center) ** 2))
        if binding.noise_sd > 0:
            value += float(
                np.random.default_rng(seed).normal(0.0, binding.noise_sd)
            )
        return value
    # interaction testbed: payload is irrelevant by design
    if unit.size < 3:
        raise _InvocationFailure("interaction testbed needs at least 3 parameters")
    return float(1.0 - (unit[0] - 0.5) ** 2 - unit[1] * unit[2])


def _attempt(
    binding: EvaluatorBinding,
    space: ParameterSpace,
    config: Configuration,
    instance: InstanceDescriptor,
    seed: int,
    retry_seed: int | None,
) -> tuple[int, float]:
    """Run once, retrying a failure once with the fresh seed.

    Returns (seed actually used, raw value before canonicalization).
    """

    def run_once(s: int) -> float:
        if binding.kind == KIND_EXTERNAL:
            return _run_external(binding, space, config, instance, s)
        return _run_builtin(binding, config, instance, s)

    try:
        return seed, run_once(seed)
    except _InvocationFailure as first:
        if retry_seed is None:
            raise EvaluationError(config.id, instance.id, str(first))
        try:
            return retry_seed, run_once(retry_seed)
        except _InvocationFailure as second:
            raise EvaluationError(
                config.id,
                instance.id,
                f"first attempt (seed {seed}): {first}; "
                f"retry (seed {retry_seed}): {second}",
            )


def _canonical(binding: EvaluatorBinding, raw: float) -> float:
    return raw if binding.sense == SENSE_MAXIMIZE else -raw


def evaluate(
    archive: PerformanceArchive,
    space: ParameterSpace,
    binding: EvaluatorBinding,
    config: Configuration,
    instance: InstanceDescriptor,
    seed: int,
    retry_seed: int | None = None,
) -> float:
    """Run the evaluator once (with one retry) and record the observation.

    Returns the canonicalized (larger-is-better) value. Failed invocations
    record nothing, so they never consume budget.
    """
    used_seed, raw = _attempt(binding, space, config, instance, seed, retry_seed)
    value = _canonical(binding, raw)
    archive.record(Observation(config.id, instance.id, used_seed, value))
    return value


EvaluationTask = tuple[Configuration, InstanceDescriptor, int, int | None]


def evaluate_batch(
    archive: PerformanceArchive,
    space: ParameterSpace,
    binding: EvaluatorBinding,
    tasks: Sequence[EvaluationTask],
    jobs: int = 1,
) -> None:
    """Run a batch of evaluation tasks and record results in task order.

    With jobs > 1 the invocations run on a thread pool, but observations
    are still recorded in task order, and on failure only the successes
    preceding the first failed task are kept. The archive state after an
    abort is therefore identical for any jobs setting.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")

    def attempt(task: EvaluationTask):
        config, instance, seed, retry_seed = task
        return _attempt(binding, space, config, instance, seed, retry_seed)

    outcomes: list[tuple[int, float] | EvaluationError] = []
    if jobs == 1:
        for task in tasks:
            try:
                outcomes.append(attempt(task))
            except EvaluationError as err:
                outcomes.append(err)
                break
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(attempt, task) for task in tasks]
            for future in futures:
                try:
                    outcomes.append(future.result())
                except EvaluationError as err:
                    outcomes.append(err)

    for task, outcome in zip(tasks, outcomes):
        if isinstance(outcome, EvaluationError):
            raise outcome
        config, instance, _, _ = task
        used_seed, raw = outcome
        archive.record(
            Observation(config.id, instance.id, used_seed, _canonical(binding, raw))
        )
