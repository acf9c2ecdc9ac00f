"""Command-line front end: validate run configurations, execute runs, report.

A run configuration is one JSON document naming the parameters, the
instances, the evaluator binding, and the loop settings. Reports are
written as result.json / trace.csv / archive.csv / summary.txt inside the
output directory; none of them contain timestamps, so a repeated run with
the same seed produces byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .evaluation import (
    KIND_BUILTIN,
    KIND_EXTERNAL,
    SENSE_MAXIMIZE,
    SENSE_MINIMIZE,
    TESTBED_INTERACTION,
    TESTBED_SPHERE,
    EvaluatorBinding,
    PerformanceArchive,
    summarize_all,
)
from .regression import (
    RegressionModel,
    expand_design,
    loo_refit_coefficients,
    map_polynomial_to_raw,
)
from .sampling import InstanceDescriptor, InstancePool
from .space import ParameterSpace, ParameterSpec
from .tuner import (
    TunerAbort,
    TunerResult,
    TunerSettings,
    minimum_budget,
    run_tuner,
)


class ConfigError(ValueError):
    """One or more run-configuration problems, each tagged with its field path."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class RunConfig:
    """A fully validated run configuration."""

    space: ParameterSpace
    instances: list[InstanceDescriptor]
    binding: EvaluatorBinding
    settings: TunerSettings
    output_dir: Path
    jobs: int = 1


_EVALUATOR_KEYS = {
    "kind",
    "command",
    "sense",
    "timeout",
    "runs_per_pair",
    "testbed",
    "noise_sd",
}
_TUNER_KEYS = {
    "initial_configs",
    "configs_per_iteration",
    "initial_instances",
    "instances_per_iteration",
    "elite_size",
    "budget",
    "basis_order",
    "penalty_order",
    "cv_folds",
    "seed",
    "max_iterations",
}
_TOP_KEYS = {"parameters", "instances", "evaluator", "tuner", "output_dir"}


def _get_number(
    section: dict, key: str, default: Any, errors: list[str], path: str, integer: bool = False
) -> Any:
    value = section.get(key, default)
    if value is None and default is None:
        return None
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool):
        ok = False
    if not ok:
        kind = "an integer" if integer else "a number"
        errors.append(f"{path}.{key}: expected {kind}, got {value!r}")
        return default
    return value


def _check_unknown(section: dict, allowed: set[str], errors: list[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            errors.append(f"{path}.{key}: unknown key")


def _parse_parameters(document: dict, errors: list[str]) -> ParameterSpace | None:
    raw = document.get("parameters")
    if not isinstance(raw, list) or not raw:
        errors.append("parameters: expected a non-empty list")
        return None
    specs = []
    for i, entry in enumerate(raw):
        path = f"parameters[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{path}: expected an object")
            continue
        _check_unknown(entry, {"name", "lower", "upper"}, errors, path)
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            errors.append(f"{path}.name: expected a non-empty string")
            continue
        lower = _get_number(entry, "lower", None, errors, path)
        upper = _get_number(entry, "upper", None, errors, path)
        if lower is None or upper is None:
            errors.append(f"{path}: lower and upper are required")
            continue
        try:
            specs.append(ParameterSpec(name, float(lower), float(upper)))
        except ValueError as err:
            errors.append(f"{path}: {err}")
    if not specs or len(specs) != len(raw):
        return None
    try:
        return ParameterSpace(tuple(specs))
    except ValueError as err:
        errors.append(f"parameters: {err}")
        return None


def _parse_instances(document: dict, errors: list[str]) -> list[InstanceDescriptor] | None:
    raw = document.get("instances")
    if not isinstance(raw, list) or not raw:
        errors.append("instances: expected a non-empty list")
        return None
    out = []
    for i, entry in enumerate(raw):
        path = f"instances[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{path}: expected an object")
            continue
        _check_unknown(entry, {"id", "payload"}, errors, path)
        instance_id = entry.get("id")
        if isinstance(instance_id, (int, float)) and not isinstance(instance_id, bool):
            instance_id = str(instance_id)
        if not isinstance(instance_id, str) or not instance_id:
            errors.append(f"{path}.id: expected a non-empty string")
            continue
        payload = entry.get("payload", "")
        if not isinstance(payload, str):
            errors.append(f"{path}.payload: expected a string")
            continue
        out.append(InstanceDescriptor(instance_id, payload))
    if len(out) != len(raw):
        return None
    ids = [inst.id for inst in out]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        errors.append(f"instances: duplicate ids {dupes}")
        return None
    return out


def _parse_evaluator(document: dict, errors: list[str]) -> EvaluatorBinding | None:
    section = document.get("evaluator", {})
    if not isinstance(section, dict):
        errors.append("evaluator: expected an object")
        return None
    _check_unknown(section, _EVALUATOR_KEYS, errors, "evaluator")
    kind = section.get("kind", KIND_BUILTIN)
    if kind not in (KIND_BUILTIN, KIND_EXTERNAL):
        errors.append(
            f"evaluator.kind: expected {KIND_BUILTIN!r} or {KIND_EXTERNAL!r}, "
            f"got {kind!r}"
        )
        return None
    sense = section.get("sense", SENSE_MAXIMIZE)
    if sense not in (SENSE_MAXIMIZE, SENSE_MINIMIZE):
        errors.append(
            f"evaluator.sense: expected {SENSE_MAXIMIZE!r} or {SENSE_MINIMIZE!r}, "
            f"got {sense!r}"
        )
        return None
    command_raw = section.get("command", [])
    if isinstance(command_raw, str):
        command: tuple[str, ...] = (command_raw,)
    elif isinstance(command_raw, list) and all(isinstance(c, str) for c in command_raw):
        command = tuple(command_raw)
    else:
        errors.append("evaluator.command: expected a string or list of strings")
        return None
    testbed = section.get("testbed", TESTBED_SPHERE)
    if testbed not in (TESTBED_SPHERE, TESTBED_INTERACTION):
        errors.append(
            f"evaluator.testbed: expected {TESTBED_SPHERE!r} or "
            f"{TESTBED_INTERACTION!r}, got {testbed!r}"
        )
        return None
    timeout = _get_number(section, "timeout", 3600.0, errors, "evaluator")
    runs = _get_number(section, "runs_per_pair", 1, errors, "evaluator", integer=True)
    noise_sd = _get_number(section, "noise_sd", 0.0, errors, "evaluator")
    try:
        return EvaluatorBinding(
            kind=kind,
            sense=sense,
            runs_per_pair=int(runs),
            command=command,
            timeout=float(timeout),
            testbed=testbed,
            noise_sd=float(noise_sd),
        )
    except ValueError as err:
        errors.append(f"evaluator: {err}")
        return None


def _parse_tuner(document: dict, errors: list[str]) -> TunerSettings | None:
    section = document.get("tuner", {})
    if not isinstance(section, dict):
        errors.append("tuner: expected an object")
        return None
    _check_unknown(section, _TUNER_KEYS, errors, "tuner")
    defaults = TunerSettings()
    values = {}
    for key in _TUNER_KEYS - {"max_iterations"}:
        values[key] = _get_number(
            section, key, getattr(defaults, key), errors, "tuner", integer=True
        )
    max_iterations = section.get("max_iterations")
    if max_iterations is not None and (
        not isinstance(max_iterations, int) or isinstance(max_iterations, bool)
    ):
        errors.append(
            f"tuner.max_iterations: expected an integer or null, got {max_iterations!r}"
        )
        max_iterations = None
    try:
        return TunerSettings(max_iterations=max_iterations, **values)
    except ValueError as err:
        errors.append(f"tuner: {err}")
        return None


def _cross_validate(
    space: ParameterSpace | None,
    instances: list[InstanceDescriptor] | None,
    binding: EvaluatorBinding | None,
    settings: TunerSettings | None,
    errors: list[str],
) -> None:
    if space is not None and settings is not None:
        needed = space.k + 2
        if settings.initial_configs < needed:
            errors.append(
                f"tuner.initial_configs: need at least k + 2 = {needed} "
                f"configurations to fit a surface, got {settings.initial_configs}"
            )
    if binding is not None and settings is not None:
        floor = minimum_budget(settings, binding.runs_per_pair)
        if settings.budget < floor:
            errors.append(
                f"tuner.budget: {settings.budget} cannot cover initialization; "
                f"need at least {floor}"
            )
    if (
        space is not None
        and instances is not None
        and binding is not None
        and binding.kind == KIND_BUILTIN
        and binding.testbed == TESTBED_SPHERE
    ):
        for i, instance in enumerate(instances):
            path = f"instances[{i}].payload"
            try:
                center = [float(f) for f in instance.payload.split(",")]
            except ValueError:
                errors.append(
                    f"{path}: sphere payload must be comma-separated floats, "
                    f"got {instance.payload!r}"
                )
                continue
            if len(center) != space.k:
                errors.append(
                    f"{path}: sphere payload has {len(center)} coordinates, "
                    f"expected {space.k}"
                )
            elif not all(0.0 <= c <= 1.0 for c in center):
                errors.append(f"{path}: sphere center must lie in [0, 1]^k")
    if (
        binding is not None
        and space is not None
        and binding.kind == KIND_BUILTIN
        and binding.testbed == TESTBED_INTERACTION
        and space.k < 3
    ):
        errors.append("evaluator.testbed: interaction testbed needs k >= 3 parameters")


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a run-configuration file.

    Raises:
        ConfigError: with every detected problem, each tagged by field path.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError([f"cannot read {path}: {err}"])
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError([f"{path}: invalid JSON: {err}"])
    if not isinstance(document, dict):
        raise ConfigError([f"{path}: top level must be an object"])

    errors: list[str] = []
    _check_unknown(document, _TOP_KEYS, errors, "config")
    space = _parse_parameters(document, errors)
    instances = _parse_instances(document, errors)
    binding = _parse_evaluator(document, errors)
    settings = _parse_tuner(document, errors)
    output_dir = document.get("output_dir", "tuner-output")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir: expected a non-empty string")
        output_dir = "tuner-output"
    _cross_validate(space, instances, binding, settings, errors)
    if errors:
        raise ConfigError(errors)
    assert space is not None and instances is not None
    assert binding is not None and settings is not None
    return RunConfig(space, instances, binding, settings, Path(output_dir))


def _monomial_label(exponents: Sequence[int], names: Sequence[str]) -> str:
    parts = [
        name if e == 1 else f"{name}^{e}"
        for name, e in zip(names, exponents)
        if e > 0
    ]
    return "*".join(parts)


def render_polynomial(
    intercept: float,
    terms: Sequence[tuple[Sequence[int], float]],
    names: Sequence[str],
) -> str:
    """One-line human-readable polynomial, zero terms omitted."""
    pieces = [f"y = {intercept:.6g}"]
    for exponents, coefficient in terms:
        if coefficient == 0.0:
            continue
        sign = " + " if coefficient >= 0 else " - "
        pieces.append(f"{sign}{abs(coefficient):.6g}*{_monomial_label(exponents, names)}")
    return "".join(pieces)


def _model_payload(result: TunerResult, config: RunConfig) -> dict | None:
    """JSON description of the final surface in unit and raw frames."""
    model = result.final_model
    if model is None:
        return None
    space = config.space
    basis = model.basis

    unit_terms = [
        {
            "exponents": list(exps),
            "coefficient": float(c),
            "standard_error": float(se),
        }
        for exps, c, se in zip(
            basis.terms[1:], model.coefficients, model.standard_errors
        )
        if c != 0.0
    ]

    raw_intercept, raw_terms = map_polynomial_to_raw(
        basis, model.intercept, model.coefficients, space
    )
    raw_errors = _raw_standard_errors(result, model)
    raw_term_list = [
        {
            "exponents": list(exps),
            "coefficient": float(c),
            "standard_error": float(raw_errors.get(exps, 0.0)),
        }
        for exps, c in sorted(raw_terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))
    ]

    unit_names = [f"x{i + 1}" for i in range(space.k)]
    return {
        "lambda": model.lam,
        "penalty_order": model.penalty_order,
        "support_size": model.support_size,
        "unit": {
            "intercept": model.intercept,
            "intercept_standard_error": model.intercept_se,
            "terms": unit_terms,
            "rendered": render_polynomial(
                model.intercept,
                [(t["exponents"], t["coefficient"]) for t in unit_terms],
                unit_names,
            ),
        },
        "raw": {
            "intercept": raw_intercept,
            "intercept_standard_error": raw_errors.get("intercept", 0.0),
            "terms": raw_term_list,
            "rendered": render_polynomial(
                raw_intercept,
                [(t["exponents"], t["coefficient"]) for t in raw_term_list],
                space.names,
            ),
        },
    }


def _raw_standard_errors(
    result: TunerResult, model: RegressionModel
) -> dict[tuple[int, ...] | str, float]:
    """Raw-frame coefficient spreads from the raw-mapped leave-one-out refits.

    The unit->raw change of basis mixes terms, so unit-frame errors cannot
    simply be rescaled; instead every leave-one-out refit is mapped to raw
    units and the ddof=1 spread is taken per raw term.
    """
    performances = summarize_all(result.archive)
    scored = [c for c in result.configs if c.id in performances]
    X = expand_design([c.unit for c in scored], model.basis)
    y = np.array([performances[c.id] for c in scored])
    n = X.shape[0]
    if n < 3:
        return {}
    support = model.support()
    refits = loo_refit_coefficients(X, y, support)
    support_indices = np.flatnonzero(support)

    intercepts = np.empty(n)
    per_term: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(n):
        coefficients = np.zeros(len(model.coefficients))
        coefficients[support_indices] = refits[i, 1:]
        raw_intercept, raw_terms = map_polynomial_to_raw(
            model.basis, float(refits[i, 0]), coefficients, result.space
        )
        intercepts[i] = raw_intercept
        for key, value in raw_terms.items():
            per_term.setdefault(key, np.zeros(n))[i] = value

    errors: dict[tuple[int, ...] | str, float] = {
        key: float(values.std(ddof=1)) for key, values in per_term.items()
    }
    errors["intercept"] = float(intercepts.std(ddof=1))
    return errors


def _result_payload(result: TunerResult, config: RunConfig) -> dict:
    space = config.space
    return {
        "seed": result.settings.seed,
        "stop_reason": result.stop_reason,
        "iterations": result.iterations,
        "evaluations_used": result.evaluations_used,
        "settings": asdict(result.settings),
        "evaluator": {
            "kind": config.binding.kind,
            "sense": config.binding.sense,
            "runs_per_pair": config.binding.runs_per_pair,
            "command": list(config.binding.command),
            "timeout": config.binding.timeout,
            "testbed": config.binding.testbed,
            "noise_sd": config.binding.noise_sd,
        },
        "space": [
            {"name": s.name, "lower": s.lower, "upper": s.upper} for s in space.specs
        ],
        "elites": [
            {
                "id": c.id,
                "origin": c.origin,
                "birth_iteration": c.birth_iteration,
                "performance": p,
                "params": c.params(space),
                "unit": [float(v) for v in c.unit],
            }
            for c, p in result.elites
        ],
        "model": _model_payload(result, config),
    }


def _write_trace(path: Path, trace) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "iteration",
                "evaluations_used",
                "best_performance",
                "lambda",
                "support_size",
                "elite_ids",
            ]
        )
        for record in trace:
            writer.writerow(
                [
                    record.iteration,
                    record.evaluations_used,
                    "" if record.best_performance is None else repr(record.best_performance),
                    "" if record.lam is None else repr(record.lam),
                    "" if record.support_size is None else record.support_size,
                    " ".join(str(i) for i in record.elite_ids),
                ]
            )


def _write_archive(path: Path, archive: PerformanceArchive) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["config_id", "instance_id", "seed", "value"])
        for obs in archive.observations:
            writer.writerow([obs.config_id, obs.instance_id, obs.seed, repr(obs.value)])


def _write_summary(path: Path, result: TunerResult, config: RunConfig) -> None:
    lines = [
        f"stop reason: {result.stop_reason}",
        f"iterations: {result.iterations}",
        f"evaluations used: {result.evaluations_used} of {result.settings.budget}",
        "",
        "elites:",
    ]
    for rank, (c, p) in enumerate(result.elites, start=1):
        rendered = ", ".join(
            f"{name}={value:.6g}" for name, value in c.params(config.space).items()
        )
        lines.append(f"  {rank:2d}. performance {p:.6f}  [{c.origin}]  {rendered}")
    model = result.final_model
    lines.append("")
    if model is None:
        lines.append("no surface fit (not enough scored configurations)")
    else:
        raw_intercept, raw_terms = map_polynomial_to_raw(
            model.basis, model.intercept, model.coefficients, config.space
        )
        lines.append(
            f"fitted surface (raw units, lambda={model.lam:.6g}, "
            f"{model.support_size} terms):"
        )
        lines.append(
            "  "
            + render_polynomial(
                raw_intercept, sorted(raw_terms.items()), config.space.names
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_and_report(config: RunConfig) -> int:
    """Execute a run and write the four report files; returns the exit code."""
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    pool = InstancePool(list(config.instances))
    try:
        result = run_tuner(
            config.space, pool, config.binding, config.settings, jobs=config.jobs
        )
    except TunerAbort as abort:
        _write_trace(outdir / "trace.csv", abort.trace)
        _write_archive(outdir / "archive.csv", abort.archive)
        print(f"run aborted: {abort}", file=sys.stderr)
        print(f"partial trace and archive written to {outdir}", file=sys.stderr)
        return 2

    payload = _result_payload(result, config)
    with (outdir / "result.json").open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    _write_trace(outdir / "trace.csv", result.trace)
    _write_archive(outdir / "archive.csv", result.archive)
    _write_summary(outdir / "summary.txt", result, config)
    best, best_p = result.elites[0]
    rendered = ", ".join(
        f"{name}={value:.6g}" for name, value in best.params(config.space).items()
    )
    print(
        f"{result.stop_reason} after {result.iterations} iterations, "
        f"{result.evaluations_used} evaluations; best performance "
        f"{best_p:.6f} at {rendered}"
    )
    print(f"reports written to {outdir}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tuner",
        description="Model-based parameter tuner driven by sparse polynomial "
        "response surfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="execute a tuning run")
    run_parser.add_argument("--config", required=True, help="run-configuration JSON")
    run_parser.add_argument("--seed", type=int, default=None, help="override the seed")
    run_parser.add_argument(
        "--jobs", type=int, default=1, help="concurrent evaluator invocations"
    )
    run_parser.add_argument("--out", default=None, help="override the output directory")

    validate_parser = sub.add_parser(
        "validate", help="check a run configuration without running"
    )
    validate_parser.add_argument(
        "--config", required=True, help="run-configuration JSON"
    )

    args = parser.parse_args(argv)
    try:
        config = load_run_config(args.config)
    except ConfigError as err:
        for problem in err.errors:
            print(f"error: {problem}", file=sys.stderr)
        return 1

    if args.command == "validate":
        print(
            f"configuration OK: {config.space.k} parameters, "
            f"{len(config.instances)} instances, budget {config.settings.budget}"
        )
        return 0

    if args.seed is not None:
        config.settings = replace(config.settings, seed=args.seed)
    if args.out is not None:
        config.output_dir = Path(args.out)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    config.jobs = args.jobs
    return run_and_report(config)
