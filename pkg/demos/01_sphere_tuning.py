"""Tune two parameters on the built-in sphere testbed and inspect the result.

The sphere testbed scores a configuration as 1 - ||theta - c||^2 where each
instance carries its own slightly jittered center c. The tuner only ever
sees noisy per-instance scores, yet the elite configurations land close to
the true center and the fitted surface names the parameters that matter.

Run:
    python demos/01_sphere_tuning.py [--seed N] [--budget N]
"""

import argparse

import numpy as np

from polytune import (
    EvaluatorBinding,
    InstanceDescriptor,
    InstancePool,
    ParameterSpace,
    ParameterSpec,
    TunerSettings,
    run_tuner,
)
from polytune.cli import render_polynomial
from polytune.regression import map_polynomial_to_raw

CENTER = (0.7, 0.3)


def jittered_instances(count: int, seed: int) -> list[InstanceDescriptor]:
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-0.1, 0.1, size=(count, 2))
    centers = np.clip(np.asarray(CENTER) + offsets, 0.0, 1.0)
    return [
        InstanceDescriptor(f"inst-{i:02d}", ",".join(repr(float(v)) for v in row))
        for i, row in enumerate(centers)
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--budget", type=int, default=600)
    args = parser.parse_args()

    space = ParameterSpace(
        (ParameterSpec("x1", 0.0, 1.0), ParameterSpec("x2", 0.0, 1.0))
    )
    settings = TunerSettings(
        initial_configs=30,
        configs_per_iteration=5,
        initial_instances=5,
        instances_per_iteration=1,
        elite_size=5,
        budget=args.budget,
        basis_order=2,
        seed=args.seed,
    )
    binding = EvaluatorBinding(testbed="sphere", noise_sd=0.01)
    pool = InstancePool(jittered_instances(40, seed=123))

    result = run_tuner(space, pool, binding, settings)

    print(f"stopped: {result.stop_reason} after {result.iterations} iterations")
    print(f"evaluations: {result.evaluations_used} of {settings.budget}")
    print()
    print("elites (true center is x1=0.7, x2=0.3):")
    for config, performance in result.elites:
        x1, x2 = config.raw
        distance = float(np.hypot(x1 - CENTER[0], x2 - CENTER[1]))
        print(
            f"  #{config.id:<3d} p={performance:.4f}  x1={x1:.4f}  x2={x2:.4f}"
            f"  |error|={distance:.4f}  ({config.origin})"
        )

    model = result.final_model
    if model is not None:
        intercept, terms = map_polynomial_to_raw(
            model.basis, model.intercept, model.coefficients, space
        )
        print()
        print(f"fitted surface ({model.support_size} terms, lambda={model.lam:.4g}):")
        print("  " + render_polynomial(intercept, sorted(terms.items()), space.names))
        print()
        print("per-iteration best performance:")
        for record in result.trace:
            bar = "#" * int(40 * (record.best_performance or 0.0))
            print(f"  iter {record.iteration:2d}  {record.best_performance:.4f}  {bar}")


if __name__ == "__main__":
    main()
