"""Drive the tuner through the external-command protocol.

Any executable can serve as the evaluator. Per evaluation the tuner writes
one JSON line to the command's stdin:

    {"params": {"cooling": 0.91, "restarts": 7.2}, "instance": "900", "seed": 17}

and expects a single number on stdout with exit status 0. Here the command
is a short python script, written to a temp directory below, that fakes a
solver whose runtime depends on two parameters. The binding declares
sense="minimize", so the tuner hunts for low runtimes.

Run:
    python demos/03_external_evaluator.py [--seed N]
"""

import argparse
import sys
import tempfile
from pathlib import Path

from polytune import (
    EvaluatorBinding,
    InstanceDescriptor,
    InstancePool,
    ParameterSpace,
    ParameterSpec,
    TunerSettings,
    run_tuner,
)

FAKE_SOLVER = '''\
import json
import random
import sys

request = json.loads(sys.stdin.readline())
params = request["params"]
size = float(request["instance"])
rng = random.Random(request["seed"])

# pretend runtime: a bowl with its floor at cooling=0.85, restarts=8,
# scaled by instance size, plus run-to-run noise
runtime = size * (
    1.0
    + 6.0 * (params["cooling"] - 0.85) ** 2
    + 0.02 * (params["restarts"] - 8.0) ** 2
)
runtime += rng.gauss(0.0, 0.03 * size)
print(runtime)
'''


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    workdir = Path(tempfile.mkdtemp(prefix="tuner-demo-"))
    script = workdir / "fake_solver.py"
    script.write_text(FAKE_SOLVER)
    print(f"evaluator command: {sys.executable} {script}")

    space = ParameterSpace(
        (
            ParameterSpec("cooling", 0.5, 0.99),
            ParameterSpec("restarts", 1.0, 20.0),
        )
    )
    # instance payload is the problem size the fake solver scales by
    pool = InstancePool(
        [InstanceDescriptor(f"size-{n}", str(n)) for n in (600, 800, 900, 1100, 1300)]
    )
    binding = EvaluatorBinding(
        kind="external-command",
        sense="minimize",
        command=(sys.executable, str(script)),
        timeout=10.0,
    )
    settings = TunerSettings(
        initial_configs=20,
        configs_per_iteration=4,
        initial_instances=4,
        instances_per_iteration=1,
        elite_size=4,
        budget=240,
        basis_order=2,
        seed=args.seed,
    )

    result = run_tuner(space, pool, binding, settings, jobs=4)

    print(f"stopped: {result.stop_reason} after {result.iterations} iterations")
    print(f"evaluations: {result.evaluations_used} of {settings.budget}")
    print()
    print("elites (true runtime floor is cooling=0.85, restarts=8):")
    for config, performance in result.elites:
        cooling, restarts = config.raw
        print(
            f"  #{config.id:<3d} score={performance:.4f}"
            f"  cooling={cooling:.4f}  restarts={restarts:.2f}  ({config.origin})"
        )


if __name__ == "__main__":
    main()
