import sys

import numpy as np
import pytest

from polytune import InstanceDescriptor, ParameterSpace, ParameterSpec


@pytest.fixture
def unit_square() -> ParameterSpace:
    return ParameterSpace(
        (ParameterSpec("a", 0.0, 1.0), ParameterSpec("b", 0.0, 1.0))
    )


@pytest.fixture
def mixed_space() -> ParameterSpace:
    return ParameterSpace(
        (ParameterSpec("eta", 0.5, 100.0), ParameterSpec("rate", -1.0, 1.0))
    )


def sphere_instances(
    center: tuple[float, float], count: int, jitter: float, seed: int
) -> list[InstanceDescriptor]:
    """Instances whose payloads encode centers jittered uniformly around one point."""
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-jitter, jitter, size=(count, len(center)))
    centers = np.clip(np.asarray(center) + offsets, 0.0, 1.0)
    return [
        InstanceDescriptor(f"inst-{i:02d}", ",".join(repr(float(c)) for c in row))
        for i, row in enumerate(centers)
    ]


def echo_evaluator_script(tmp_path, body: str) -> list[str]:
    """Write a tiny evaluator script and return its command line."""
    script = tmp_path / "evaluator.py"
    script.write_text(body)
    return [sys.executable, str(script)]
