"""Space-filling initial designs and without-replacement instance draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


def lhs_sample(k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample of `count` points in [0, 1)^k.

    Each axis is cut into `count` equal strata; along every axis the points
    occupy each stratum exactly once at an independently jittered position,
    with the stratum order permuted per axis.

    Args:
        k: dimensionality, >= 1.
        count: number of points, >= 1.
        rng: source for permutations and jitter.

    Returns:
        Array of shape (count, k).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    points = np.empty((count, k), dtype=float)
    for axis in range(k):
        order = rng.permutation(count)
        jitter = rng.random(count)
        points[:, axis] = (order + jitter) / count
    return points


@dataclass(frozen=True)
class InstanceDescriptor:
    """A problem instance: an identifier plus an opaque payload string."""

    id: str
    payload: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("instance id must be a non-empty string")


@dataclass
class InstancePool:
    """Tracks which instances a run has drawn; each is handed out at most once."""

    instances: list[InstanceDescriptor]
    _visited: set[str] = field(default_factory=set, repr=False)

    def __post_init__(self) -> None:
        self.instances = list(self.instances)
        ids = [inst.id for inst in self.instances]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"duplicate instance ids: {sorted(dupes)}")

    @property
    def visited(self) -> frozenset[str]:
        return frozenset(self._visited)

    def unvisited(self) -> list[InstanceDescriptor]:
        return [inst for inst in self.instances if inst.id not in self._visited]

    @property
    def remaining(self) -> int:
        return len(self.instances) - len(self._visited)


def sample_instances(
    pool: InstancePool, n: int, rng: np.random.Generator
) -> tuple[list[InstanceDescriptor], bool]:
    """Draw up to `n` unvisited instances uniformly without replacement.

    Marks the drawn instances as visited. When fewer than `n` remain the
    draw is truncated and the exhaustion flag is set; n=0 touches neither
    the pool nor the rng.

    Returns:
        (drawn instances, pool-exhausted flag).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    available = pool.unvisited()
    exhausted = len(available) < n
    take = min(n, len(available))
    if take == 0:
        return [], exhausted
    idx = rng.choice(len(available), size=take, replace=False)
    chosen = [available[int(i)] for i in idx]
    pool._visited.update(inst.id for inst in chosen)
    return chosen, exhausted
