"""Search-space definition and unit-cube coordinate transforms.

Everything downstream (sampling, surface fitting, surface optimization)
works in [0, 1]^k coordinates; raw parameter units appear only at the
evaluator boundary and in reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

ConfigOrigin = Literal["initial-sample", "surface-optimum"]


@dataclass(frozen=True)
class ParameterSpec:
    """One tunable parameter: a name plus its closed raw-unit range."""

    name: str
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("parameter name must be a non-empty string")
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError(f"parameter {self.name!r}: bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(
                f"parameter {self.name!r}: lower bound {self.lower} must be "
                f"strictly below upper bound {self.upper}"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered parameter collection; the order fixes the coordinate frame."""

    specs: tuple[ParameterSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        if not self.specs:
            raise ValueError("parameter space needs at least one parameter")
        names = [s.name for s in self.specs]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate parameter names: {sorted(dupes)}")

    @property
    def k(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    @cached_property
    def lowers(self) -> np.ndarray:
        a = np.array([s.lower for s in self.specs], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def uppers(self) -> np.ndarray:
        a = np.array([s.upper for s in self.specs], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def widths(self) -> np.ndarray:
        a = self.uppers - self.lowers
        a.flags.writeable = False
        return a

    def _check_shape(self, values: np.ndarray, label: str) -> None:
        if values.shape != (self.k,):
            raise ValueError(
                f"{label} vector has shape {values.shape}, expected ({self.k},)"
            )

    def normalize(self, raw: Sequence[float] | np.ndarray) -> np.ndarray:
        """Map a raw-unit point onto [0, 1]^k; bounds map exactly to 0 and 1.

        Out-of-range values are rejected, never clamped.
        """
        x = np.asarray(raw, dtype=float)
        self._check_shape(x, "raw")
        for spec, value in zip(self.specs, x):
            if not spec.lower <= value <= spec.upper:
                raise ValueError(
                    f"value {value} for parameter {spec.name!r} is outside "
                    f"[{spec.lower}, {spec.upper}]"
                )
        return (x - self.lowers) / self.widths

    def denormalize(self, unit: Sequence[float] | np.ndarray) -> np.ndarray:
        """Map a unit-cube point back to raw units."""
        u = np.asarray(unit, dtype=float)
        self._check_shape(u, "unit")
        for spec, value in zip(self.specs, u):
            if not 0.0 <= value <= 1.0:
                raise ValueError(
                    f"unit coordinate {value} for parameter {spec.name!r} is "
                    f"outside [0, 1]"
                )
        return self.lowers + u * self.widths


def _frozen(values: np.ndarray) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Configuration:
    """One candidate parameter assignment in both coordinate frames.

    The stored arrays are read-only so configurations can be shared across
    worker threads without defensive copies.
    """

    id: int
    raw: np.ndarray
    unit: np.ndarray
    origin: ConfigOrigin
    birth_iteration: int

    @classmethod
    def from_unit(
        cls,
        config_id: int,
        unit: Sequence[float] | np.ndarray,
        space: ParameterSpace,
        origin: ConfigOrigin,
        birth_iteration: int,
    ) -> "Configuration":
        u = _frozen(np.asarray(unit, dtype=float))
        return cls(config_id, _frozen(space.denormalize(u)), u, origin, birth_iteration)

    @classmethod
    def from_raw(
        cls,
        config_id: int,
        raw: Sequence[float] | np.ndarray,
        space: ParameterSpace,
        origin: ConfigOrigin,
        birth_iteration: int,
    ) -> "Configuration":
        x = _frozen(np.asarray(raw, dtype=float))
        return cls(config_id, x, _frozen(space.normalize(x)), origin, birth_iteration)

    def params(self, space: ParameterSpace) -> dict[str, float]:
        """Raw values keyed by parameter name, for the evaluator boundary."""
        return {name: float(v) for name, v in zip(space.names, self.raw)}
