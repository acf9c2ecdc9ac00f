"""Derivative-free maximization of response surfaces over the unit cube.

The searcher is deliberately rng-free: given the same surface and start
point it always returns the same optimum. All stochastic choices (where to
start, how to separate duplicate proposals) belong to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

INITIAL_STEP = 0.05
DUPLICATE_TOL = 1e-6
DUPLICATE_JITTER = 0.01


@dataclass(frozen=True)
class SimplexSettings:
    """Nelder-Mead control knobs.

    max_evals of None means 200 evaluations per dimension.
    """

    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evals: int | None = None
    x_tolerance: float = 1e-6
    f_tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.reflection <= 0:
            raise ValueError("reflection must be > 0")
        if self.expansion <= 1:
            raise ValueError("expansion must be > 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must be in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must be in (0, 1)")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.x_tolerance <= 0 or self.f_tolerance <= 0:
            raise ValueError("tolerances must be > 0")


def _initial_simplex(center: np.ndarray) -> np.ndarray:
    """Axis-aligned simplex around a point already inside the cube."""
    k = center.size
    vertices = np.repeat(center[None, :], k + 1, axis=0)
    for axis in range(k):
        if vertices[axis + 1, axis] + INITIAL_STEP <= 1.0:
            vertices[axis + 1, axis] += INITIAL_STEP
        else:
            vertices[axis + 1, axis] -= INITIAL_STEP
    return vertices


def maximize_surface(
    surface: Callable[[np.ndarray], float],
    start: Sequence[float] | np.ndarray,
    settings: SimplexSettings = SimplexSettings(),
) -> np.ndarray:
    """Nelder-Mead ascent of `surface` restricted to [0, 1]^k.

    Every proposal is clamped into the cube before the surface sees it, so
    the surface is only ever queried at feasible points. The search stops
    when the simplex diameter (L_inf) drops below x_tolerance or the value
    spread drops below f_tolerance, restarting once around the incumbent
    before giving up, or when the evaluation cap is reached. Returns the
    best point ever evaluated.
    """
    start = np.asarray(start, dtype=float)
    if start.ndim != 1:
        raise ValueError("start must be a 1-d point")
    if np.any(start < 0.0) or np.any(start > 1.0):
        raise ValueError("start must lie inside the unit cube")
    k = start.size
    cap = settings.max_evals if settings.max_evals is not None else 200 * k

    evals = 0
    best_point = start.copy()
    best_value = -np.inf

    def evaluate(point: np.ndarray) -> tuple[np.ndarray, float]:
        # internally minimizes -surface; tracks the true best as a side effect
        nonlocal evals, best_point, best_value
        clamped = np.clip(point, 0.0, 1.0)
        value = float(surface(clamped))
        evals += 1
        if value > best_value:
            best_value = value
            best_point = clamped
        return clamped, -value

    def build(center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vertices = _initial_simplex(center)
        values = np.empty(k + 1)
        for i in range(k + 1):
            vertices[i], values[i] = evaluate(vertices[i])
        return vertices, values

    vertices, values = build(start)
    restarted = False
    while evals < cap:
        order = np.argsort(values, kind="stable")
        vertices = vertices[order]
        values = values[order]

        diameter = float(np.abs(vertices[1:] - vertices[0]).max())
        spread = float(values[-1] - values[0])
        if diameter < settings.x_tolerance or spread < settings.f_tolerance:
            if restarted:
                break
            restarted = True
            vertices, values = build(best_point)
            continue

        centroid = vertices[:-1].sum(axis=0) / k
        step = centroid - vertices[-1]
        reflected, f_reflected = evaluate(centroid + settings.reflection * step)
        if f_reflected < values[0]:
            expanded, f_expanded = evaluate(
                centroid + settings.reflection * settings.expansion * step
            )
            if f_expanded < f_reflected:
                vertices[-1], values[-1] = expanded, f_expanded
            else:
                vertices[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            vertices[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-1]:
            # outside contraction
            contracted, f_contracted = evaluate(
                centroid + settings.contraction * settings.reflection * step
            )
            if f_contracted <= f_reflected:
                vertices[-1], values[-1] = contracted, f_contracted
            else:
                _shrink(vertices, values, settings.shrink, evaluate)
        else:
            # inside contraction
            contracted, f_contracted = evaluate(
                centroid - settings.contraction * step
            )
            if f_contracted < values[-1]:
                vertices[-1], values[-1] = contracted, f_contracted
            else:
                _shrink(vertices, values, settings.shrink, evaluate)
    return best_point


def _shrink(vertices: np.ndarray, values: np.ndarray, factor: float, evaluate) -> None:
    anchor = vertices[0]
    for i in range(1, len(vertices)):
        vertices[i], values[i] = evaluate(anchor + factor * (vertices[i] - anchor))


def nudge_apart(
    point: np.ndarray, taken: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Jitter a proposal that collides with an already-known point.

    A collision is L_inf distance below DUPLICATE_TOL to any row of `taken`.
    The jitter is a single uniform(-0.01, 0.01) offset per coordinate,
    clamped back into the cube; it is applied at most once.
    """
    point = np.asarray(point, dtype=float)
    if taken.size == 0:
        return point
    if np.abs(taken - point).max(axis=1).min() < DUPLICATE_TOL:
        offset = rng.uniform(-DUPLICATE_JITTER, DUPLICATE_JITTER, size=point.size)
        return np.clip(point + offset, 0.0, 1.0)
    return point
