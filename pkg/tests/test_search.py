import numpy as np
import pytest

from polytune import SimplexSettings, maximize_surface, nudge_apart


def test_univariate_quadratic_peak():
    result = maximize_surface(lambda x: -((x[0] - 0.3) ** 2), np.array([0.9]))
    assert abs(result[0] - 0.3) < 1e-4


def test_plane_pushes_into_corner():
    result = maximize_surface(lambda x: x[0] + x[1], np.array([0.2, 0.2]))
    assert np.abs(result - 1.0).max() < 1e-4


def test_result_never_leaves_cube():
    # steep plane from a boundary start keeps proposing outside points
    result = maximize_surface(lambda x: 50 * x[0] - x[1], np.array([1.0, 0.0]))
    assert np.all(result >= 0.0) and np.all(result <= 1.0)
    assert abs(result[0] - 1.0) < 1e-4


def test_surface_only_sees_feasible_points():
    seen = []

    def surface(x):
        seen.append(x.copy())
        return float(x.sum())

    maximize_surface(surface, np.array([0.95, 0.95]))
    stacked = np.array(seen)
    assert stacked.min() >= 0.0
    assert stacked.max() <= 1.0


def test_constant_surface_terminates_quickly():
    calls = []

    def surface(x):
        calls.append(1)
        return 0.7

    result = maximize_surface(surface, np.array([0.4, 0.6, 0.1]))
    # flat spread triggers the restart, then the stop; far below the cap
    assert len(calls) < 30
    assert np.all((result >= 0.0) & (result <= 1.0))


def test_never_worse_than_start():
    rng = np.random.default_rng(11)
    for _ in range(50):
        center = rng.random(3)
        start = rng.random(3)

        def surface(x):
            return -float(((x - center) ** 2).sum())

        result = maximize_surface(surface, start)
        assert surface(result) >= surface(start)


def test_same_inputs_same_output():
    def surface(x):
        return float(np.sin(5 * x[0]) + x[1] ** 2)

    a = maximize_surface(surface, np.array([0.5, 0.5]))
    b = maximize_surface(surface, np.array([0.5, 0.5]))
    assert np.array_equal(a, b)


def test_eval_cap_is_respected():
    count = 0

    def surface(x):
        nonlocal count
        count += 1
        return float(np.sin(31 * x[0]) * np.cos(17 * x[1]))

    maximize_surface(
        surface, np.array([0.5, 0.5]), SimplexSettings(max_evals=25, f_tolerance=1e-30)
    )
    assert count <= 25 + 3  # one simplex rebuild may finish its row


def test_restart_recovers_shrunk_simplex():
    # narrow ridge: plain descent stalls early, the restart resumes progress
    def surface(x):
        return -abs(x[0] - 0.3) ** 0.5

    result = maximize_surface(surface, np.array([0.8]))
    assert abs(result[0] - 0.3) < 5e-3


def test_start_validation():
    with pytest.raises(ValueError, match="unit cube"):
        maximize_surface(lambda x: 0.0, np.array([1.2, 0.5]))
    with pytest.raises(ValueError, match="1-d"):
        maximize_surface(lambda x: 0.0, np.array([[0.2, 0.5]]))


def test_settings_validation():
    with pytest.raises(ValueError, match="reflection"):
        SimplexSettings(reflection=0.0)
    with pytest.raises(ValueError, match="expansion"):
        SimplexSettings(expansion=1.0)
    with pytest.raises(ValueError, match="contraction"):
        SimplexSettings(contraction=1.0)
    with pytest.raises(ValueError, match="shrink"):
        SimplexSettings(shrink=0.0)
    with pytest.raises(ValueError, match="max_evals"):
        SimplexSettings(max_evals=0)
    with pytest.raises(ValueError, match="tolerances"):
        SimplexSettings(x_tolerance=0.0)


def test_nudge_leaves_distinct_point_alone():
    rng = np.random.default_rng(0)
    point = np.array([0.5, 0.5])
    taken = np.array([[0.1, 0.1], [0.9, 0.9]])
    assert np.array_equal(nudge_apart(point, taken, rng), point)


def test_nudge_moves_colliding_point():
    rng = np.random.default_rng(0)
    point = np.array([0.5, 0.5])
    taken = np.array([[0.5, 0.5 + 1e-9]])
    moved = nudge_apart(point, taken, rng)
    assert not np.array_equal(moved, point)
    assert np.abs(moved - point).max() <= 0.01
    assert np.all((moved >= 0.0) & (moved <= 1.0))


def test_nudge_clamps_at_cube_edge():
    rng = np.random.default_rng(3)
    point = np.array([1.0, 0.0])
    taken = np.array([[1.0, 0.0]])
    for _ in range(100):
        moved = nudge_apart(point, taken, rng)
        assert np.all((moved >= 0.0) & (moved <= 1.0))


def test_nudge_empty_taken_is_identity():
    rng = np.random.default_rng(0)
    point = np.array([0.3, 0.7])
    state_before = rng.bit_generator.state
    out = nudge_apart(point, np.empty((0, 2)), rng)
    assert np.array_equal(out, point)
    assert rng.bit_generator.state == state_before
