import numpy as np
import pytest

from polytune import (
    ParameterSpace,
    ParameterSpec,
    PolynomialBasis,
    RegressionModel,
    expand_basis,
    expand_design,
    fit_model,
    lambda_max,
    loo_standard_errors,
    map_polynomial_to_raw,
    perturb_model,
    select_lambda_cv,
)
from polytune.regression import lambda_grid, loo_refit_coefficients


def test_basis_univariate_expansion():
    basis = PolynomialBasis.create(1, 2)
    assert expand_basis([0.5], basis) == pytest.approx([1.0, 0.5, 0.25])


def test_basis_term_counts():
    assert len(PolynomialBasis.create(2, 2)) == 6
    assert len(PolynomialBasis.create(2, 4)) == 15
    assert len(PolynomialBasis.create(3, 4)) == 35
    assert len(PolynomialBasis.create(6, 4)) == 210


def test_basis_constant_first_and_unique():
    basis = PolynomialBasis.create(3, 3)
    assert basis.terms[0] == (0, 0, 0)
    assert len(set(basis.terms)) == len(basis.terms)
    assert all(sum(t) <= 3 for t in basis.terms)


def test_expand_design_shape():
    basis = PolynomialBasis.create(2, 2)
    pts = np.random.default_rng(0).random((7, 2))
    X = expand_design(pts, basis)
    assert X.shape == (7, 6)
    assert np.all(X[:, 0] == 1.0)


def make_fit(n, k, order, y_fn, seed=0, lam=0.0, penalty_order=1):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, k))
    basis = PolynomialBasis.create(k, order)
    X = expand_design(pts, basis)
    y = y_fn(pts)
    return X, y, basis, pts


def test_exact_linear_recovery_at_zero_penalty():
    X, y, basis, _ = make_fit(30, 2, 2, lambda p: 2.0 * p[:, 0])
    model = fit_model(X, y, 0.0, 1, basis)
    slot = basis.terms[1:].index((1, 0))
    assert abs(model.coefficients[slot] - 2.0) < 1e-5
    others = np.delete(model.coefficients, slot)
    assert np.abs(others).max() <= 1e-5


def test_univariate_soft_threshold_oracle():
    # standardized single feature: closed form beta = max(2 - lam, 0)
    basis = PolynomialBasis.create(1, 1)
    X = np.column_stack([np.ones(2), [-1.0, 1.0]])
    y = np.array([-2.0, 2.0])
    for lam in (0.0, 0.5, 1.0, 1.9):
        model = fit_model(X, y, lam, 1, basis)
        assert abs(model.coefficients[0] - (2.0 - lam)) < 1e-8
    model = fit_model(X, y, 2.5, 1, basis)
    assert model.coefficients[0] == 0.0


def test_lambda_max_zeroes_everything():
    rng = np.random.default_rng(7)
    X = np.column_stack([np.ones(5), rng.normal(size=(5, 2))])
    y = rng.normal(size=5)
    basis = PolynomialBasis.create(2, 1)
    lam = lambda_max(X, y)
    model = fit_model(X, y, lam, 1, basis)
    assert np.all(model.coefficients == 0.0)
    assert model.intercept == pytest.approx(y.mean())
    below = fit_model(X, y, lam * 0.99, 1, basis)
    assert np.abs(below.coefficients).max() > 0.0


def test_zero_solution_is_optimal_at_lambda_max():
    # brute force: random perturbations around 0 never beat the zero vector
    rng = np.random.default_rng(7)
    X = np.column_stack([np.ones(5), rng.normal(size=(5, 2))])
    y = rng.normal(size=5)
    lam = lambda_max(X, y)
    features = X[:, 1:]
    standardized = (features - features.mean(0)) / features.std(0)
    centered = y - y.mean()

    def objective(beta):
        r = centered - standardized @ beta
        return 0.5 * float(r @ r) / 5 + lam * float(np.abs(beta).sum())

    base = objective(np.zeros(2))
    for _ in range(2000):
        assert objective(rng.normal(scale=1e-4, size=2)) >= base - 1e-15


def test_objective_never_increases_across_sweeps():
    rng = np.random.default_rng(3)
    basis = PolynomialBasis.create(2, 4)
    X = expand_design(rng.random((50, 2)), basis)
    y = rng.normal(size=50)
    for lam in (1e-2, 1e-4):
        trace: list[float] = []
        fit_model(X, y, lam, 1, basis, sweep_objectives=trace)
        assert len(trace) >= 1
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs <= 1e-12)


def test_objective_trace_path_matches_default_path():
    rng = np.random.default_rng(8)
    basis = PolynomialBasis.create(2, 3)
    X = expand_design(rng.random((40, 2)), basis)
    y = rng.normal(size=40)
    traced = fit_model(X, y, 0.01, 1, basis, sweep_objectives=[])
    plain = fit_model(X, y, 0.01, 1, basis)
    assert np.abs(traced.coefficients - plain.coefficients).max() < 1e-10
    assert abs(traced.intercept - plain.intercept) < 1e-10


def test_zero_penalty_matches_lstsq_on_well_conditioned_design():
    rng = np.random.default_rng(12)
    basis = PolynomialBasis.create(4, 2)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, len(basis) - 1))])
    y = rng.normal(size=50)
    model = fit_model(X, y, 0.0, 1, basis)
    direct = np.linalg.lstsq(X, y, rcond=None)[0]
    assert abs(model.intercept - direct[0]) < 1e-5
    assert np.abs(model.coefficients - direct[1:]).max() < 1e-5


def test_ridge_matches_normal_equation_oracle():
    rng = np.random.default_rng(21)
    basis = PolynomialBasis.create(3, 1)
    pts = rng.random((25, 3))
    X = expand_design(pts, basis)
    y = rng.normal(size=25)
    lam = 0.3
    model = fit_model(X, y, lam, 2, basis)

    features = X[:, 1:]
    mu, sigma = features.mean(0), features.std(0)
    standardized = (features - mu) / sigma
    centered = y - y.mean()
    beta_std = np.linalg.solve(
        standardized.T @ standardized / 25 + 2 * lam * np.eye(3),
        standardized.T @ centered / 25,
    )
    assert np.abs(model.coefficients - beta_std / sigma).max() < 1e-10
    assert model.intercept == pytest.approx(y.mean() - (beta_std / sigma) @ mu)


def test_ridge_shrinks_toward_zero():
    X, y, basis, _ = make_fit(40, 2, 2, lambda p: p[:, 0] - 0.5 * p[:, 1], seed=2)
    loose = fit_model(X, y, 0.0, 2, basis)
    tight = fit_model(X, y, 10.0, 2, basis)
    assert np.abs(tight.coefficients).sum() < np.abs(loose.coefficients).sum()


def test_zero_variance_columns_dropped():
    basis = PolynomialBasis.create(2, 2)
    pts = np.column_stack([np.random.default_rng(0).random(20), np.full(20, 0.4)])
    X = expand_design(pts, basis)
    y = pts[:, 0] * 3.0
    model = fit_model(X, y, 0.0, 1, basis)
    # every term involving only the constant column has zero variance
    slot = basis.terms[1:].index((0, 1))
    assert model.coefficients[slot] == 0.0
    assert model.feature_scales[slot] == 0.0
    pred = model.predict(np.column_stack([pts[:5, 0], np.full(5, 0.4)]))
    assert np.abs(pred - y[:5]).max() < 1e-5


def test_fit_rejects_bad_inputs():
    basis = PolynomialBasis.create(2, 1)
    X = expand_design(np.random.default_rng(0).random((4, 2)), basis)
    y = np.zeros(4)
    with pytest.raises(ValueError, match="2 rows"):
        fit_model(X[:1], y[:1], 0.0, 1, basis)
    with pytest.raises(ValueError, match="lam"):
        fit_model(X, y, -0.1, 1, basis)
    with pytest.raises(ValueError, match="penalty_order"):
        fit_model(X, y, 0.0, 3, basis)


def test_lambda_grid_shape():
    grid = lambda_grid(2.0)
    assert len(grid) == 50
    assert grid[0] == pytest.approx(2.0)
    assert grid[-1] == pytest.approx(2.0e-4)
    assert np.all(np.diff(grid) < 0)
    assert list(lambda_grid(0.0)) == [0.0]


def test_cv_constant_response_returns_zero_lambda():
    # constant y means lambda_max = 0, the singleton-grid case
    basis = PolynomialBasis.create(2, 2)
    pts = np.random.default_rng(0).random((20, 2))
    X = expand_design(pts, basis)
    y = np.full(20, 0.7)
    assert select_lambda_cv(X, y, 5) == 0.0


@pytest.mark.parametrize("seed", [1, 4, 5])
def test_cv_pure_noise_selects_all_zero_model(seed):
    rng = np.random.default_rng(seed)
    basis = PolynomialBasis.create(2, 2)
    pts = rng.random((40, 2))
    y = rng.normal(size=40)
    X = expand_design(pts, basis)
    lam = select_lambda_cv(X, y, 5)
    model = fit_model(X, y, lam, 1, basis)
    assert model.support_size == 0


def test_cv_noiseless_quadratic_yields_accurate_model():
    rng = np.random.default_rng(1)
    basis = PolynomialBasis.create(2, 2)
    pts = rng.random((40, 2))

    def truth(p):
        return 0.2 + 1.5 * p[:, 0] - 0.7 * p[:, 0] ** 2

    y = truth(pts)
    X = expand_design(pts, basis)
    lam = select_lambda_cv(X, y, 5)
    model = fit_model(X, y, lam, 1, basis)
    held = rng.random((200, 2))
    rmse = float(np.sqrt(np.mean((model.predict(held) - truth(held)) ** 2)))
    assert rmse <= 1e-3


def test_cv_reduces_folds_with_warning():
    basis = PolynomialBasis.create(1, 1)
    pts = np.random.default_rng(0).random((4, 1))
    X = expand_design(pts, basis)
    y = pts[:, 0] * 2
    with pytest.warns(UserWarning, match="leave-one-out"):
        lam = select_lambda_cv(X, y, 10)
    assert lam >= 0.0


def test_cv_rejects_fewer_than_two_folds():
    basis = PolynomialBasis.create(1, 1)
    X = expand_design(np.random.default_rng(0).random((10, 1)), basis)
    with pytest.raises(ValueError, match="folds"):
        select_lambda_cv(X, np.zeros(10), 1)


def test_loo_errors_zero_on_constant_response():
    X, y, basis, _ = make_fit(12, 2, 2, lambda p: np.full(len(p), 0.4))
    model = fit_model(X, np.full(12, 0.4), 0.0, 1, basis)
    errors, intercept_error = loo_standard_errors(X, np.full(12, 0.4), model)
    assert np.all(errors == 0.0)
    assert intercept_error == pytest.approx(0.0, abs=1e-12)


def test_loo_errors_vanish_on_exact_linear_data():
    rng = np.random.default_rng(3)
    basis = PolynomialBasis.create(1, 1)
    pts = rng.random((4, 1))
    X = expand_design(pts, basis)
    y = 2.0 * pts[:, 0]
    model = fit_model(X, y, 0.0, 1, basis)
    errors, _ = loo_standard_errors(X, y, model)
    assert errors[0] <= 1e-9


def test_loo_errors_zero_outside_support():
    rng = np.random.default_rng(6)
    basis = PolynomialBasis.create(2, 2)
    pts = rng.random((20, 2))
    X = expand_design(pts, basis)
    y = 3.0 * pts[:, 0] + rng.normal(0, 0.05, 20)
    lam = select_lambda_cv(X, y, 5)
    model = fit_model(X, y, lam, 1, basis)
    errors, _ = loo_standard_errors(X, y, model)
    support = model.support()
    assert np.all(errors[~support] == 0.0)
    if support.any():
        assert np.all(errors[support] >= 0.0)


def test_loo_errors_warn_below_three_rows():
    basis = PolynomialBasis.create(1, 1)
    X = expand_design(np.array([[0.1], [0.9]]), basis)
    y = np.array([0.0, 1.0])
    model = fit_model(X, y, 0.0, 1, basis)
    with pytest.warns(UserWarning, match="3 rows"):
        errors, intercept_error = loo_standard_errors(X, y, model)
    assert np.all(errors == 0.0) and intercept_error == 0.0


def test_loo_refits_have_one_column_per_support_term():
    rng = np.random.default_rng(8)
    basis = PolynomialBasis.create(2, 2)
    pts = rng.random((10, 2))
    X = expand_design(pts, basis)
    y = rng.random(10)
    support = np.array([True, False, True, False, False])
    refits = loo_refit_coefficients(X, y, support)
    assert refits.shape == (10, 3)


def test_perturb_identity_when_errors_zero():
    X, y, basis, _ = make_fit(20, 2, 2, lambda p: p[:, 0])
    model = fit_model(X, np.random.default_rng(0).random(20), 0.01, 1, basis)
    perturbed = perturb_model(model, np.random.default_rng(5))
    assert np.array_equal(perturbed.coefficients, model.coefficients)
    assert perturbed.intercept == model.intercept


def test_perturb_stays_within_error_bounds():
    basis = PolynomialBasis.create(1, 1)
    model = RegressionModel(
        basis=basis,
        intercept=0.5,
        coefficients=np.array([1.0]),
        standard_errors=np.array([0.2]),
        intercept_se=0.1,
        feature_means=np.zeros(1),
        feature_scales=np.ones(1),
        lam=0.0,
        penalty_order=1,
    )
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        perturbed = perturb_model(model, rng)
        assert 0.8 <= perturbed.coefficients[0] <= 1.2
        assert 0.4 <= perturbed.intercept <= 0.6


def test_perturb_keeps_zero_coefficients_zero_and_support_fixed():
    basis = PolynomialBasis.create(2, 1)
    model = RegressionModel(
        basis=basis,
        intercept=0.0,
        coefficients=np.array([0.7, 0.0]),
        standard_errors=np.array([0.1, 0.0]),
        intercept_se=0.0,
        feature_means=np.zeros(2),
        feature_scales=np.ones(2),
        lam=0.1,
        penalty_order=1,
    )
    rng = np.random.default_rng(1)
    for _ in range(200):
        perturbed = perturb_model(model, rng)
        assert perturbed.coefficients[1] == 0.0
        assert np.array_equal(perturbed.support(), model.support())


def test_predict_constant_model():
    basis = PolynomialBasis.create(2, 2)
    model = RegressionModel(
        basis=basis,
        intercept=0.3,
        coefficients=np.zeros(5),
        standard_errors=np.zeros(5),
        intercept_se=0.0,
        feature_means=np.zeros(5),
        feature_scales=np.ones(5),
        lam=0.0,
        penalty_order=1,
    )
    assert model.predict([0.1, 0.9]) == pytest.approx(0.3)
    assert model.predict([[0.0, 0.0], [1.0, 1.0]]) == pytest.approx([0.3, 0.3])


def test_predict_linear_at_boundary():
    basis = PolynomialBasis.create(2, 1)
    model = RegressionModel(
        basis=basis,
        intercept=0.1,
        coefficients=np.array([0.5, 0.0]),
        standard_errors=np.zeros(2),
        intercept_se=0.0,
        feature_means=np.zeros(2),
        feature_scales=np.ones(2),
        lam=0.0,
        penalty_order=1,
    )
    assert model.predict([1.0, 0.3]) == pytest.approx(0.6)


def test_predict_linear_in_coefficients():
    basis = PolynomialBasis.create(2, 3)
    rng = np.random.default_rng(4)

    def make(intercept, coefficients):
        return RegressionModel(
            basis=basis,
            intercept=intercept,
            coefficients=coefficients,
            standard_errors=np.zeros(len(basis) - 1),
            intercept_se=0.0,
            feature_means=np.zeros(len(basis) - 1),
            feature_scales=np.ones(len(basis) - 1),
            lam=0.0,
            penalty_order=1,
        )

    a = make(0.2, rng.normal(size=len(basis) - 1))
    b = make(-0.1, rng.normal(size=len(basis) - 1))
    both = make(a.intercept + b.intercept, a.coefficients + b.coefficients)
    for _ in range(20):
        point = rng.random(2)
        assert both.predict(point) == pytest.approx(a.predict(point) + b.predict(point))


def test_predict_on_sparse_interaction_model():
    # four-variable model with one cross term, checked against a manual sum
    basis = PolynomialBasis.create(4, 2)
    coefficients = np.zeros(len(basis) - 1)
    terms = list(basis.terms[1:])
    coefficients[terms.index((1, 0, 0, 0))] = -6.67e-3
    coefficients[terms.index((0, 1, 0, 0))] = -8.86e-3
    coefficients[terms.index((0, 0, 1, 0))] = 6.04e-4
    coefficients[terms.index((0, 0, 1, 1))] = 1.20e-5
    model = RegressionModel(
        basis=basis,
        intercept=0.226,
        coefficients=coefficients,
        standard_errors=np.zeros(len(basis) - 1),
        intercept_se=0.0,
        feature_means=np.zeros(len(basis) - 1),
        feature_scales=np.ones(len(basis) - 1),
        lam=0.0,
        penalty_order=1,
    )
    assert model.predict([0.0, 0.0, 0.0, 0.0]) == pytest.approx(0.226)
    point = [0.3, 0.8, 0.5, 0.4]
    expected = (
        0.226
        - 6.67e-3 * 0.3
        - 8.86e-3 * 0.8
        + 6.04e-4 * 0.5
        + 1.20e-5 * 0.5 * 0.4
    )
    assert model.predict(point) == pytest.approx(expected, rel=1e-12)


def raw_poly_value(intercept, terms, raw_point):
    total = intercept
    for exponents, coefficient in terms.items():
        total += coefficient * np.prod(np.asarray(raw_point, float) ** exponents)
    return total


def test_map_polynomial_to_raw_is_equivalent():
    space = ParameterSpace(
        (ParameterSpec("eta", 0.5, 100.0), ParameterSpec("rate", -1.0, 1.0))
    )
    rng = np.random.default_rng(13)
    basis = PolynomialBasis.create(2, 3)
    pts = rng.random((40, 2))
    X = expand_design(pts, basis)
    y = 0.4 + pts[:, 0] - 0.6 * pts[:, 1] ** 2 + 0.3 * pts[:, 0] * pts[:, 1]
    model = fit_model(X, y, 1e-4, 1, basis)
    raw_intercept, raw_terms = map_polynomial_to_raw(
        basis, model.intercept, model.coefficients, space
    )
    for _ in range(25):
        unit = rng.random(2)
        raw = space.denormalize(unit)
        assert raw_poly_value(raw_intercept, raw_terms, raw) == pytest.approx(
            model.predict(unit), rel=1e-9, abs=1e-9
        )


def test_map_polynomial_identity_on_unit_bounds():
    space = ParameterSpace((ParameterSpec("a", 0.0, 1.0), ParameterSpec("b", 0.0, 1.0)))
    basis = PolynomialBasis.create(2, 2)
    coefficients = np.array([0.5, -0.2, 0.0, 0.1, 0.0])
    raw_intercept, raw_terms = map_polynomial_to_raw(basis, 0.3, coefficients, space)
    assert raw_intercept == pytest.approx(0.3)
    expected = {
        exps: c for exps, c in zip(basis.terms[1:], coefficients) if c != 0.0
    }
    assert set(raw_terms) == set(expected)
    for key, value in expected.items():
        assert raw_terms[key] == pytest.approx(value)
