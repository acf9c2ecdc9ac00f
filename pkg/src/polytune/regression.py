"""Sparse polynomial response surfaces fit by penalized least squares.

Quality summaries are modeled as low-order polynomials over the unit cube.
An L1 penalty (cyclic coordinate descent) gives sparse, readable surfaces;
an L2 penalty is available as an alternative. Coefficient uncertainty comes
from leave-one-out refits of the selected terms and feeds the perturbed
copies used during candidate search.

The fitting objective is (1/(2n)) * RSS + lam * ||beta||_1 for penalty
order 1 and (1/(2n)) * RSS + lam * ||beta||_2^2 for penalty order 2, with
the intercept never penalized. Non-constant features are standardized to
zero mean and unit population standard deviation for fitting; stored
coefficients are always mapped back to the plain monomial basis.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace
from math import comb
from typing import Sequence

import numba
import numpy as np

from .space import ParameterSpace

SUPPORT_TOL = 1e-9
VARIANCE_TOL = 1e-12
CD_TOL = 1e-7
CD_MAX_SWEEPS = 100_000
LAMBDA_GRID_SIZE = 50
LAMBDA_GRID_RATIO = 1e-4
LOO_RIDGE_FALLBACK = 1e-8


@dataclass(frozen=True)
class PolynomialBasis:
    """All monomials of total degree <= order in k variables, constant first.

    Terms are exponent vectors, ordered by total degree and then by the
    generation order of combinations_with_replacement, so the layout is
    deterministic and the constant term is always index 0.
    """

    k: int
    order: int
    terms: tuple[tuple[int, ...], ...]

    @classmethod
    def create(cls, k: int, order: int) -> "PolynomialBasis":
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        terms: list[tuple[int, ...]] = []
        for degree in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(k), degree):
                exponents = [0] * k
                for var in combo:
                    exponents[var] += 1
                terms.append(tuple(exponents))
        return cls(k=k, order=order, terms=tuple(terms))

    def __len__(self) -> int:
        return len(self.terms)


def expand_design(
    points: Sequence[Sequence[float]] | np.ndarray, basis: PolynomialBasis
) -> np.ndarray:
    """Evaluate every basis monomial at every point.

    Args:
        points: array-like of shape (m, k) or (k,).
        basis: which monomials to evaluate.

    Returns:
        Design matrix of shape (m, len(basis)); column 0 is all ones.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != basis.k:
        raise ValueError(
            f"points have {pts.shape[1]} coordinates, basis expects {basis.k}"
        )
    exponents = np.asarray(basis.terms, dtype=float)
    return np.prod(pts[:, None, :] ** exponents[None, :, :], axis=2)


def expand_basis(point: Sequence[float] | np.ndarray, basis: PolynomialBasis) -> np.ndarray:
    """Monomial values at a single point, leading 1 included."""
    return expand_design(point, basis)[0]


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """A fitted polynomial surface over the unit cube.

    `coefficients` aligns with basis.terms[1:]; the constant term lives in
    `intercept`. Standard errors stay zero until loo_standard_errors fills
    them in. `feature_means`/`feature_scales` record the standardization
    used during fitting (scale 0 marks a dropped zero-variance column).
    """

    basis: PolynomialBasis
    intercept: float
    coefficients: np.ndarray
    standard_errors: np.ndarray
    intercept_se: float
    feature_means: np.ndarray
    feature_scales: np.ndarray
    lam: float
    penalty_order: int

    def predict(
        self, points: Sequence[float] | Sequence[Sequence[float]] | np.ndarray
    ) -> float | np.ndarray:
        """Surface value at one point (scalar out) or a batch (vector out)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        design = expand_design(pts, self.basis)
        values = self.intercept + design[:, 1:] @ self.coefficients
        return float(values[0]) if single else values

    def support(self) -> np.ndarray:
        """Boolean mask over non-constant terms with |coefficient| above tolerance."""
        return np.abs(self.coefficients) > SUPPORT_TOL

    @property
    def support_size(self) -> int:
        return int(self.support().sum())


@numba.njit(cache=True)
def _cd_residual_kernel(columns, y, lam, beta, tol, max_sweeps, objectives):
    """Cyclic coordinate descent, residual form, objective traced per sweep.

    `columns` is the design transposed. Mutates `beta` in place; returns
    the sweep count. Only used when a caller wants the per-sweep objective
    trace, so clarity beats speed here.
    """
    p, n = columns.shape
    col_norms = np.empty(p)
    for j in range(p):
        total = 0.0
        for i in range(n):
            total += columns[j, i] * columns[j, i]
        col_norms[j] = total / n
    residual = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            b = beta[j]
            for i in range(n):
                residual[i] -= columns[j, i] * b
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        max_delta = 0.0
        for j in range(p):
            norm = col_norms[j]
            if norm == 0.0:
                continue
            old = beta[j]
            rho = 0.0
            for i in range(n):
                rho += columns[j, i] * residual[i]
            rho = rho / n + norm * old
            if rho > lam:
                new = (rho - lam) / norm
            elif rho < -lam:
                new = (rho + lam) / norm
            else:
                new = 0.0
            if new != old:
                diff = old - new
                for i in range(n):
                    residual[i] += columns[j, i] * diff
                beta[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        rss = 0.0
        for i in range(n):
            rss += residual[i] * residual[i]
        penalty = 0.0
        for j in range(p):
            penalty += abs(beta[j])
        objectives[sweeps - 1] = 0.5 * rss / n + lam * penalty
        if max_delta < tol:
            break
    return sweeps


@numba.njit(cache=True)
def _cd_gram_kernel(gram, moment, lam, beta, tol, max_sweeps):
    """Cyclic coordinate descent on precomputed second moments.

    gram = X'X/n and moment = X'y/n, so one sweep costs O(p^2) regardless
    of the row count; the iterates match the residual form exactly up to
    floating-point rounding. Mutates `beta` in place.
    """
    p = gram.shape[0]
    gradient = moment.copy()
    for j in range(p):
        if beta[j] != 0.0:
            b = beta[j]
            for l in range(p):
                gradient[l] -= gram[l, j] * b
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            norm = gram[j, j]
            if norm == 0.0:
                continue
            old = beta[j]
            rho = gradient[j] + norm * old
            if rho > lam:
                new = (rho - lam) / norm
            elif rho < -lam:
                new = (rho + lam) / norm
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for l in range(p):
                    gradient[l] -= gram[l, j] * delta
                beta[j] = new
                step = abs(delta)
                if step > max_delta:
                    max_delta = step
        if max_delta < tol:
            break


def _lasso_cd(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    beta0: np.ndarray | None = None,
    sweep_objectives: list[float] | None = None,
) -> np.ndarray:
    """Cyclic coordinate descent on (1/(2n))*||y - X @ beta||^2 + lam*||beta||_1.

    Features and y are assumed centered. Stops when no coefficient moves
    more than CD_TOL in a full sweep.
    """
    n, p = X.shape
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if sweep_objectives is not None:
        objectives = np.empty(CD_MAX_SWEEPS)
        sweeps = _cd_residual_kernel(
            np.ascontiguousarray(X.T), np.asarray(y, dtype=float), float(lam),
            beta, CD_TOL, CD_MAX_SWEEPS, objectives,
        )
        sweep_objectives.extend(float(v) for v in objectives[:sweeps])
        return beta
    gram = X.T @ X / n
    moment = X.T @ y / n
    _cd_gram_kernel(gram, moment, float(lam), beta, CD_TOL, CD_MAX_SWEEPS)
    return beta


def _ridge(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of (1/(2n))*||y - X @ beta||^2 + lam*||beta||_2^2."""
    n, p = X.shape
    gram = X.T @ X / n + 2.0 * lam * np.eye(p)
    rhs = X.T @ y / n
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(gram, rhs, rcond=None)[0]


def _standardize(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center/scale columns; constant columns are zeroed out (scale 0).

    A bit-identical constant column can still show a standard deviation of
    a few ulps because the mean itself rounds, so constancy is judged
    against a tolerance scaled by the column's magnitude.
    """
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    active = scales > VARIANCE_TOL * (1.0 + np.abs(means))
    standardized = np.zeros_like(features)
    standardized[:, active] = (features[:, active] - means[active]) / scales[active]
    return standardized, means, np.where(active, scales, 0.0)


def fit_model(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    penalty_order: int,
    basis: PolynomialBasis,
    sweep_objectives: list[float] | None = None,
) -> RegressionModel:
    """Fit a penalized polynomial surface on an expanded design.

    Args:
        X: expanded design of shape (n, len(basis)), constant column first.
        y: responses, shape (n,).
        lam: penalty weight, >= 0.
        penalty_order: 1 for the L1 penalty, 2 for the squared L2 penalty.
        basis: the monomial layout X was expanded with.
        sweep_objectives: optional list that collects the objective value
            after each coordinate-descent sweep (penalty order 1 only).

    Returns:
        RegressionModel with coefficients in the plain monomial basis and
        all standard errors zero.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(basis):
        raise ValueError(f"design has shape {X.shape}, expected (n, {len(basis)})")
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n < 2:
        raise ValueError(f"need at least 2 rows to fit, got {n}")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if penalty_order not in (1, 2):
        raise ValueError(f"penalty_order must be 1 or 2, got {penalty_order}")

    features = X[:, 1:]
    standardized, means, scales = _standardize(features)
    active = scales > 0
    y_mean = float(y.mean())
    centered = y - y_mean

    beta_std = np.zeros(features.shape[1])
    if active.any():
        if penalty_order == 1:
            beta_std[active] = _lasso_cd(
                standardized[:, active], centered, lam, sweep_objectives=sweep_objectives
            )
        else:
            beta_std[active] = _ridge(standardized[:, active], centered, lam)

    coefficients = np.zeros(features.shape[1])
    coefficients[active] = beta_std[active] / scales[active]
    intercept = y_mean - float(coefficients @ means)
    return RegressionModel(
        basis=basis,
        intercept=intercept,
        coefficients=coefficients,
        standard_errors=np.zeros(features.shape[1]),
        intercept_se=0.0,
        feature_means=means,
        feature_scales=scales,
        lam=float(lam),
        penalty_order=penalty_order,
    )


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest L1 weight at which every non-constant coefficient is zero."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    standardized, _, scales = _standardize(X[:, 1:])
    if not (scales > 0).any():
        return 0.0
    mean = float(y.mean())
    # a constant response centers to rounding noise, not to exact zeros
    if float(y.std()) <= VARIANCE_TOL * (1.0 + abs(mean)):
        return 0.0
    # slice exactly like the fit path so the boundary case rounds identically
    active_columns = standardized[:, scales > 0]
    correlations = active_columns.T @ (y - mean) / X.shape[0]
    return float(np.abs(correlations).max())


def lambda_grid(lam_max: float) -> np.ndarray:
    """Descending geometric grid from lam_max down to lam_max * 1e-4."""
    if lam_max <= 0:
        return np.array([0.0])
    return np.geomspace(lam_max, lam_max * LAMBDA_GRID_RATIO, LAMBDA_GRID_SIZE)


def _path_fold_mse(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    y_test: np.ndarray,
    grid: np.ndarray,
    penalty_order: int,
) -> np.ndarray:
    """Held-out MSE along the penalty grid, warm-starting down the path."""
    features = X_train[:, 1:]
    standardized, means, scales = _standardize(features)
    active = scales > 0
    y_mean = float(y_train.mean())
    centered = y_train - y_mean

    test_std = np.zeros((X_test.shape[0], features.shape[1]))
    test_std[:, active] = (X_test[:, 1:][:, active] - means[active]) / scales[active]
    test_active = test_std[:, active]

    mse = np.empty(len(grid))
    train_active = standardized[:, active]
    n_train = train_active.shape[0]
    gram = train_active.T @ train_active / n_train
    moment = train_active.T @ centered / n_train
    beta = np.zeros(int(active.sum()))
    for g, lam in enumerate(grid):
        if active.any():
            if penalty_order == 1:
                # warm start: beta carries over down the descending grid
                _cd_gram_kernel(gram, moment, float(lam), beta, CD_TOL, CD_MAX_SWEEPS)
            else:
                beta = _ridge(train_active, centered, lam)
            predictions = y_mean + test_active @ beta
        else:
            predictions = np.full(X_test.shape[0], y_mean)
        errors = y_test - predictions
        mse[g] = float(errors @ errors) / len(y_test)
    return mse


def select_lambda_cv(
    X: np.ndarray, y: np.ndarray, folds: int, penalty_order: int = 1
) -> float:
    """Pick the penalty weight by k-fold cross-validation.

    Rows are assigned to folds round-robin (row i -> fold i mod folds); each
    fold's grid is fit as one warm-started path. The winner minimizes the
    mean held-out MSE, ties going to the larger penalty.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if n < folds:
        warnings.warn(
            f"only {n} rows for {folds} folds; falling back to leave-one-out",
            stacklevel=2,
        )
        folds = n
    grid = lambda_grid(lambda_max(X, y))
    if len(grid) == 1:
        return float(grid[0])
    fold_ids = np.arange(n) % folds
    fold_mse = np.empty((folds, len(grid)))
    for fold in range(folds):
        test = fold_ids == fold
        train = ~test
        fold_mse[fold] = _path_fold_mse(
            X[train], y[train], X[test], y[test], grid, penalty_order
        )
    mean_mse = fold_mse.mean(axis=0)
    # grid is descending, so the first argmin is the largest penalty among ties
    return float(grid[int(np.argmin(mean_mse))])


def loo_refit_coefficients(
    X: np.ndarray, y: np.ndarray, support: np.ndarray
) -> np.ndarray:
    """Unpenalized least-squares refits of the supported terms, one row out each.

    Args:
        X: expanded design, shape (n, T), constant column first.
        y: responses, shape (n,).
        support: boolean mask over the T-1 non-constant terms.

    Returns:
        Array of shape (n, 1 + sum(support)); column 0 is the intercept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    design = np.column_stack([np.ones(n), X[:, 1:][:, support]])
    p = design.shape[1]
    refits = np.empty((n, p))
    for i in range(n):
        rows = np.ones(n, dtype=bool)
        rows[i] = False
        sub = design[rows]
        gram = sub.T @ sub
        rhs = sub.T @ y[rows]
        if np.linalg.matrix_rank(sub) < p:
            refits[i] = np.linalg.solve(gram + LOO_RIDGE_FALLBACK * np.eye(p), rhs)
            continue
        try:
            refits[i] = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            refits[i] = np.linalg.solve(gram + LOO_RIDGE_FALLBACK * np.eye(p), rhs)
    return refits


def loo_standard_errors(
    X: np.ndarray, y: np.ndarray, model: RegressionModel
) -> tuple[np.ndarray, float]:
    """Leave-one-out standard errors for a fitted model's retained terms.

    Each supported coefficient's error is the ddof=1 standard deviation of
    its value across the n leave-one-out refits; dropped terms keep an
    error of exactly 0.

    Returns:
        (per-term errors aligned with model.coefficients, intercept error).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    errors = np.zeros(len(model.coefficients))
    if n < 3:
        warnings.warn(
            f"need at least 3 rows for leave-one-out errors, got {n}; "
            "setting all standard errors to 0",
            stacklevel=2,
        )
        return errors, 0.0
    support = model.support()
    refits = loo_refit_coefficients(X, y, support)
    spreads = refits.std(axis=0, ddof=1)
    errors[support] = spreads[1:]
    return errors, float(spreads[0])


def perturb_model(model: RegressionModel, rng: np.random.Generator) -> RegressionModel:
    """Copy of the surface with each retained coefficient jittered uniformly
    within +- its standard error; terms at zero stay at zero."""
    support = model.support()
    coefficients = model.coefficients.copy()
    count = int(support.sum())
    if count:
        offsets = rng.uniform(-1.0, 1.0, size=count) * model.standard_errors[support]
        coefficients[support] += offsets
    intercept = model.intercept + float(rng.uniform(-1.0, 1.0)) * model.intercept_se
    return replace(model, intercept=intercept, coefficients=coefficients)


def map_polynomial_to_raw(
    basis: PolynomialBasis,
    intercept: float,
    coefficients: np.ndarray,
    space: ParameterSpace,
) -> tuple[float, dict[tuple[int, ...], float]]:
    """Re-express a unit-cube polynomial in raw parameter units.

    Substitutes x_l = (r_l - lower_l) / width_l into every monomial and
    collects terms by exponent vector.

    Returns:
        (raw-unit intercept, {exponent vector: raw-unit coefficient}) with
        exactly-zero collected coefficients dropped.
    """
    if basis.k != space.k:
        raise ValueError(f"basis is {basis.k}-dimensional, space is {space.k}")
    lowers = space.lowers
    widths = space.widths
    collected: dict[tuple[int, ...], float] = {}
    zero_key = (0,) * basis.k
    unit_terms = [(zero_key, float(intercept))] + [
        (exps, float(c)) for exps, c in zip(basis.terms[1:], coefficients) if c != 0.0
    ]
    for exponents, coefficient in unit_terms:
        expansion: dict[tuple[int, ...], float] = {zero_key: coefficient}
        for axis, power in enumerate(exponents):
            if power == 0:
                continue
            scale = widths[axis] ** power
            grown: dict[tuple[int, ...], float] = {}
            for mono, value in expansion.items():
                for j in range(power + 1):
                    weight = value * comb(power, j) * (-lowers[axis]) ** (power - j) / scale
                    key = list(mono)
                    key[axis] += j
                    key_t = tuple(key)
                    grown[key_t] = grown.get(key_t, 0.0) + weight
            expansion = grown
        for key_t, value in expansion.items():
            collected[key_t] = collected.get(key_t, 0.0) + value
    raw_intercept = collected.pop(zero_key, 0.0)
    return raw_intercept, {k: v for k, v in collected.items() if v != 0.0}
