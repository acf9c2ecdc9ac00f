"""Fit sparse polynomial surfaces to synthetic data, by hand.

Shows the pieces the tuner composes every iteration: expand points into a
monomial design, pick the penalty weight by cross-validation, read off the
retained terms with their leave-one-out standard errors, and draw a few
perturbed copies of the surface.

Run:
    python demos/02_surface_fitting.py [--seed N]
"""

import argparse
from dataclasses import replace

import numpy as np

from polytune import (
    PolynomialBasis,
    expand_design,
    fit_model,
    loo_standard_errors,
    perturb_model,
    select_lambda_cv,
)


def truth(points: np.ndarray) -> np.ndarray:
    # sparse ground truth: only three of the fifteen order-4 terms are real
    return 0.3 + 1.2 * points[:, 0] - 0.9 * points[:, 0] ** 2 + 0.4 * points[:, 1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    points = rng.random((60, 2))
    noisy = truth(points) + rng.normal(0.0, 0.02, size=60)

    basis = PolynomialBasis.create(2, 4)
    X = expand_design(points, basis)
    print(f"design: {X.shape[0]} rows x {X.shape[1]} monomials (order <= 4, k = 2)")

    lam = select_lambda_cv(X, noisy, folds=5)
    model = fit_model(X, noisy, lam, 1, basis)
    errors, intercept_error = loo_standard_errors(X, noisy, model)

    print(f"cross-validated lambda: {lam:.5g}")
    print(f"retained terms: {model.support_size} of {len(basis) - 1}")
    print()
    print(f"  intercept   {model.intercept:+.4f}  (se {intercept_error:.4f})")
    for exponents, coefficient, error in zip(
        basis.terms[1:], model.coefficients, errors
    ):
        if coefficient != 0.0:
            label = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}"
                for i, e in enumerate(exponents)
                if e > 0
            )
            print(f"  {label:<10s}  {coefficient:+.4f}  (se {error:.4f})")

    held = rng.random((500, 2))
    rmse = float(np.sqrt(np.mean((model.predict(held) - truth(held)) ** 2)))
    print()
    print(f"held-out rmse against the noise-free truth: {rmse:.5f}")

    print()
    print("three perturbed copies (coefficients jittered within +-1 se):")
    model_with_errors = replace(
        model, standard_errors=errors, intercept_se=intercept_error
    )
    probe = np.array([0.5, 0.5])
    print(f"  base surface at (0.5, 0.5): {model_with_errors.predict(probe):.4f}")
    for draw in range(3):
        copy = perturb_model(model_with_errors, rng)
        print(f"  perturbed copy {draw + 1} at (0.5, 0.5): {copy.predict(probe):.4f}")


if __name__ == "__main__":
    main()
