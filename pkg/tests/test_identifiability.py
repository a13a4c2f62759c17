"""Tests for the differential-condition residual and the log-mix-lin-exp family check."""

from dataclasses import replace

import numpy as np
import pytest

from components.discovery import infer_direction
from components.identifiability import (
    check_derivatives,
    condition1_residual,
    default_grid,
    gaussian_log_density,
    linear_gaussian_triple,
    log_mix_lin_exp_triple,
    make_grid,
    polynomial_gaussian_triple,
    sample_triple,
    triple_from_keyvalue,
    verify_example7_constraint,
)
from components.regression import fit_linear, make_regression_method
from utils.error_handler import InvalidInputError

GAMMA = (-1.0, -1.0, -0.5, 0.0)
MATCHED_C = (-1.0, 1.0, 0.5, 0.0)


def test_linear_gaussian_residual_vanishes():
    t = linear_gaussian_triple(a=1.5, b=-0.3)
    field = condition1_residual(t, default_grid(t))
    assert field.skipped == 0
    assert field.max_abs() < 1e-8


def test_cubic_gaussian_residual_is_large():
    t = polynomial_gaussian_triple([0.0, 0.0, 0.0, 1.0])
    field = condition1_residual(t, make_grid((-2.0, 2.0), (-2.0, 2.0), 21))
    assert field.skipped >= 1
    assert np.all(np.isnan(field.residuals[~field.admissible]))
    assert field.max_abs() > 100.0


def test_cubic_residual_closed_form():
    # f = x^3 with standard Gaussian input and noise: r = 2/x - 36 x^3 - 6 (y - x^3)
    t = polynomial_gaussian_triple([0.0, 0.0, 0.0, 1.0])
    grid = make_grid((0.5, 1.5), (-1.0, 1.0), 5)
    x, y = grid[:, 0], grid[:, 1]
    expected = 2 / x - 36 * x ** 3 - 6 * (y - x ** 3)
    assert np.allclose(condition1_residual(t, grid).residuals, expected, rtol=1e-10)


def test_matched_log_mix_lin_exp_residual_vanishes():
    t = log_mix_lin_exp_triple(1.0, 0.0, MATCHED_C, GAMMA)
    field = condition1_residual(t, default_grid(t))
    assert field.skipped == 0
    assert field.max_abs() < 1e-6


def test_perturbed_log_mix_lin_exp_residual_is_not_zero():
    t = log_mix_lin_exp_triple(1.0, 0.0, MATCHED_C, GAMMA)
    base = condition1_residual(t, default_grid(t)).max_abs()
    perturbed_triple = log_mix_lin_exp_triple(1.0, 0.0, (-1.0, 1.1, 0.5, 0.0), GAMMA)
    perturbed = condition1_residual(perturbed_triple, default_grid(perturbed_triple)).max_abs()
    assert perturbed > 1e-3
    assert perturbed >= 1e3 * base


def test_verify_constraint_matched_parameters():
    check = verify_example7_constraint(1.0, 0.0, MATCHED_C, GAMMA)
    assert check.holds
    assert check.diagnostics["c2_plus_a_gamma2"] == 0.0
    assert check.diagnostics["c3_equals_a_gamma3"] == 0.0
    assert check.diagnostics["delta2"] == 1.0
    assert check.diagnostics["delta3"] == pytest.approx(1.0)


def test_verify_constraint_unmatched_parameters():
    check = verify_example7_constraint(1.0, 0.0, (-1.0, 2.0, 0.5, 0.0), GAMMA)
    assert not check.holds
    assert check.diagnostics["c2_plus_a_gamma2"] == pytest.approx(1.0)


def test_verify_constraint_lists_every_violation():
    with pytest.raises(InvalidInputError) as caught:
        verify_example7_constraint(0.0, 0.0, (1.0, 1.0, -0.5, 0.0), GAMMA)
    message = str(caught.value)
    assert "c1 < 0" in message and "c2*c3 > 0" in message and "a != 0" in message


def test_check_derivatives_accepts_analytic_families():
    x = np.linspace(-2.0, 0.0, 11)
    noise = np.linspace(0.0, 2.0, 11)
    gaps = check_derivatives(log_mix_lin_exp_triple(1.0, 0.0, MATCHED_C, GAMMA), x, noise)
    assert set(gaps) == {"f1", "f2", "f3", "xi2", "xi3", "nu1", "nu2", "nu3"}
    assert max(gaps.values()) <= 1e-4
    check_derivatives(polynomial_gaussian_triple([0.0, 1.0, 0.0, 0.5]), x, noise)


def test_check_derivatives_rejects_wrong_derivative():
    t = linear_gaussian_triple(a=2.0)
    broken = replace(t, derivatives={**t.derivatives, "f1": lambda s: np.ones_like(s)})
    with pytest.raises(InvalidInputError, match="f1"):
        check_derivatives(broken, np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))


def test_central_difference_mode_matches_analytic():
    t = polynomial_gaussian_triple([0.0, 0.0, 0.0, 1.0])
    grid = make_grid((0.5, 2.0), (-2.0, 2.0), 7)
    analytic = condition1_residual(t, grid)
    numeric = condition1_residual(t.with_mode("central-difference"), grid)
    assert np.all(np.abs(numeric.residuals - analytic.residuals) <= 1e-5 * analytic.scale)


def test_analytic_mode_requires_all_derivatives():
    t = linear_gaussian_triple()
    with pytest.raises(InvalidInputError):
        replace(t, derivatives={"f1": t.derivatives["f1"]})
    with pytest.raises(InvalidInputError):
        t.with_mode("spline")
    with pytest.raises(InvalidInputError):
        gaussian_log_density(sd=0.0)


def test_triple_from_keyvalue():
    entries = {
        "f": "polynomial",
        "f.coefficients": "0,1",
        "xi": "gaussian",
        "nu": "log-mix-lin-exp",
        "nu.params": "-1,-1,-0.5,0",
    }
    t = triple_from_keyvalue(entries)
    # r = xi''' + xi'' * gamma2 for linear f, so a standard Gaussian input leaves r = 1
    field = condition1_residual(t, make_grid((-1.0, 1.0), (-1.0, 1.0), 5))
    assert np.allclose(field.residuals, 1.0)
    assert triple_from_keyvalue({**entries, "derivatives": "central-difference"}).derivative_mode == "central-difference"


@pytest.mark.parametrize("entries", [
    {"xi": "laplace"},
    {"nu": "log-mix-lin-exp", "nu.params": "-1,1"},
    {"f": "spline"},
])
def test_triple_from_keyvalue_rejects_bad_entries(entries):
    with pytest.raises(InvalidInputError):
        triple_from_keyvalue(entries)


def test_sample_triple_follows_the_model():
    t = linear_gaussian_triple(a=2.0, b=1.0)
    x, y = sample_triple(t, 5000, seed=3)
    assert abs(x.mean()) < 0.1 and x.std() == pytest.approx(1.0, abs=0.05)
    assert (y - 2.0 * x - 1.0).std() == pytest.approx(1.0, abs=0.05)
    again, _ = sample_triple(t, 5000, seed=3)
    assert np.array_equal(x, again)


@pytest.mark.slow
def test_vanishing_residual_leaves_both_directions_accepted():
    t = linear_gaussian_triple(a=1.0, b=0.0)
    assert condition1_residual(t, default_grid(t)).max_abs() < 1e-8
    both_accepted = 0
    for seed in range(100):
        x, y = sample_triple(t, 2000, seed=seed)
        verdict = infer_direction(x, y, fit_linear)
        both_accepted += min(verdict.p_forward, verdict.p_backward) > 0.05
    assert both_accepted >= 80


@pytest.mark.slow
def test_large_residual_singles_out_the_causal_direction():
    t = polynomial_gaussian_triple([0.0, 0.0, 0.0, 1.0])
    assert condition1_residual(t, default_grid(t)).max_abs() > 100.0
    kernel = make_regression_method("kernel")
    correct = 0
    for seed in range(100):
        x, y = sample_triple(t, 500, seed=seed)
        correct += infer_direction(x, y, kernel).decision == "x_causes_y"
    assert correct >= 90
