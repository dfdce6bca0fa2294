import numpy as np
import pytest

from fhescale.fhe.activation import (PolynomialFitError, fit_activation_poly,
                                     sigmoid)


def test_symmetric_fit_passes_through_half():
    poly = fit_activation_poly(7, (-8.0, 8.0))
    assert poly(0.0) == pytest.approx(0.5, abs=1e-9)


def test_higher_degree_fits_tighter():
    # compared numerically: both fits on the same interval and grid
    low = fit_activation_poly(3, (-8.0, 8.0))
    high = fit_activation_poly(7, (-8.0, 8.0))
    assert high.max_abs_error < low.max_abs_error


def test_endpoint_values_within_error_band():
    poly = fit_activation_poly(7, (-8.0, 8.0))
    for x in (-8.0, 8.0):
        value = poly(x)
        assert 0.0 - poly.max_abs_error <= value <= 1.0 + poly.max_abs_error


def test_error_bound_holds_on_grid():
    poly = fit_activation_poly(5, (-6.0, 6.0))
    grid = np.linspace(-6.0, 6.0, 2001)
    assert np.max(np.abs(poly(grid) - sigmoid(grid))) <= poly.max_abs_error + 1e-12


def test_unstable_degree_rejected():
    with pytest.raises(PolynomialFitError):
        fit_activation_poly(60, (-8.0, 8.0))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        fit_activation_poly(0, (-8.0, 8.0))
    with pytest.raises(ValueError):
        fit_activation_poly(3, (2.0, -2.0))


def test_coefficients_lowest_order_first():
    poly = fit_activation_poly(1, (-4.0, 4.0))
    assert len(poly.coefficients) == 2
    # linear fit of sigmoid: intercept 0.5, positive slope
    assert poly.coefficients[0] == pytest.approx(0.5, abs=1e-9)
    assert poly.coefficients[1] > 0
