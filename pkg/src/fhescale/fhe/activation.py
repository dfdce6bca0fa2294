"""Polynomial lowering of the sigmoid activation.

Encrypted evaluation only supports polynomial arithmetic, so the sigmoid
is replaced by a least-squares polynomial fit on a dense grid over a
declared interval. The worst grid error is measured and carried with the
polynomial so downstream consumers can reason about accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_POINTS = 2001
COND_LIMIT = 1e10


class PolynomialFitError(ValueError):
    """Requested fit is numerically unstable (condition-number guard)."""


@dataclass(frozen=True)
class ActivationPoly:
    coefficients: np.ndarray  # lowest order first, degree+1 entries
    fit_interval: tuple       # (lo, hi)
    max_abs_error: float

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))
        lo, hi = self.fit_interval
        if not lo < hi:
            raise ValueError("fit interval must satisfy lo < hi")
        if self.max_abs_error < 0:
            raise ValueError("max_abs_error must be non-negative")

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=np.float64),
                                                self.coefficients)

    def __eq__(self, other):
        if not isinstance(other, ActivationPoly):
            return NotImplemented
        return (np.array_equal(self.coefficients, other.coefficients)
                and tuple(self.fit_interval) == tuple(other.fit_interval)
                and self.max_abs_error == other.max_abs_error)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def fit_activation_poly(degree: int, interval: tuple) -> ActivationPoly:
    """Least-squares sigmoid fit of the given degree over `interval`."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")

    grid = np.linspace(lo, hi, GRID_POINTS)
    # fit in a scaled variable to keep the Vandermonde matrix well conditioned
    center, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    scaled = (grid - center) / half
    vander = np.vander(scaled, degree + 1, increasing=True)
    if np.linalg.cond(vander) > COND_LIMIT:
        raise PolynomialFitError(
            f"degree {degree} fit on [{lo}, {hi}] is ill-conditioned")
    coeffs_scaled, *_ = np.linalg.lstsq(vander, sigmoid(grid), rcond=None)

    # map p((x - center)/half) back to plain power-basis coefficients in x
    poly = np.polynomial.polynomial.Polynomial(coeffs_scaled)
    shifted = poly(np.polynomial.polynomial.Polynomial([-center / half, 1.0 / half]))
    coeffs = np.zeros(degree + 1)
    coeffs[: len(shifted.coef)] = shifted.coef

    fitted = np.polynomial.polynomial.polyval(grid, coeffs)
    max_err = float(np.max(np.abs(fitted - sigmoid(grid))))
    return ActivationPoly(coefficients=coeffs, fit_interval=(lo, hi),
                          max_abs_error=max_err)
