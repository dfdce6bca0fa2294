import numpy as np
import pytest

from fhescale.fhe.quantize import QuantizedTensor
from fhescale.fhe.ranges import analyze_ranges


def _tensors(weights, bias, bits=8, bias_bits=24):
    return (QuantizedTensor(values=np.array(weights), scale=1.0, zero_point=0,
                            bits=bits),
            QuantizedTensor(values=np.array(bias), scale=1.0, zero_point=0,
                            bits=bias_bits))


def brute_force_dot_interval(w_lo, w_hi, x_lo, x_hi, n_features):
    corners = [w_lo * x_lo, w_lo * x_hi, w_hi * x_lo, w_hi * x_hi]
    return n_features * min(corners), n_features * max(corners)


def test_ten_feature_reference_case():
    # oracle: 10 terms, each within hull([-127,127] x [0,255]) = +/- 32385
    weights = np.tile([-127, 127], (2, 5))
    w, b = _tensors(weights, [0, 0])
    report = analyze_ranges(w, b, 0, 255)
    lo, hi = brute_force_dot_interval(-127, 127, 0, 255, 10)
    assert (lo, hi) == (-323850, 323850)
    acc = report.node("accumulator")
    assert (acc.lo, acc.hi) == (lo, hi)
    assert acc.required_bits == 20


def test_all_zero_weights_score_is_bias():
    w, b = _tensors(np.zeros((2, 4), dtype=int), [5, -3])
    report = analyze_ranges(w, b, -10, 10)
    assert (report.node("accumulator").lo, report.node("accumulator").hi) == (0, 0)
    assert (report.node("score").lo, report.node("score").hi) == (-3, 5)


def test_fuzzed_soundness_of_intervals():
    rng = np.random.default_rng(5)
    weights = rng.integers(-127, 128, size=(3, 6))
    bias = rng.integers(-1000, 1000, size=3)
    w, b = _tensors(weights, bias)
    report = analyze_ranges(w, b, -50, 80)
    for _ in range(2000):
        x = rng.integers(-50, 81, size=6)
        products = weights * x[None, :]
        acc = products.sum(axis=1)
        score = acc + bias
        assert report.node("input").contains(x)
        assert report.node("product").contains(products)
        assert report.node("accumulator").contains(acc)
        assert report.node("score").contains(score)


def test_empty_input_range_rejected():
    w, b = _tensors(np.ones((2, 2), dtype=int), [0, 0])
    with pytest.raises(ValueError):
        analyze_ranges(w, b, 5, 4)


def test_activation_hull_appended():
    w, b = _tensors(np.ones((2, 2), dtype=int), [0, 0])
    report = analyze_ranges(w, b, 0, 10, activation_hull=(-127, 127))
    assert report.node("activation").required_bits == 8
