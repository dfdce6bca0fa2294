import numpy as np
import pytest

from fhescale.fhe.quantize import (QuantizedTensor, quantize_model,
                                   quantize_tensor, quantize_with_scale,
                                   round_half_away, signed_bits_for)
from fhescale.fhe.model import FloatModel


def test_reference_example_8bit():
    # recomputed by hand: scale = 1/127; 0.5/scale = 63.5 rounds away to 64
    qt = quantize_tensor(np.array([-1.0, 0.5, 1.0]), bits=8)
    assert qt.scale == pytest.approx(1.0 / 127)
    assert qt.values.tolist() == [-127, 64, 127]
    assert qt.zero_point == 0


def test_all_zero_tensor_gets_unit_scale():
    qt = quantize_tensor(np.zeros(3), bits=8)
    assert qt.values.tolist() == [0, 0, 0]
    assert qt.scale == 1.0


def test_dequantize_error_within_half_step():
    rng = np.random.default_rng(0)
    for _ in range(50):
        values = rng.uniform(-10, 10, size=20)
        qt = quantize_tensor(values, bits=rng.integers(2, 25))
        err = np.abs(qt.dequantize() - values)
        assert np.all(err <= qt.scale / 2 + 1e-12)


def test_round_half_away_from_zero():
    x = np.array([0.5, -0.5, 1.5, -1.5, 2.4, -2.6])
    assert round_half_away(x).tolist() == [1, -1, 2, -2, 2, -3]


def test_bits_bounds_enforced():
    with pytest.raises(ValueError):
        quantize_tensor(np.ones(2), bits=1)
    with pytest.raises(ValueError):
        quantize_tensor(np.ones(2), bits=25)
    with pytest.raises(ValueError):
        quantize_tensor(np.array([np.inf]), bits=8)


def test_values_fit_declared_bits():
    qt = quantize_tensor(np.array([-1.0, 1.0]), bits=4)
    assert qt.values.tolist() == [-7, 7]
    with pytest.raises(ValueError):
        QuantizedTensor(values=np.array([200]), scale=1.0, zero_point=0, bits=8)


def test_signed_bits_for():
    assert signed_bits_for(0, 0) == 2
    assert signed_bits_for(-128, 127) == 8
    assert signed_bits_for(-129, 0) == 9
    assert signed_bits_for(0, 128) == 9
    assert signed_bits_for(-323850, 323850) == 20


def test_quantize_with_scale_widens_bits():
    qt = quantize_with_scale(np.array([100.0, -250.0]), scale=0.5)
    assert qt.values.tolist() == [200, -500]
    assert qt.bits == signed_bits_for(-500, 200)


def test_quantize_model_scales():
    model = FloatModel(weights=np.array([[2.0, -1.0], [0.5, 0.25]]),
                       bias=np.array([1.0, -4.0]), n_classes=2, n_features=2)
    q = quantize_model(model, bits=8)
    assert q["weights"].scale == pytest.approx(2.0 / 127)
    assert q["bias"].scale == pytest.approx(4.0 / 127)
