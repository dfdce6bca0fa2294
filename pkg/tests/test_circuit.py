import numpy as np
import pytest

from fhescale.fhe.circuit import (CompileError, compile_circuit,
                                  dequantize_scores, evaluate_plaintext,
                                  load_bundle, save_bundle)
from fhescale.fhe.model import FloatModel

TOY = FloatModel(weights=np.array([[1.0, -0.5], [0.25, 0.75]]),
                 bias=np.array([0.1, -0.2]), n_classes=2, n_features=2)


def test_toy_bundle_matches_hand_computation():
    # hand-derived before implementation:
    #   weight scale 1/127 -> qW = [[127,-64],[32,95]]
    #   input scale 2/127  -> q([1,-1]) = [64,-64]
    #   acc scale 2/16129  -> qb = [806,-1613]
    #   scores = [127*64+64*64+806, 32*64-95*64-1613] = [13030, -5645]
    bundle = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0))
    assert bundle.weights.values.tolist() == [[127, -64], [32, 95]]
    assert bundle.bias.values.tolist() == [806, -1613]
    scores = evaluate_plaintext(bundle, np.array([1.0, -1.0]))
    assert scores.tolist() == [13030, -5645]
    floats = dequantize_scores(bundle, scores)
    assert floats == pytest.approx([1.6, -0.7], abs=0.02)


def test_roundtrip_serialization(tmp_path):
    for activation in (False, True):
        bundle = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0),
                                 activation=activation)
        save_bundle(bundle, tmp_path / f"bundle_{activation}")
        loaded = load_bundle(tmp_path / f"bundle_{activation}")
        assert loaded == bundle


def test_more_bits_means_finer_weight_scale():
    b8 = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0))
    b4 = compile_circuit(TOY, bits=4, input_range=(-2.0, 2.0))
    assert b8.weights.scale <= b4.weights.scale


def test_capacity_error_names_offending_node():
    wide = FloatModel(weights=np.ones((2, 200)), bias=np.zeros(2),
                      n_classes=2, n_features=200)
    with pytest.raises(CompileError, match=r"node 'product' needs 31 bits"):
        compile_circuit(wide, bits=16, input_range=(-100.0, 100.0),
                        max_circuit_bits=24)


def test_plaintext_eval_validates_dimension():
    bundle = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0))
    with pytest.raises(ValueError):
        evaluate_plaintext(bundle, np.zeros(3))


def test_activation_bundle_outputs_bounded():
    bundle = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0),
                             activation=True)
    rng = np.random.default_rng(2)
    cap = 2 ** (bundle.bits - 1) - 1
    for _ in range(200):
        x = rng.uniform(-2, 2, size=2)
        out = evaluate_plaintext(bundle, x)
        assert np.all(np.abs(out) <= cap)


def test_zero_input_scores_equal_biases():
    bundle = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0))
    scores = evaluate_plaintext(bundle, np.zeros(2))
    assert scores.tolist() == bundle.bias.values.tolist()


def test_fresh_eval_key_identifier_assigned():
    a = compile_circuit(TOY, bits=8, input_range=(-2.0, 2.0))
    assert a.eval_key_id.startswith("ek-")
    b = a.with_eval_key("key-abc")
    assert b.eval_key_id == "key-abc"
    assert a.eval_key_id != b.eval_key_id
