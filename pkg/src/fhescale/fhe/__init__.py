"""Integer-only inference pipeline over a mock homomorphic layer."""

from .activation import ActivationPoly, PolynomialFitError, fit_activation_poly, sigmoid
from .circuit import (CircuitBundle, ClientParams, CompileError, compile_circuit,
                      dequantize_scores, evaluate_plaintext, load_bundle,
                      save_bundle)
from .crypto import (Ciphertext, ClampWarning, EvalKey, KeyMismatchError,
                     NoiseOverflowError, SecretKey, decrypt, decrypt_integers,
                     encrypt, evaluate, keygen)
from .model import FloatModel, TrainConfig, argmax_class, predict_plaintext, train_logreg
from .quantize import (QuantizedTensor, quantize_model, quantize_tensor,
                       quantize_with_scale, round_half_away, signed_bits_for)
from .ranges import RangeNode, RangeReport, analyze_ranges

__all__ = [
    "ActivationPoly", "PolynomialFitError", "fit_activation_poly", "sigmoid",
    "CircuitBundle", "ClientParams", "CompileError", "compile_circuit",
    "dequantize_scores", "evaluate_plaintext", "load_bundle", "save_bundle",
    "Ciphertext", "ClampWarning", "EvalKey", "KeyMismatchError",
    "NoiseOverflowError", "SecretKey", "decrypt", "decrypt_integers",
    "encrypt", "evaluate", "keygen",
    "FloatModel", "TrainConfig", "argmax_class", "predict_plaintext",
    "train_logreg",
    "QuantizedTensor", "quantize_model", "quantize_tensor",
    "quantize_with_scale", "round_half_away", "signed_bits_for",
    "RangeNode", "RangeReport", "analyze_ranges",
]
