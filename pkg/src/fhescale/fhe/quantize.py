"""Symmetric integer quantization for model tensors.

Per-tensor scheme: scale = max|x| / (2^(bits-1) - 1), zero_point = 0,
round half away from zero. An all-zero tensor gets scale 1 so the map
stays invertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (not banker's)."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def signed_bits_for(lo: int, hi: int) -> int:
    """Minimal signed bit width whose range covers [lo, hi]."""
    bits = 2
    while not (-(1 << (bits - 1)) <= lo and hi <= (1 << (bits - 1)) - 1):
        bits += 1
    return bits


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray  # int64
    scale: float
    zero_point: int
    bits: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.int64))
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        lo, hi = int(self.values.min(initial=0)), int(self.values.max(initial=0))
        if signed_bits_for(lo, hi) > self.bits:
            raise ValueError(f"values exceed {self.bits}-bit signed range")

    def dequantize(self) -> np.ndarray:
        return (self.values - self.zero_point) * self.scale

    def __eq__(self, other):
        if not isinstance(other, QuantizedTensor):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and self.scale == other.scale
            and self.zero_point == other.zero_point
            and self.bits == other.bits
        )


def quantize_tensor(values: np.ndarray, bits: int) -> QuantizedTensor:
    """Quantize one tensor symmetrically into `bits` signed bits."""
    if not 2 <= bits <= 24:
        raise ValueError(f"bits must be in [2, 24], got {bits}")
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot quantize non-finite values")
    max_abs = float(np.max(np.abs(values))) if values.size else 0.0
    if max_abs == 0.0:
        scale = 1.0  # degenerate all-zero tensor
    else:
        scale = max_abs / (2 ** (bits - 1) - 1)
    q = round_half_away(values / scale)
    return QuantizedTensor(values=q, scale=scale, zero_point=0, bits=bits)


def quantize_with_scale(values: np.ndarray, scale: float) -> QuantizedTensor:
    """Quantize onto an externally fixed scale (bits widened as needed).

    Used for the circuit bias, which must live on the accumulator scale
    (weight scale x input scale) so integer addition is consistent.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot quantize non-finite values")
    q = round_half_away(values / scale)
    lo, hi = int(q.min(initial=0)), int(q.max(initial=0))
    return QuantizedTensor(values=q, scale=scale, zero_point=0,
                           bits=signed_bits_for(lo, hi))


def quantize_model(model, bits: int) -> dict:
    """Quantize a FloatModel's weight and bias tensors, each per-tensor."""
    return {
        "weights": quantize_tensor(model.weights, bits),
        "bias": quantize_tensor(model.bias, bits),
    }
