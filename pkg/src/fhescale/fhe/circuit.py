"""Compilation of a float model into an integer-only inference circuit.

The bundle bakes together quantized weights, a bias requantized onto the
accumulator scale (weight scale x input scale, so integer addition is
consistent), optional lowered activation, the range report, and client
quantization parameters. A bundle is self-contained: evaluation never
touches the float model again.

Bundles persist as a directory of three JSON files: the circuit
description, the evaluation-key record, and the client parameters.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .activation import ActivationPoly, fit_activation_poly
from .model import FloatModel
from .quantize import (QuantizedTensor, quantize_tensor, quantize_with_scale,
                       round_half_away, signed_bits_for)
from .ranges import RangeReport, RangeNode, analyze_ranges

BUNDLE_FORMAT_VERSION = 1
DEFAULT_MAX_CIRCUIT_BITS = 48
DEFAULT_FIT_INTERVAL = (-8.0, 8.0)
DEFAULT_FIT_DEGREE = 7


class CompileError(ValueError):
    """Circuit cannot be realised within the configured capacity."""


@dataclass(frozen=True)
class ClientParams:
    n_features: int
    input_scale: float
    input_zero_point: int
    input_range: tuple   # declared float range (lo, hi)
    output_scale: float
    input_bits: int


@dataclass(frozen=True)
class CircuitBundle:
    weights: QuantizedTensor
    bias: QuantizedTensor          # on the accumulator scale
    client_params: ClientParams
    activation: ActivationPoly | None
    activation_scale: float | None  # plaintext units per activated integer step
    range_report: RangeReport
    eval_key_id: str
    bits: int

    @property
    def n_classes(self) -> int:
        return self.weights.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.values.shape[1]

    def with_eval_key(self, eval_key_id: str) -> "CircuitBundle":
        return replace(self, eval_key_id=eval_key_id)


def _quantize_input(features: np.ndarray, params: ClientParams) -> np.ndarray:
    return round_half_away(np.asarray(features, dtype=np.float64)
                           / params.input_scale)


def _activation_table(bundle_like) -> "callable":
    """Integer-to-integer lookup implementing the lowered activation.

    Input integers are clamped to the polynomial's fit interval first;
    programmable-lookup activations only cover a bounded input window.
    """
    poly = bundle_like.activation
    acc_scale = bundle_like.bias.scale
    act_scale = bundle_like.activation_scale
    lo, hi = poly.fit_interval

    def table(acc_int):
        x = np.clip(np.asarray(acc_int, dtype=np.float64) * acc_scale, lo, hi)
        return round_half_away(poly(x) / act_scale)

    return table


def compile_circuit(model: FloatModel, bits: int = 8,
                    input_range: tuple = (-8.0, 8.0),
                    activation: bool = False,
                    fit_degree: int = DEFAULT_FIT_DEGREE,
                    fit_interval: tuple | None = None,
                    max_circuit_bits: int = DEFAULT_MAX_CIRCUIT_BITS,
                    eval_key_id: str | None = None) -> CircuitBundle:
    """Lower a float model to an integer circuit bundle.

    Raises CompileError naming the offending node when any intermediate
    needs more than `max_circuit_bits` signed bits.
    """
    in_lo, in_hi = float(input_range[0]), float(input_range[1])
    if not in_lo < in_hi:
        raise ValueError("input range must satisfy lo < hi")

    q_weights = quantize_tensor(model.weights, bits)
    input_scale = max(abs(in_lo), abs(in_hi)) / (2 ** (bits - 1) - 1)
    acc_scale = q_weights.scale * input_scale
    q_bias = quantize_with_scale(model.bias, acc_scale)

    qin_lo = int(round_half_away(np.array(in_lo / input_scale)))
    qin_hi = int(round_half_away(np.array(in_hi / input_scale)))

    poly = None
    act_scale = None
    act_hull = None
    if activation:
        poly = fit_activation_poly(fit_degree, fit_interval or DEFAULT_FIT_INTERVAL)
        grid = np.linspace(poly.fit_interval[0], poly.fit_interval[1], 2001)
        max_abs_p = float(np.max(np.abs(poly(grid))))
        act_scale = max(max_abs_p, 1e-12) / (2 ** (bits - 1) - 1)
        act_hull = (-(2 ** (bits - 1) - 1), 2 ** (bits - 1) - 1)

    report = analyze_ranges(q_weights, q_bias, qin_lo, qin_hi,
                            activation_hull=act_hull)
    for node in report.nodes:
        if node.required_bits > max_circuit_bits:
            raise CompileError(
                f"node '{node.node_id}' needs {node.required_bits} bits, "
                f"capacity is {max_circuit_bits}")

    params = ClientParams(
        n_features=model.n_features,
        input_scale=input_scale,
        input_zero_point=0,
        input_range=(in_lo, in_hi),
        output_scale=act_scale if activation else acc_scale,
        input_bits=bits,
    )
    bundle = CircuitBundle(
        weights=q_weights, bias=q_bias, client_params=params,
        activation=poly, activation_scale=act_scale,
        range_report=report, eval_key_id=eval_key_id or "", bits=bits)
    if not eval_key_id:
        bundle = bundle.with_eval_key("ek-" + _content_digest(bundle))
    return bundle


def _content_digest(bundle: CircuitBundle) -> str:
    h = hashlib.sha256()
    h.update(bundle.weights.values.tobytes())
    h.update(bundle.bias.values.tobytes())
    h.update(np.float64(bundle.client_params.input_scale).tobytes())
    if bundle.activation is not None:
        h.update(bundle.activation.coefficients.tobytes())
    return h.hexdigest()[:16]


def evaluate_plaintext(bundle: CircuitBundle, features: np.ndarray,
                       collect_intermediates: bool = False):
    """Integer reference forward pass (the oracle the encrypted path must match).

    Accepts one feature vector or a batch; returns integer class scores,
    or (scores, intermediates dict) when collecting.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    if single:
        features = features[None, :]
    if features.shape[1] != bundle.n_features:
        raise ValueError(f"expected {bundle.n_features} features, "
                         f"got {features.shape[1]}")
    lo, hi = bundle.client_params.input_range
    clipped = np.clip(features, lo, hi)
    q_in = _quantize_input(clipped, bundle.client_params)

    products = q_in[:, None, :] * bundle.weights.values[None, :, :]
    acc = products.sum(axis=2)
    scores = acc + bundle.bias.values[None, :]
    out = scores
    intermediates = {"input": q_in, "product": products,
                     "accumulator": acc, "score": scores}
    if bundle.activation is not None:
        out = _activation_table(bundle)(scores)
        intermediates["activation"] = out
    if single:
        out = out[0]
    if collect_intermediates:
        return out, intermediates
    return out


def dequantize_scores(bundle: CircuitBundle, int_scores: np.ndarray) -> np.ndarray:
    return np.asarray(int_scores, dtype=np.float64) * bundle.client_params.output_scale


# -- persistence --------------------------------------------------------------

CIRCUIT_FILE = "circuit.json"
EVAL_KEY_FILE = "evaluation_key.json"
CLIENT_FILE = "client_params.json"


def save_bundle(bundle: CircuitBundle, directory) -> None:
    """Write the bundle as three JSON files under `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def qt(t: QuantizedTensor) -> dict:
        return {"values": t.values.tolist(), "scale": t.scale,
                "zero_point": t.zero_point, "bits": t.bits}

    circuit = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "bits": bundle.bits,
        "weights": qt(bundle.weights),
        "bias": qt(bundle.bias),
        "activation": None if bundle.activation is None else {
            "coefficients": bundle.activation.coefficients.tolist(),
            "fit_interval": list(bundle.activation.fit_interval),
            "max_abs_error": bundle.activation.max_abs_error,
            "output_scale": bundle.activation_scale,
        },
        "range_report": [
            {"node_id": n.node_id, "lo": n.lo, "hi": n.hi,
             "required_bits": n.required_bits}
            for n in bundle.range_report.nodes
        ],
    }
    eval_key = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "eval_key_id": bundle.eval_key_id,
    }
    client = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "n_features": bundle.client_params.n_features,
        "input_scale": bundle.client_params.input_scale,
        "input_zero_point": bundle.client_params.input_zero_point,
        "input_range": list(bundle.client_params.input_range),
        "output_scale": bundle.client_params.output_scale,
        "input_bits": bundle.client_params.input_bits,
    }
    for name, payload in ((CIRCUIT_FILE, circuit), (EVAL_KEY_FILE, eval_key),
                          (CLIENT_FILE, client)):
        (directory / name).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_bundle(directory) -> CircuitBundle:
    directory = Path(directory)
    circuit = json.loads((directory / CIRCUIT_FILE).read_text())
    eval_key = json.loads((directory / EVAL_KEY_FILE).read_text())
    client = json.loads((directory / CLIENT_FILE).read_text())
    for doc, name in ((circuit, CIRCUIT_FILE), (eval_key, EVAL_KEY_FILE),
                      (client, CLIENT_FILE)):
        if doc.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise ValueError(f"{name}: unsupported format version "
                             f"{doc.get('format_version')}")

    def qt(d: dict) -> QuantizedTensor:
        return QuantizedTensor(values=np.array(d["values"], dtype=np.int64),
                               scale=d["scale"], zero_point=d["zero_point"],
                               bits=d["bits"])

    poly = None
    act_scale = None
    if circuit["activation"] is not None:
        a = circuit["activation"]
        poly = ActivationPoly(coefficients=np.array(a["coefficients"]),
                              fit_interval=tuple(a["fit_interval"]),
                              max_abs_error=a["max_abs_error"])
        act_scale = a["output_scale"]
    report = RangeReport(nodes=tuple(
        RangeNode(node_id=n["node_id"], lo=n["lo"], hi=n["hi"],
                  required_bits=n["required_bits"])
        for n in circuit["range_report"]))
    params = ClientParams(
        n_features=client["n_features"], input_scale=client["input_scale"],
        input_zero_point=client["input_zero_point"],
        input_range=tuple(client["input_range"]),
        output_scale=client["output_scale"], input_bits=client["input_bits"])
    return CircuitBundle(weights=qt(circuit["weights"]), bias=qt(circuit["bias"]),
                         client_params=params, activation=poly,
                         activation_scale=act_scale, range_report=report,
                         eval_key_id=eval_key["eval_key_id"], bits=circuit["bits"])
