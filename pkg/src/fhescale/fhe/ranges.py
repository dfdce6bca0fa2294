"""Interval-arithmetic range analysis over the compiled circuit.

Bit widths for every intermediate node are fixed ahead of evaluation so
integer accumulators cannot overflow at run time. Tensors are analysed
at per-tensor granularity (weight values enter as the hull
[min w, max w]), which is coarser than element-wise tracking but sound:
no runtime value can leave its reported interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantize import QuantizedTensor, signed_bits_for


@dataclass(frozen=True)
class RangeNode:
    node_id: str
    lo: int
    hi: int
    required_bits: int

    def contains(self, value) -> bool:
        return bool(np.all((self.lo <= np.asarray(value))
                           & (np.asarray(value) <= self.hi)))


@dataclass(frozen=True)
class RangeReport:
    nodes: tuple  # RangeNode, in circuit order

    def node(self, node_id: str) -> RangeNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def max_required_bits(self) -> int:
        return max(n.required_bits for n in self.nodes)


def _interval_mul(a_lo, a_hi, b_lo, b_hi):
    corners = [a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi]
    return min(corners), max(corners)


def _node(node_id, lo, hi) -> RangeNode:
    lo, hi = int(lo), int(hi)
    return RangeNode(node_id=node_id, lo=lo, hi=hi,
                     required_bits=signed_bits_for(lo, hi))


def analyze_ranges(weights: QuantizedTensor, bias: QuantizedTensor,
                   input_lo: int, input_hi: int,
                   activation_hull: tuple | None = None) -> RangeReport:
    """Propagate integer intervals through input -> product -> dot -> score.

    `input_lo`/`input_hi` bound the quantized inputs; `activation_hull`,
    when present, is the (lo, hi) integer hull of the lowered activation
    output, appended as the final node.
    """
    if input_lo > input_hi:
        raise ValueError("input range is empty")
    n_features = weights.values.shape[1]
    w_lo = int(weights.values.min())
    w_hi = int(weights.values.max())
    b_lo = int(bias.values.min())
    b_hi = int(bias.values.max())

    prod_lo, prod_hi = _interval_mul(w_lo, w_hi, input_lo, input_hi)
    dot_lo, dot_hi = n_features * prod_lo, n_features * prod_hi
    score_lo, score_hi = dot_lo + b_lo, dot_hi + b_hi

    nodes = [
        _node("input", input_lo, input_hi),
        _node("weight", w_lo, w_hi),
        _node("product", prod_lo, prod_hi),
        _node("accumulator", dot_lo, dot_hi),
        _node("score", score_lo, score_hi),
    ]
    if activation_hull is not None:
        nodes.append(_node("activation", activation_hull[0], activation_hull[1]))
    return RangeReport(nodes=tuple(nodes))
