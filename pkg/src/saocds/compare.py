"""Cross-check the sparsity-aware engines against the dense reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostCounters, SpikeTensor
from .metrics import accumulation_ratio
from .network import NetworkSpec
from .pipeline import NetworkRun, saocds_network_run
from .reference import SwRun, sw_network_run


@dataclass(frozen=True)
class Mismatch:
    """First differing spike. ``oc`` is the output row, ``oi`` the pixel in it.

    FC layers emit a single row, so there ``oc`` is 0 and ``oi`` is the
    neuron.
    """

    t: int
    layer: int
    oc: int
    oi: int
    expected: int
    got: int

    def __str__(self):
        return (f"first mismatch at t={self.t}, layer={self.layer}, oc={self.oc}, oi={self.oi}: "
                f"reference {self.expected}, sparse engine {self.got}")


def first_difference(expected: list[SpikeTensor], got: list[SpikeTensor]) -> Mismatch | None:
    """Earliest differing bit, ordered by timestep, then layer, then position."""
    if len(expected) != len(got):
        raise ValueError("runs recorded a different number of layers")
    best = None
    for layer, (a, b) in enumerate(zip(expected, got)):
        if a.bits.shape != b.bits.shape:
            raise ValueError(f"layer {layer}: output shapes {a.bits.shape} and {b.bits.shape} differ")
        diff = np.argwhere(a.bits != b.bits)
        if len(diff):
            t, oc, oi = (int(v) for v in diff[0])
            if best is None or t < best.t:
                best = Mismatch(t, layer, oc, oi, int(a.bits[t, oc, oi]), int(b.bits[t, oc, oi]))
    return best


@dataclass
class Comparison:
    reference: SwRun
    sparse: NetworkRun
    mismatch: Mismatch | None

    @property
    def equal(self) -> bool:
        return self.mismatch is None

    def counter_table(self) -> list[dict]:
        """Per-layer fetch and accumulation counts of both engines."""
        rows = []
        ratios = accumulation_ratio(self.sparse.counters, self.reference.counters)
        for i, (sw, sp, r) in enumerate(zip(self.reference.counters, self.sparse.counters, ratios)):
            rows.append(_row(i, "sw", sw, None))
            rows.append(_row(i, "saocds", sp, r))
        return rows


def _row(layer: int, engine: str, c: CostCounters, ratio) -> dict:
    return {"layer": layer, "engine": engine, "input_fetches": c.input_fetches,
            "weight_fetches": c.weight_fetches, "accumulations": c.accumulations,
            "total_bits": c.total_bits, "acc_ratio": ratio}


def compare_engines(net: NetworkSpec, x: SpikeTensor, mode: str = "stream") -> Comparison:
    ref = sw_network_run(net, x)
    sparse = saocds_network_run(net, x, mode=mode, record=True)
    return Comparison(ref, sparse, first_difference(ref.layer_outputs, sparse.layer_outputs))
