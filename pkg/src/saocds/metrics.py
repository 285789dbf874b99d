"""Aggregate counters into accumulation ratios, bit traffic, latency and FoM.

Latency is expressed in iteration cycles: one schedule iteration per
cycle for conv layers, one input bit per cycle for FC layers and one
pixel per cycle for pool layers. Absolute time needs a clock frequency
and fill details that are out of scope here.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .core import ConvDims, CostCounters, break_even_density, coo_bits_per_density, coo_storage_bits, \
    dense_storage_bits
from .network import NetworkSpec


def accumulation_ratio(sparse_counters, dense_counters) -> list[float | None]:
    """Per-layer sparse / dense accumulation counts (None where dense is zero)."""
    sparse_counters = list(sparse_counters)
    dense_counters = list(dense_counters)
    if len(sparse_counters) != len(dense_counters):
        raise ValueError("counter lists describe different networks")
    return [s.accumulations / d.accumulations if d.accumulations else None
            for s, d in zip(sparse_counters, dense_counters)]


def bit_traffic(counters: CostCounters) -> int:
    return counters.total_bits


@dataclass(frozen=True)
class LatencyReport:
    cycles: tuple[int, ...]
    kinds: tuple[str, ...]
    bottleneck: int
    t_steps: int
    total_cycles: int
    fc_bottleneck: bool

    @property
    def max_stage_cycles(self) -> int:
        return self.cycles[self.bottleneck]

    @property
    def throughput(self) -> float:
        """Timesteps per cycle at steady state."""
        return 1.0 / self.max_stage_cycles if self.max_stage_cycles else float("inf")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(max_stage_cycles=self.max_stage_cycles, throughput=self.throughput)
        return d


def stage_cycles(net: NetworkSpec) -> list[int]:
    cycles = []
    for layer, (in_shape, _) in zip(net.layers, net.shapes()):
        if layer.kind == "conv":
            cycles.append(layer.schedule.reps)
        elif layer.kind == "fc":
            cycles.append(layer.weights.n_in)
        else:
            cycles.append(in_shape[1])
    return cycles


def latency_model(net: NetworkSpec, t_steps: int = 1) -> LatencyReport:
    """Per-stage cycles per timestep, the bottleneck stage and a pipeline estimate.

    The estimate is one pass through every stage (pipeline fill) plus
    ``t_steps - 1`` further timesteps paced by the slowest stage.
    """
    cycles = stage_cycles(net)
    kinds = tuple(l.kind for l in net.layers)
    bottleneck = max(range(len(cycles)), key=lambda i: (cycles[i], -i))
    conv_max = max((c for c, k in zip(cycles, kinds) if k == "conv"), default=0)
    fc_max = max((c for c, k in zip(cycles, kinds) if k == "fc"), default=0)
    total = sum(cycles) + max(t_steps - 1, 0) * cycles[bottleneck] if t_steps > 0 else 0
    return LatencyReport(tuple(cycles), kinds, bottleneck, t_steps, total, fc_max > conv_max)


def fom(lut_count: float, dynamic_power_w: float, throughput_s_per_s: float) -> float:
    """LUT count x dynamic power / throughput, in microjoules per sample."""
    if throughput_s_per_s <= 0:
        raise ValueError("throughput must be positive")
    return lut_count * dynamic_power_w / throughput_s_per_s * 1e6


def storage_report(net: NetworkSpec, d_bits: int | None = None) -> list[dict]:
    """Dense vs COO storage per conv layer, in the layout of a storage table."""
    d_bits = net.d_bits if d_bits is None else d_bits
    rows = []
    for i in net.conv_layers():
        layer = net.layers[i]
        dims: ConvDims = layer.dims
        ri_bits, ci_bits = dims.default_index_bits()
        rows.append({
            "layer": i,
            "name": layer.name,
            "dims": [1, dims.kw, dims.ic, dims.oc],
            "d_bits": d_bits,
            "ri_bits": ri_bits,
            "ci_bits": ci_bits,
            "entry_bits": d_bits + ri_bits + ci_bits,
            "weights": dims.n_weights,
            "nnz": layer.nnz,
            "density": layer.nnz / dims.n_weights,
            "dense_bits": dense_storage_bits(dims, d_bits),
            "coo_bits_per_density": coo_bits_per_density(dims, d_bits),
            "coo_bits": coo_storage_bits(layer.kernel, d_bits),
            "break_even_density": break_even_density(d_bits, ri_bits, ci_bits),
        })
    return rows


def schedule_report(net: NetworkSpec) -> list[dict]:
    return [{"layer": i, "name": net.layers[i].name, **net.layers[i].schedule.summary()}
            for i in net.conv_layers()]
