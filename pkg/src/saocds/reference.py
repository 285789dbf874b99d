"""Dense sliding-window engine: functional oracle and baseline cost model.

This engine ignores weight sparsity entirely. It walks output pixels,
fetches the full ``kw x ic`` input window once per pixel (shared by all
output channels), fetches every weight of every output channel, and
accumulates wherever the input bit is 1. FC layers multiply the full
weight matrix and count the input-priority baseline (every weight under
an active input is fetched). It is a test oracle, written for clarity
rather than speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CostCounters, DimensionError, NeuronParams, SpikeTensor
from .fc import maxpool_row
from .lif import PotentialBank, check_bank
from .network import NetworkSpec


def sw_layer_timestep(ifm, dense_kernel, bank: PotentialBank, params: NeuronParams,
                      counters: CostCounters) -> np.ndarray:
    """One conv timestep on a padded ``(IC, in_w)`` input; returns ``(OC, OI)`` spikes."""
    ifm = np.asarray(ifm, dtype=np.int64)
    w = np.asarray(dense_kernel, dtype=np.int64)
    n_oc, n_ic, kw = w.shape
    if ifm.ndim != 2 or ifm.shape[0] != n_ic or ifm.shape[1] < kw:
        raise DimensionError(f"input {ifm.shape} does not fit kernel {w.shape}")
    oi_n = ifm.shape[1] - kw + 1
    check_bank(bank, (n_oc, oi_n))
    params = bank.check_params(params)
    everything = (slice(None), slice(None))
    bank.begin(everything, params)
    counters.bank_loads += n_oc
    for oi in range(oi_n):
        window = ifm[:, oi:oi + kw]
        ones = int(window.sum())
        counters.input_fetches += n_ic * kw
        for oc in range(n_oc):
            counters.weight_fetches += n_ic * kw
            counters.accumulations += ones
            bank.v[oc, oi] += int((w[oc] * window).sum())
    counters.bank_stores += n_oc
    counters.timesteps += 1
    return bank.finish(everything, params)


def fc_dense_timestep(ifm_row, weights, bank: PotentialBank, params: NeuronParams,
                      counters: CostCounters) -> np.ndarray:
    x = np.asarray(ifm_row, dtype=np.int64)
    w = np.asarray(weights, dtype=np.int64)
    if x.shape != (w.shape[1],):
        raise DimensionError(f"FC input of shape {x.shape}, weights expect ({w.shape[1]},)")
    check_bank(bank, (w.shape[0],))
    params = bank.check_params(params)
    active = int(x.sum())
    counters.input_fetches += w.shape[1]
    counters.weight_fetches += active * w.shape[0]
    counters.accumulations += active * w.shape[0]
    counters.bank_loads += w.shape[0]
    counters.bank_stores += w.shape[0]
    bank.begin(slice(None), params)
    bank.v += w @ x
    counters.timesteps += 1
    return bank.finish(slice(None), params)


@dataclass
class SwRun:
    output: SpikeTensor
    counters: list[CostCounters]
    layer_outputs: list[SpikeTensor] = field(default_factory=list)
    banks: list = field(default_factory=list)
    potentials: list = field(default_factory=list)


def sw_network_run(net: NetworkSpec, x: SpikeTensor) -> SwRun:
    """Layer-by-layer dense execution with materialized intermediates."""
    net.check_input(x)
    d_bits = net.d_bits
    cur = x.bits
    counters, outputs, banks, potentials = [], [], [], []
    for layer, (_, out_shape) in zip(net.layers, net.shapes()):
        c = CostCounters(d_bits=d_bits)
        nxt = np.zeros((x.t,) + tuple(out_shape), dtype=np.uint8)
        bank = None
        pots = []
        if layer.kind == "conv":
            bank = PotentialBank((layer.dims.oc, layer.dims.oi))
            dense = layer.dense()
            for t in range(x.t):
                padded = np.pad(cur[t], ((0, 0), (layer.pad, layer.pad)))
                nxt[t] = sw_layer_timestep(padded, dense, bank, layer.params, c)
        elif layer.kind == "pool":
            for t in range(x.t):
                nxt[t] = np.stack([maxpool_row(r, layer.window) for r in cur[t]])
                c.timesteps += 1
        else:
            bank = PotentialBank((layer.weights.n_out,))
            for t in range(x.t):
                nxt[t, 0] = fc_dense_timestep(cur[t].reshape(-1), layer.dense(), bank,
                                              layer.params, c)
                pots.append(bank.v.copy())
        cur = nxt
        counters.append(c)
        outputs.append(SpikeTensor(nxt))
        banks.append(bank)
        potentials.append(pots)
    return SwRun(outputs[-1], counters, outputs, banks, potentials)
