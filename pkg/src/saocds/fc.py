"""Fully-connected layers with a 1-bit weight mask, plus binary max-pooling.

For each output neuron the fetch mask is ``ifm AND wm[o]``: only weights
that are nonzero *and* sit under an active input are fetched and
accumulated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostCounters, DimensionError, NeuronParams
from .fixed import INT16_MAX, INT16_MIN
from .lif import PotentialBank, check_bank
from .stream import READ, Emit, Process, check_row


@dataclass(frozen=True, eq=False)
class MaskedFcWeights:
    """Dense raw weights ``[out][in]`` with the derived weight mask."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.ndim != 2:
            raise DimensionError(f"FC weights must be 2-D [out][in], got shape {w.shape}")
        if not np.issubdtype(w.dtype, np.integer):
            raise TypeError("FC weights must be raw fixed-point integers")
        w = w.astype(np.int64)
        if w.size and (w.min() < INT16_MIN or w.max() > INT16_MAX):
            raise ValueError("FC weights exceed the signed 16-bit range")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        wm = (w != 0).astype(np.uint8)
        wm.setflags(write=False)
        object.__setattr__(self, "wm", wm)

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.wm.sum())

    def mask_bits(self) -> int:
        """Storage overhead of the weight mask: one bit per weight."""
        return self.weights.size


def fetch_mask(ifm_row, wm_row) -> np.ndarray:
    return np.asarray(ifm_row, dtype=np.uint8) & np.asarray(wm_row, dtype=np.uint8)


def fc_timestep(ifm_row, w: MaskedFcWeights, bank: PotentialBank, params: NeuronParams,
                counters: CostCounters) -> np.ndarray:
    """One timestep of a masked FC layer; returns the output spike vector."""
    ifm = check_row(ifm_row, w.n_in).astype(np.uint8)
    check_bank(bank, (w.n_out,))
    params = bank.check_params(params)
    everything = slice(None)
    bank.begin(everything, params)
    fm = ifm[None, :] & w.wm
    fetched = int(fm.sum())
    counters.input_fetches += w.n_out * w.n_in
    counters.weight_fetches += fetched
    counters.accumulations += fetched
    counters.bank_loads += w.n_out
    counters.bank_stores += w.n_out
    bank.v += (w.weights * fm).sum(axis=1)
    counters.timesteps += 1
    return bank.finish(everything, params)


class MaskedFc:
    """Stateful FC engine reading ``in_rows`` rows that are concatenated channel-major."""

    def __init__(self, weights: MaskedFcWeights, params: NeuronParams, in_rows: int,
                 d_bits: int = 16):
        if weights.n_in % in_rows:
            raise DimensionError(f"{weights.n_in} inputs cannot be split into {in_rows} rows")
        self.weights = weights
        self.in_rows = in_rows
        self.bank = PotentialBank((weights.n_out,))
        self.params = self.bank.check_params(params)
        self.counters = CostCounters(d_bits=d_bits)
        self.potentials: list[np.ndarray] = []

    def process(self, t_steps: int) -> Process:
        width = self.weights.n_in // self.in_rows
        for _ in range(t_steps):
            rows = []
            for _ in range(self.in_rows):
                rows.append(check_row((yield READ), width))
            spikes = fc_timestep(np.concatenate(rows), self.weights, self.bank, self.params,
                                 self.counters)
            self.potentials.append(self.bank.v.copy())
            yield Emit(spikes)


def maxpool_row(row, window: int) -> np.ndarray:
    """Binary max over non-overlapping windows (trailing remainder dropped)."""
    r = np.asarray(row, dtype=np.uint8)
    n = len(r) // window
    return r[: n * window].reshape(n, window).max(axis=1)


class MaxPool:
    def __init__(self, window: int, channels: int, width: int, d_bits: int = 16):
        if window <= 0 or width < window:
            raise DimensionError(f"pool window {window} does not fit width {width}")
        self.window = window
        self.channels = channels
        self.width = width
        self.counters = CostCounters(d_bits=d_bits)

    def process(self, t_steps: int) -> Process:
        for _ in range(t_steps):
            for _ in range(self.channels):
                row = check_row((yield READ), self.width)
                yield Emit(maxpool_row(row, self.window))
            self.counters.timesteps += 1
