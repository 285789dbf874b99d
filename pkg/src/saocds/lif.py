"""Fixed-point leaky integrate-and-fire neurons.

At the start of a timestep a neuron's potential becomes
``alpha * v - theta * s_prev`` (product rounded half-to-even, difference
saturated to 32 bits). The engine then adds its accumulated input and
calls :func:`fire`, which compares strictly against the threshold. The
soft reset therefore shows up one timestep later, through ``s_prev``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, NeuronParams
from .fixed import INT32_MAX, INT32_MIN, round_shift, rounding_is_exact, saturate32


def decay(v, s_prev, alpha, theta, frac_bits: int):
    """Vectorized timestep-start update. All inputs are raw integers."""
    v = np.asarray(v, dtype=np.int64)
    prod = round_shift(np.asarray(alpha, dtype=np.int64) * v, frac_bits)
    return saturate32(prod - np.asarray(theta, dtype=np.int64) * np.asarray(s_prev, dtype=np.int64))


def decay_is_exact(v, alpha, frac_bits: int) -> bool:
    """True when ``alpha * v`` needs no rounding (no rounding event)."""
    return rounding_is_exact(np.asarray(alpha, dtype=np.int64) * np.asarray(v, dtype=np.int64), frac_bits)


def fire(v, u_th0) -> np.ndarray:
    return (np.asarray(v) > np.asarray(u_th0)).astype(np.uint8)


@dataclass(frozen=True)
class NeuronState:
    v: int = 0
    s_prev: int = 0

    def __post_init__(self):
        if not INT32_MIN <= self.v <= INT32_MAX:
            raise ValueError(f"potential {self.v} outside the 32-bit accumulator range")
        if self.s_prev not in (0, 1):
            raise ValueError("s_prev must be 0 or 1")


def lif_begin_timestep(state: NeuronState, params: NeuronParams) -> NeuronState:
    v = decay(state.v, state.s_prev, params.alpha, params.theta, params.frac_bits)
    return NeuronState(int(v), state.s_prev)


def lif_fire(state: NeuronState, params: NeuronParams) -> tuple[int, NeuronState]:
    spike = int(fire(state.v, params.u_th0))
    return spike, NeuronState(state.v, spike)


def lif_step(state: NeuronState, params: NeuronParams, drive: int) -> tuple[int, NeuronState]:
    """One full timestep for a single neuron with total synaptic ``drive``."""
    state = lif_begin_timestep(state, params)
    v = int(saturate32(state.v + int(drive)))
    return lif_fire(NeuronState(v, state.s_prev), params)


class PotentialBank:
    """Membrane potentials and previous spikes of one layer.

    Shape is ``(OC, OI)`` for conv layers and ``(N,)`` for FC layers.
    Potentials are held as int64 while a row is being accumulated and are
    saturated to the 32-bit accumulator range when the row is stored.
    """

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in np.atleast_1d(shape))
        self.v = np.zeros(self.shape, dtype=np.int64)
        self.s_prev = np.zeros(self.shape, dtype=np.uint8)

    def reset(self) -> None:
        self.v[...] = 0
        self.s_prev[...] = 0

    def copy(self) -> "PotentialBank":
        out = PotentialBank(self.shape)
        out.v[...] = self.v
        out.s_prev[...] = self.s_prev
        return out

    def check_params(self, params: NeuronParams) -> NeuronParams:
        if params.alpha.shape == self.shape and params.theta.shape == self.shape \
                and params.u_th0.shape == self.shape:
            return params
        return params.broadcast(self.shape)

    def begin(self, idx, params: NeuronParams) -> None:
        """Load-and-decay ``self.v[idx]``; ``params`` must already match the bank shape."""
        self.v[idx] = decay(self.v[idx], self.s_prev[idx], params.alpha[idx],
                            params.theta[idx], params.frac_bits)

    def finish(self, idx, params: NeuronParams) -> np.ndarray:
        """Saturate, fire and store ``self.v[idx]``; returns the spikes."""
        self.v[idx] = saturate32(self.v[idx])
        spikes = fire(self.v[idx], params.u_th0[idx])
        self.s_prev[idx] = spikes
        return spikes

    def __eq__(self, other):
        if not isinstance(other, PotentialBank):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.v, other.v) \
            and np.array_equal(self.s_prev, other.s_prev)

    def __repr__(self):
        return f"PotentialBank(shape={self.shape})"


def check_bank(bank: PotentialBank, shape) -> None:
    if bank.shape != tuple(shape):
        raise DimensionError(f"potential bank has shape {bank.shape}, layer needs {tuple(shape)}")
