"""Spike encoders: sigma-delta conversion of IQ frames and Bernoulli inputs."""

from __future__ import annotations

import warnings

import numpy as np

from .core import SpikeTensor


def sigma_delta_bits(x, osr: int, order: int = 1) -> np.ndarray:
    """Oversample a 1-D signal ``osr`` times and sigma-delta modulate it.

    Each sample is held for ``osr`` modulator steps and the integrator state
    carries over from sample to sample. Returns ``len(x) * osr`` bits where
    1 means +1 and 0 means -1.
    """
    if order not in (1, 2):
        raise ValueError("modulator order must be 1 or 2")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(len(x) * osr, dtype=np.uint8)
    i1 = i2 = 0.0
    k = 0
    for sample in x:
        for _ in range(osr):
            i1 += sample
            if order == 1:
                y = 1.0 if i1 >= 0 else -1.0
            else:
                i2 += i1
                y = 1.0 if i2 >= 0 else -1.0
                i2 -= y
            i1 -= y
            out[k] = y > 0
            k += 1
    return out


def sigma_delta_encode(iq, osr: int, order: int = 1, normalize: bool = False) -> SpikeTensor:
    """Encode a ``(channels, samples)`` IQ frame as ``T = osr`` spike frames.

    Timestep ``t`` carries modulator bit ``t`` of every sample, so the
    result has shape ``(osr, channels, samples)``. Values outside [-1, 1]
    are clipped and reported with a warning.
    """
    if osr < 1:
        raise ValueError("oversampling ratio must be >= 1")
    iq = np.asarray(iq, dtype=np.float64)
    if iq.ndim != 2:
        raise ValueError(f"IQ frame must be 2-D (channels, samples), got shape {iq.shape}")
    if normalize:
        peak = np.max(np.abs(iq))
        if peak > 0:
            iq = iq / peak
    n_clip = int(np.count_nonzero(np.abs(iq) > 1))
    if n_clip:
        warnings.warn(f"{n_clip} IQ values outside [-1, 1] were clipped", RuntimeWarning, stacklevel=2)
        iq = np.clip(iq, -1.0, 1.0)
    bits = np.stack([sigma_delta_bits(ch, osr, order) for ch in iq])
    bits = bits.reshape(iq.shape[0], iq.shape[1], osr).transpose(2, 0, 1)
    return SpikeTensor(bits)


def gen_bernoulli_input(channels: int, width: int, t: int, fire_rate: float,
                        seed: int | None = None) -> SpikeTensor:
    if not 0 <= fire_rate <= 1:
        raise ValueError(f"fire rate must be in [0, 1], got {fire_rate}")
    rng = np.random.default_rng(seed)
    return SpikeTensor((rng.random((t, channels, width)) < fire_rate).astype(np.uint8))
