"""Post-training magnitude pruning and 16-bit fixed-point quantization."""

from __future__ import annotations

import math

import numpy as np

from .core import ConvDims, DimensionError, NeuronParams, coo_encode
from .fc import MaskedFcWeights
from .fixed import INT16_MAX, INT16_MIN, check_frac_bits
from .network import ConvLayer, FcLayer, NetworkSpec


def keep_count(n: int, density: float) -> int:
    """``round(density * n)`` with halves rounded up."""
    return int(math.floor(density * n + 0.5 + 1e-9))


def prune_l1(weights, target_density: float) -> np.ndarray:
    """Keep-mask of the ``round(target_density * N)`` largest-magnitude weights.

    Ties in magnitude keep the lower flat index. Returns a uint8 mask with
    the shape of ``weights``.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("cannot prune an empty weight array")
    if not 0 < target_density <= 1:
        raise ValueError(f"target density must be in (0, 1], got {target_density}")
    flat = np.abs(w.reshape(-1))
    k = keep_count(flat.size, target_density)
    order = np.argsort(-flat, kind="stable")
    mask = np.zeros(flat.size, dtype=np.uint8)
    mask[order[:k]] = 1
    return mask.reshape(w.shape)


def quantize_w(weights, frac_bits: int = 8) -> np.ndarray:
    """Scale by ``2**frac_bits``, round half to even and clip to int16."""
    check_frac_bits(frac_bits)
    w = np.asarray(weights, dtype=np.float64)
    return np.clip(np.rint(w * (1 << frac_bits)), INT16_MIN, INT16_MAX).astype(np.int64)


def dequantize_w(raw, frac_bits: int = 8) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / (1 << frac_bits)


def best_frac_bits(weights, candidates=range(16)) -> int:
    """Fractional-bit count minimizing quantization MSE (ties prefer fewer bits)."""
    w = np.asarray(weights, dtype=np.float64)
    errs = [(float(np.mean((dequantize_w(quantize_w(w, f), f) - w) ** 2)), f) for f in candidates]
    return min(errs)[1]


def parse_profile(text: str) -> list[float]:
    """Parse a density profile such as ``"25-20-15-20-25"`` (percent) or ``"0.5"``."""
    parts = [p for p in str(text).replace(",", "-").split("-") if p.strip()]
    vals = [float(p) for p in parts]
    if not vals:
        raise ValueError(f"empty density profile {text!r}")
    if any(v > 1 for v in vals):
        vals = [v / 100 for v in vals]
    for v in vals:
        if not 0 < v <= 1:
            raise ValueError(f"density {v} outside (0, 1]")
    return vals


def apply_density_profile(net: NetworkSpec, profile) -> tuple[NetworkSpec, list[float]]:
    """Prune every weighted layer to its density and rebuild kernels and schedules.

    ``profile`` gives one density per weighted layer, or a single value
    applied uniformly. Weights are already raw fixed point, so quantization
    here is the identity. Returns the new network and the achieved density
    of each weighted layer.
    """
    profile = list(profile) if np.ndim(profile) else [float(profile)]
    weighted = net.weighted_layers()
    if len(profile) == 1:
        profile = profile * len(weighted)
    if len(profile) != len(weighted):
        raise DimensionError(f"profile has {len(profile)} densities for {len(weighted)} weighted layers")
    layers = list(net.layers)
    achieved = []
    for i, density in zip(weighted, profile):
        layer = layers[i]
        dense = layer.dense()
        raw = quantize_w(dequantize_w(dense, net.frac_bits), net.frac_bits)
        pruned = raw * prune_l1(raw, density)
        if layer.kind == "conv":
            dims: ConvDims = layer.dims
            new = ConvLayer(coo_encode(pruned, dims), layer.params, layer.pad, layer.name)
        else:
            new = FcLayer(MaskedFcWeights(pruned), layer.params, layer.name, layer.readout)
        achieved.append(new.nnz / new.n_weights)
        layers[i] = new
    out = NetworkSpec(layers, net.in_channels, net.in_width, net.frac_bits, net.d_bits, net.name)
    return out, achieved


def requantize_network(net: NetworkSpec, frac_bits: int) -> NetworkSpec:
    """Re-express every weight and neuron parameter with ``frac_bits`` fractional bits.

    Weights are re-rounded (half to even, clipped). Zeros stay zero, but
    with fewer fractional bits small weights can round to zero as well.
    Neuron parameters must be exactly representable at the new precision.
    """
    check_frac_bits(frac_bits)
    if frac_bits == net.frac_bits:
        return net
    old = net.frac_bits

    def params(p):
        return NeuronParams.from_float(*(dequantize_w(getattr(p, n), old) for n in ("alpha", "theta", "u_th0")),
                                       frac_bits=frac_bits)

    layers = []
    for layer in net.layers:
        if layer.kind == "conv":
            raw = quantize_w(dequantize_w(layer.dense(), old), frac_bits)
            layers.append(ConvLayer(coo_encode(raw, layer.dims), params(layer.params), layer.pad, layer.name))
        elif layer.kind == "fc":
            raw = quantize_w(dequantize_w(layer.dense(), old), frac_bits)
            layers.append(FcLayer(MaskedFcWeights(raw), params(layer.params), layer.name, layer.readout))
        else:
            layers.append(layer)
    return NetworkSpec(layers, net.in_channels, net.in_width, frac_bits, net.d_bits, net.name)
