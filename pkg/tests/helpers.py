"""Random problem instances shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from saocds.compression import prune_l1
from saocds.core import NeuronParams
from saocds.network import ConvLayer, FcLayer, NetworkSpec, PoolLayer
from saocds.fc import MaskedFcWeights

FRAC = 8


def random_params(rng, shape=None) -> NeuronParams:
    """Raw LIF parameters; per-neuron when ``shape`` is given."""
    size = shape if shape is not None else ()
    alpha = rng.integers(0, (1 << FRAC) + 1, size=size)
    theta = rng.integers(0, 2 << FRAC, size=size)
    u = rng.integers(-(1 << FRAC), 3 << FRAC, size=size)
    return NeuronParams(np.asarray(alpha), np.asarray(theta), np.asarray(u), FRAC)


def random_pruned(rng, shape, density: float, scale: int = 200) -> np.ndarray:
    w = rng.integers(-scale, scale + 1, size=shape)
    w[w == 0] = 1
    return w * prune_l1(w, density)


def random_conv_instance(rng, max_kw=5, max_ic=8, max_oc=8, max_oi=16):
    """One random single-conv-layer network, its oracle description and dims."""
    kw = int(rng.integers(1, max_kw + 1))
    ic = int(rng.integers(1, max_ic + 1))
    oc = int(rng.integers(1, max_oc + 1))
    oi = int(rng.integers(1, max_oi + 1))
    pad = int(rng.integers(0, (kw - 1) // 2 + 1))
    in_w = oi + kw - 1 - 2 * pad
    density = float(rng.choice([0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0]))
    w = random_pruned(rng, (oc, ic, kw), density)
    per_neuron = rng.random() < 0.3
    params = random_params(rng, (oc, oi) if per_neuron else None)
    layer = ConvLayer.from_dense(w, params, in_w, pad)
    net = NetworkSpec([layer], ic, in_w, FRAC)
    desc = [{"kind": "conv", "w": w, "pad": pad, "params": (params.alpha, params.theta, params.u_th0)}]
    return net, desc


def random_network(rng, max_kw=5, max_c=8, max_oi=16, density=None):
    """Small conv [pool] conv [pool] fc chain with random masks and parameters."""
    width = int(rng.integers(4, max_oi + 1))
    c = int(rng.integers(1, max_c + 1))
    in_c, in_w = c, width
    layers, desc = [], []
    if density is None:
        density = float(rng.choice([0.05, 0.1, 0.25, 0.5, 0.75, 1.0]))
    for _ in range(int(rng.integers(1, 3))):
        kw = int(rng.integers(1, min(max_kw, width) + 1))
        oc = int(rng.integers(1, max_c + 1))
        pad = int(rng.integers(0, (kw - 1) // 2 + 1))
        w = random_pruned(rng, (oc, c, kw), density)
        p = random_params(rng)
        layers.append(ConvLayer.from_dense(w, p, width, pad))
        desc.append({"kind": "conv", "w": w, "pad": pad, "params": (p.alpha, p.theta, p.u_th0)})
        c, width = oc, width + 2 * pad - kw + 1
        if width >= 2 and rng.random() < 0.5:
            layers.append(PoolLayer(2))
            desc.append({"kind": "pool", "window": 2})
            width //= 2
    n_out = int(rng.integers(1, 9))
    w = random_pruned(rng, (n_out, c * width), density)
    p = random_params(rng)
    layers.append(FcLayer(MaskedFcWeights(w), p))
    desc.append({"kind": "fc", "w": w, "params": (p.alpha, p.theta, p.u_th0)})
    return NetworkSpec(layers, in_c, in_w, FRAC), desc
