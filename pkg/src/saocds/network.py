"""Network descriptions: layer records, dimension chaining and stock topologies.

Layer shapes are ``(channels, width)`` at H = 1. A conv layer consumes
``ic`` rows of its unpadded input width and produces ``oc`` rows of
width ``oi``; a pool layer keeps the channel count and divides the width;
an FC layer flattens its input channel-major and produces one row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (ConvDims, DimensionError, IterationSchedule, NeuronParams, SparseKernelCOO,
                   SpikeTensor, build_schedule, coo_decode, coo_encode)
from .fc import MaskedFcWeights
from .fixed import DEFAULT_FRAC_BITS

Shape = tuple[int, int]


@dataclass(eq=False)
class ConvLayer:
    kernel: SparseKernelCOO
    params: NeuronParams
    pad: int = 0
    name: str = ""
    schedule: IterationSchedule = field(init=False, repr=False)

    kind = "conv"

    def __post_init__(self):
        self.kernel = self.kernel.validate()
        if not self.kernel.is_sorted():
            self.kernel = self.kernel.sorted()
        if self.pad < 0 or 2 * self.pad >= self.kernel.dims.in_w:
            raise DimensionError(f"padding {self.pad} leaves no input for in_w={self.kernel.dims.in_w}")
        self.schedule = build_schedule(self.kernel)

    @classmethod
    def from_dense(cls, weights, params: NeuronParams, in_width: int, pad: int = 0,
                   name: str = "") -> "ConvLayer":
        w = np.asarray(weights)
        if w.ndim != 3:
            raise DimensionError(f"conv weights must be [oc][ic][kw], got shape {w.shape}")
        oc, ic, kw = w.shape
        oi = in_width + 2 * pad - kw + 1
        if oi <= 0:
            raise DimensionError(f"kernel width {kw} exceeds padded input width {in_width + 2 * pad}")
        return cls(coo_encode(w, ConvDims(kw, ic, oc, oi)), params, pad, name)

    @property
    def dims(self) -> ConvDims:
        return self.kernel.dims

    @property
    def in_shape(self) -> Shape:
        return (self.dims.ic, self.dims.in_w - 2 * self.pad)

    def out_shape(self, in_shape: Shape) -> Shape:
        if tuple(in_shape) != self.in_shape:
            raise DimensionError(f"expects input {self.in_shape}, got {tuple(in_shape)}")
        return (self.dims.oc, self.dims.oi)

    def dense(self) -> np.ndarray:
        return coo_decode(self.kernel)

    @property
    def n_weights(self) -> int:
        return self.dims.n_weights

    @property
    def nnz(self) -> int:
        return self.kernel.nnz


@dataclass(eq=False)
class PoolLayer:
    window: int = 2
    name: str = ""

    kind = "pool"

    def out_shape(self, in_shape: Shape) -> Shape:
        c, w = in_shape
        if self.window <= 0 or w < self.window:
            raise DimensionError(f"pool window {self.window} does not fit width {w}")
        return (c, w // self.window)


@dataclass(eq=False)
class FcLayer:
    weights: MaskedFcWeights
    params: NeuronParams
    name: str = ""
    readout: str = "spikes"  # "potentials" also records the final potentials per timestep

    kind = "fc"

    def __post_init__(self):
        if not isinstance(self.weights, MaskedFcWeights):
            self.weights = MaskedFcWeights(np.asarray(self.weights))
        if self.readout not in ("spikes", "potentials"):
            raise ValueError(f"readout must be 'spikes' or 'potentials', got {self.readout!r}")

    def out_shape(self, in_shape: Shape) -> Shape:
        c, w = in_shape
        if c * w != self.weights.n_in:
            raise DimensionError(f"expects {self.weights.n_in} inputs, got {c}x{w}={c * w}")
        return (1, self.weights.n_out)

    def dense(self) -> np.ndarray:
        return self.weights.weights

    @property
    def n_weights(self) -> int:
        return self.weights.weights.size

    @property
    def nnz(self) -> int:
        return self.weights.nnz


Layer = ConvLayer | PoolLayer | FcLayer


@dataclass(eq=False)
class NetworkSpec:
    layers: list
    in_channels: int
    in_width: int
    frac_bits: int = DEFAULT_FRAC_BITS
    d_bits: int = 16
    name: str = ""

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise DimensionError("a network needs at least one layer")
        self.shapes()
        for i, layer in enumerate(self.layers):
            params = getattr(layer, "params", None)
            if params is not None and params.frac_bits != self.frac_bits:
                raise ValueError(f"layer {i}: neuron params use {params.frac_bits} fractional bits, "
                                 f"network uses {self.frac_bits}")

    def shapes(self) -> list[tuple[Shape, Shape]]:
        """``(in_shape, out_shape)`` per layer; raises on a broken chain."""
        out = []
        shape: Shape = (self.in_channels, self.in_width)
        for i, layer in enumerate(self.layers):
            try:
                nxt = layer.out_shape(shape)
            except DimensionError as exc:
                src = "network input" if i == 0 else f"layer {i - 1} ({self.layers[i - 1].kind})"
                raise DimensionError(f"layer {i} ({layer.kind}) fed by {src}: {exc}") from None
            out.append((shape, nxt))
            shape = nxt
        return out

    @property
    def out_shape(self) -> Shape:
        return self.shapes()[-1][1]

    def weighted_layers(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.kind in ("conv", "fc")]

    def conv_layers(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.kind == "conv"]

    def check_input(self, x: SpikeTensor) -> None:
        if (x.channels, x.width) != (self.in_channels, self.in_width):
            raise DimensionError(f"input is {x.channels}x{x.width}, network expects "
                                 f"{self.in_channels}x{self.in_width}")


# -- stock topologies --------------------------------------------------------

# Five weighted layers on a (2, 128) IQ frame. Conv dims match the weight
# counts 352 / 5632 / 10240; pool and FC widths are a chosen default.
DEFAULT_TOPOLOGY = (
    {"kind": "conv", "kw": 11, "oc": 16},
    {"kind": "pool", "window": 2},
    {"kind": "conv", "kw": 11, "oc": 32},
    {"kind": "pool", "window": 2},
    {"kind": "conv", "kw": 5, "oc": 64},
    {"kind": "pool", "window": 2},
    {"kind": "fc", "out": 128},
    {"kind": "fc", "out": 11},
)
DEFAULT_PARAMS = {"alpha": 0.875, "theta": 1.0, "u_th0": 1.0}


def default_params(frac_bits: int = DEFAULT_FRAC_BITS, **overrides) -> NeuronParams:
    vals = {**DEFAULT_PARAMS, **overrides}
    return NeuronParams.from_float(vals["alpha"], vals["theta"], vals["u_th0"], frac_bits)


def build_network(topology, weights, in_channels: int, in_width: int,
                  params=None, frac_bits: int = DEFAULT_FRAC_BITS, name: str = "") -> NetworkSpec:
    """Assemble a network from layer records and per-weighted-layer raw weight arrays.

    ``params`` is a single :class:`NeuronParams` or a list with one entry
    per weighted layer. Conv layers use "same" padding ``(kw - 1) // 2``
    unless a record gives ``pad``.
    """
    weights = list(weights)
    n_weighted = sum(1 for rec in topology if rec["kind"] != "pool")
    if len(weights) != n_weighted:
        raise DimensionError(f"{len(weights)} weight arrays for {n_weighted} weighted layers")
    if params is None:
        params = default_params(frac_bits)
    plist = list(params) if isinstance(params, (list, tuple)) else [params] * n_weighted
    layers = []
    shape = (in_channels, in_width)
    wi = 0
    for i, rec in enumerate(topology):
        lname = rec.get("name", f"{rec['kind']}{i}")
        if rec["kind"] == "conv":
            pad = rec.get("pad", (rec["kw"] - 1) // 2)
            layer = ConvLayer.from_dense(weights[wi], plist[wi], shape[1], pad, lname)
            wi += 1
        elif rec["kind"] == "pool":
            layer = PoolLayer(rec.get("window", 2), lname)
        elif rec["kind"] == "fc":
            layer = FcLayer(MaskedFcWeights(np.asarray(weights[wi])), plist[wi], lname,
                            rec.get("readout", "spikes"))
            wi += 1
        else:
            raise ValueError(f"unknown layer kind {rec['kind']!r}")
        shape = layer.out_shape(shape)
        layers.append(layer)
    return NetworkSpec(layers, in_channels, in_width, frac_bits, name=name)


def weight_shapes(topology, in_channels: int, in_width: int) -> list[tuple[int, ...]]:
    """Raw weight array shape for every weighted layer of ``topology``."""
    shapes = []
    c, w = in_channels, in_width
    for rec in topology:
        if rec["kind"] == "conv":
            kw = rec["kw"]
            pad = rec.get("pad", (kw - 1) // 2)
            shapes.append((rec["oc"], c, kw))
            c, w = rec["oc"], w + 2 * pad - kw + 1
        elif rec["kind"] == "pool":
            w //= rec.get("window", 2)
        else:
            shapes.append((rec["out"], c * w))
            c, w = 1, rec["out"]
    return shapes


def random_weights(shape, rng: np.random.Generator, scale: float = 64.0,
                   bias: float = 0.0) -> np.ndarray:
    """Nonzero random raw weights (normal magnitudes, never exactly zero)."""
    w = np.rint(rng.normal(bias, scale, size=shape)).astype(np.int64)
    w[w == 0] = 1
    return np.clip(w, -32768, 32767)


def default_network(seed: int = 0, frac_bits: int = DEFAULT_FRAC_BITS) -> NetworkSpec:
    """The five-weighted-layer classifier with seeded random dense weights.

    No trained weights are available, so weights are random but fully
    dense; prune them with :func:`saocds.compression.apply_density_profile`.
    """
    rng = np.random.default_rng(seed)
    scale = 1 << frac_bits
    weights = []
    for shape in weight_shapes(DEFAULT_TOPOLOGY, 2, 128):
        fan_in = int(np.prod(shape[1:]))
        # scaled so roughly a third of neurons cross threshold at input rate 0.5
        weights.append(random_weights(shape, rng, scale=1.2 * scale / np.sqrt(fan_in * 0.5),
                                      bias=0.6 * scale / (fan_in * 0.5)))
    return build_network(DEFAULT_TOPOLOGY, weights, 2, 128, frac_bits=frac_bits, name="default")


# Kernel positions (ic, ci) of the three nonzeros shared by all four output channels.
FIG3_NONZEROS = ((0, 1), (1, 0), (1, 1))
FIG3_VALUES = (1.0, 0.5, -0.25)
FIG5_IFM = ((1, 0, 1, 0, 1, 1),
            (0, 1, 1, 0, 0, 0))


def fig3_example(frac_bits: int = DEFAULT_FRAC_BITS) -> tuple[NetworkSpec, SpikeTensor]:
    """Single conv layer with dims (kw=3, ic=2, oc=4, oi=4) and its one-timestep input.

    Every kernel holds 3 of 6 weights and the 2x6 input holds 6 active bits
    laid out so the four sliding windows contain 4, 3, 3 and 2 ones and
    each nonzero weight sees exactly two active inputs.
    """
    w = np.zeros((4, 2, 3), dtype=np.int64)
    for (ic, ci), val in zip(FIG3_NONZEROS, FIG3_VALUES):
        w[:, ic, ci] = int(val * (1 << frac_bits))
    params = NeuronParams.from_float(0.5, 0.5, 0.5, frac_bits)
    layer = ConvLayer.from_dense(w, params, in_width=6, pad=0, name="fig3")
    net = NetworkSpec([layer], 2, 6, frac_bits, name="fig3")
    ifm = SpikeTensor(np.array([FIG5_IFM], dtype=np.uint8))
    return net, ifm
