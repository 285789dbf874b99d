"""Domain types shared by every engine.

Holds the COO kernel format (with channel indices packed into one row
index), its storage accounting, the static iteration schedule that the
streaming conv engine replays every timestep, plus spike tensors, neuron
parameters and cost counters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .fixed import DEFAULT_FRAC_BITS, INT16_MAX, INT16_MIN, check_frac_bits, to_raw


class SaocdsError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SaocdsError, ValueError):
    """Array shapes or layer dimensions are inconsistent."""


class CooFormatError(SaocdsError, ValueError):
    """A COO kernel is structurally corrupt (bad index, zero value, duplicate)."""


class ScheduleError(SaocdsError):
    """A kernel cannot be scheduled, or a schedule does not match its kernel."""


# -- index arithmetic --------------------------------------------------------


def ic_index(ri, n_ic: int):
    """Input channel packed in row index ``ri``."""
    if n_ic <= 0:
        raise ValueError("n_ic must be positive")
    return ri % n_ic


def oc_index(ri, n_ic: int):
    """Output channel packed in row index ``ri``."""
    if n_ic <= 0:
        raise ValueError("n_ic must be positive")
    return ri // n_ic


def index_bits(n: int) -> int:
    """Bits needed to address ``n`` distinct values (at least one)."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


# -- kernel types ------------------------------------------------------------


@dataclass(frozen=True)
class ConvDims:
    """Dimensions of one H=1, stride-1 convolution.

    ``in_w`` is the padded input width, always ``oi + kw - 1``.
    """

    kw: int
    ic: int
    oc: int
    oi: int = 1

    def __post_init__(self):
        for name in ("kw", "ic", "oc", "oi"):
            if int(getattr(self, name)) <= 0:
                raise DimensionError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def in_w(self) -> int:
        return self.oi + self.kw - 1

    @property
    def n_weights(self) -> int:
        return self.kw * self.ic * self.oc

    @property
    def kernel_shape(self) -> tuple[int, int, int]:
        return (self.oc, self.ic, self.kw)

    def default_index_bits(self) -> tuple[int, int]:
        """(row-index bits, column-index bits) sized to these dims."""
        return index_bits(self.ic * self.oc), index_bits(self.kw)


class CooEntry(NamedTuple):
    d: int
    ri: int
    ci: int


@dataclass(frozen=True, eq=False)
class SparseKernelCOO:
    """Nonzero weights of one conv kernel as parallel (d, ri, ci) arrays.

    ``ri = oc * ic_count + ic``. Construction only checks that the arrays
    line up; :meth:`validate` checks the structural invariants and is called
    by every consumer. The canonical order is (oc, ic, ci), which is what
    :func:`coo_encode` produces.
    """

    dims: ConvDims
    d: np.ndarray
    ri: np.ndarray
    ci: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.int64).reshape(-1)
        ri = np.asarray(self.ri, dtype=np.int64).reshape(-1)
        ci = np.asarray(self.ci, dtype=np.int64).reshape(-1)
        if not len(d) == len(ri) == len(ci):
            raise CooFormatError(
                f"COO arrays differ in length: d={len(d)}, ri={len(ri)}, ci={len(ci)}"
            )
        for name, arr in (("d", d), ("ri", ri), ("ci", ci)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, dims: ConvDims, entries) -> "SparseKernelCOO":
        entries = list(entries)
        cols = list(zip(*entries)) if entries else ([], [], [])
        return cls(dims, np.array(cols[0], dtype=np.int64),
                   np.array(cols[1], dtype=np.int64), np.array(cols[2], dtype=np.int64))

    @property
    def nnz(self) -> int:
        return len(self.d)

    @property
    def entries(self) -> tuple[CooEntry, ...]:
        return tuple(CooEntry(int(a), int(b), int(c)) for a, b, c in zip(self.d, self.ri, self.ci))

    @property
    def oc_of(self) -> np.ndarray:
        return oc_index(self.ri, self.dims.ic)

    @property
    def ic_of(self) -> np.ndarray:
        return ic_index(self.ri, self.dims.ic)

    @property
    def density(self) -> float:
        return self.nnz / self.dims.n_weights

    def validate(self) -> "SparseKernelCOO":
        dims = self.dims
        bad = np.flatnonzero((self.ri < 0) | (self.ri >= dims.ic * dims.oc))
        if bad.size:
            i = int(bad[0])
            raise CooFormatError(
                f"entry {i}: row index {int(self.ri[i])} outside [0, {dims.ic * dims.oc})"
            )
        bad = np.flatnonzero((self.ci < 0) | (self.ci >= dims.kw))
        if bad.size:
            i = int(bad[0])
            raise CooFormatError(f"entry {i}: column index {int(self.ci[i])} outside [0, {dims.kw})")
        bad = np.flatnonzero(self.d == 0)
        if bad.size:
            raise CooFormatError(f"entry {int(bad[0])}: stored weight is zero")
        bad = np.flatnonzero((self.d < INT16_MIN) | (self.d > INT16_MAX))
        if bad.size:
            raise CooFormatError(f"entry {int(bad[0])}: weight {int(self.d[bad[0]])} exceeds 16 bits")
        keys = self.ri * dims.kw + self.ci
        if len(np.unique(keys)) != len(keys):
            _, first = np.unique(keys, return_index=True)
            dup = sorted(set(range(len(keys))) - set(first.tolist()))[0]
            raise CooFormatError(
                f"entry {dup}: duplicate coordinate (ri={int(self.ri[dup])}, ci={int(self.ci[dup])})"
            )
        return self

    def is_sorted(self) -> bool:
        keys = self.ri * self.dims.kw + self.ci
        return bool(np.all(np.diff(keys) > 0))

    def sorted(self) -> "SparseKernelCOO":
        order = np.lexsort((self.ci, self.ri))
        return SparseKernelCOO(self.dims, self.d[order], self.ri[order], self.ci[order])

    def with_oi(self, oi: int) -> "SparseKernelCOO":
        dims = ConvDims(self.dims.kw, self.dims.ic, self.dims.oc, oi)
        return SparseKernelCOO(dims, self.d, self.ri, self.ci)


def coo_encode(dense, dims: ConvDims | None = None) -> SparseKernelCOO:
    """Compress a dense raw kernel laid out ``[oc][ic][ci]``.

    If ``dims`` is omitted it is inferred from the array with ``oi = 1``.
    """
    w = np.asarray(dense)
    if w.ndim != 3:
        raise DimensionError(f"kernel must be 3-D [oc][ic][ci], got shape {w.shape}")
    if dims is None:
        dims = ConvDims(kw=w.shape[2], ic=w.shape[1], oc=w.shape[0])
    elif w.shape != dims.kernel_shape:
        raise DimensionError(f"kernel shape {w.shape} does not match dims {dims.kernel_shape}")
    if not np.issubdtype(w.dtype, np.integer):
        if not np.all(np.isfinite(w)) or np.any(w != np.round(w)):
            raise TypeError("coo_encode expects raw fixed-point integers; quantize first")
    w = w.astype(np.int64)
    if w.size and (w.min() < INT16_MIN or w.max() > INT16_MAX):
        raise CooFormatError("kernel values exceed the signed 16-bit range")
    oc, ic, ci = np.nonzero(w)  # C order is (oc, ic, ci) lexicographic
    return SparseKernelCOO(dims, w[oc, ic, ci], oc * dims.ic + ic, ci)


def coo_decode(kernel: SparseKernelCOO) -> np.ndarray:
    """Expand a COO kernel back to a dense int64 array ``[oc][ic][ci]``."""
    kernel.validate()
    dims = kernel.dims
    out = np.zeros(dims.kernel_shape, dtype=np.int64)
    out[kernel.oc_of, kernel.ic_of, kernel.ci] = kernel.d
    return out


# -- storage accounting ------------------------------------------------------


def break_even_density(d_bits: int, ri_bits: int, ci_bits: int) -> float:
    """Density below which COO storage beats dense storage."""
    if min(d_bits, ri_bits, ci_bits) <= 0:
        raise ValueError("bit widths must be positive")
    return d_bits / (d_bits + ri_bits + ci_bits)


def _check_index_widths(dims: ConvDims, ri_bits: int, ci_bits: int) -> None:
    need_ri, need_ci = dims.default_index_bits()
    if ri_bits < need_ri:
        raise ValueError(f"ri_bits={ri_bits} cannot address {dims.ic * dims.oc} rows (need {need_ri})")
    if ci_bits < need_ci:
        raise ValueError(f"ci_bits={ci_bits} cannot address {dims.kw} columns (need {need_ci})")


def coo_storage_bits(kernel: SparseKernelCOO, d_bits: int = 16,
                     ri_bits: int | None = None, ci_bits: int | None = None) -> int:
    need_ri, need_ci = kernel.dims.default_index_bits()
    ri_bits = need_ri if ri_bits is None else ri_bits
    ci_bits = need_ci if ci_bits is None else ci_bits
    _check_index_widths(kernel.dims, ri_bits, ci_bits)
    return kernel.nnz * (d_bits + ri_bits + ci_bits)


def coo_bits_per_density(dims: ConvDims, d_bits: int = 16,
                         ri_bits: int | None = None, ci_bits: int | None = None) -> int:
    """COO bits at density 1.0, i.e. the coefficient of X in ``bits = c * X``."""
    need_ri, need_ci = dims.default_index_bits()
    ri_bits = need_ri if ri_bits is None else ri_bits
    ci_bits = need_ci if ci_bits is None else ci_bits
    _check_index_widths(dims, ri_bits, ci_bits)
    return dims.n_weights * (d_bits + ri_bits + ci_bits)


def dense_storage_bits(dims: ConvDims, d_bits: int = 16) -> int:
    return dims.n_weights * d_bits


# -- iteration schedule ------------------------------------------------------


class IterKind(enum.IntEnum):
    NORMAL = 0
    EMPTY = 1
    EXTRA = 2


class Tag(NamedTuple):
    kind: IterKind
    index: int  # nnz index for NORMAL, output channel for EXTRA, -1 for EMPTY


@dataclass(frozen=True, eq=False)
class IterationSchedule:
    """Per-timestep iteration plan of one conv layer.

    ``kinds[r]`` and ``args[r]`` describe iteration ``r``; see :class:`Tag`.
    """

    kinds: np.ndarray
    args: np.ndarray

    def __post_init__(self):
        for name in ("kinds", "args"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def reps(self) -> int:
        return len(self.kinds)

    @property
    def n_normal(self) -> int:
        return int(np.count_nonzero(self.kinds == IterKind.NORMAL))

    @property
    def n_empty(self) -> int:
        return int(np.count_nonzero(self.kinds == IterKind.EMPTY))

    @property
    def n_extra(self) -> int:
        return int(np.count_nonzero(self.kinds == IterKind.EXTRA))

    @property
    def overhead(self) -> int:
        return self.n_empty + self.n_extra

    @property
    def tags(self) -> list[Tag]:
        return [Tag(IterKind(k), int(a)) for k, a in zip(self.kinds, self.args)]

    def summary(self) -> dict:
        return {"reps": self.reps, "normal": self.n_normal,
                "empty": self.n_empty, "extra": self.n_extra}


def build_schedule(kernel: SparseKernelCOO) -> IterationSchedule:
    """Precompute the iteration tags of the streaming conv loop.

    One input channel becomes readable per iteration. A nonzero whose input
    channel has not arrived yet costs an EMPTY iteration; an output channel
    without nonzeros costs one EXTRA iteration so that outputs are still
    emitted in channel order.
    """
    kernel.validate()
    if not kernel.is_sorted():
        raise ScheduleError("kernel entries are not sorted by (oc, ic, ci); use coo_encode or .sorted()")
    dims = kernel.dims
    ocs = kernel.oc_of
    ics = kernel.ic_of
    starts = np.searchsorted(ocs, np.arange(dims.oc + 1))
    kinds: list[int] = []
    args: list[int] = []
    for oc in range(dims.oc):
        lo, hi = int(starts[oc]), int(starts[oc + 1])
        if lo == hi:
            kinds.append(IterKind.EXTRA)
            args.append(oc)
            continue
        for k in range(lo, hi):
            # channels readable after this iteration's read
            while ics[k] >= min(len(kinds) + 1, dims.ic):
                kinds.append(IterKind.EMPTY)
                args.append(-1)
            kinds.append(IterKind.NORMAL)
            args.append(k)
    return IterationSchedule(np.array(kinds, dtype=np.int64), np.array(args, dtype=np.int64))


# -- spike tensors -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpikeTensor:
    """Binary feature maps over time, indexed ``bits[t][channel][pixel]``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 3:
            raise DimensionError(f"spike tensor must be 3-D (T, C, W), got shape {b.shape}")
        if b.size and not np.all((b == 0) | (b == 1)):
            raise ValueError("spike tensor must be binary")
        b = b.astype(np.uint8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def zeros(cls, t: int, channels: int, width: int) -> "SpikeTensor":
        return cls(np.zeros((t, channels, width), dtype=np.uint8))

    @property
    def t(self) -> int:
        return self.bits.shape[0]

    @property
    def channels(self) -> int:
        return self.bits.shape[1]

    @property
    def width(self) -> int:
        return self.bits.shape[2]

    @property
    def rate(self) -> float:
        return float(self.bits.mean()) if self.bits.size else 0.0

    def __eq__(self, other):
        if not isinstance(other, SpikeTensor):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self):
        return f"SpikeTensor(t={self.t}, channels={self.channels}, width={self.width}, rate={self.rate:.3f})"


# -- neuron parameters -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NeuronParams:
    """LIF parameters as raw fixed-point values.

    Each of ``alpha``, ``theta`` and ``u_th0`` is a scalar (shared by the
    layer) or an array broadcastable to the layer's potential bank, which
    gives per-channel or per-neuron values.
    """

    alpha: np.ndarray
    theta: np.ndarray
    u_th0: np.ndarray
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        check_frac_bits(self.frac_bits)
        one = 1 << self.frac_bits
        for name in ("alpha", "theta", "u_th0"):
            arr = np.asarray(getattr(self, name))
            if not np.issubdtype(arr.dtype, np.integer):
                raise TypeError(f"{name} must hold raw integers; use NeuronParams.from_float")
            arr = arr.astype(np.int64)
            if arr.size and (arr.min() < INT16_MIN or arr.max() > INT16_MAX):
                raise ValueError(f"{name} exceeds the signed 16-bit range")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.alpha.size and (self.alpha.min() < 0 or self.alpha.max() > one):
            raise ValueError("alpha must lie in [0, 1]")
        if self.theta.size and self.theta.min() < 0:
            raise ValueError("theta must be non-negative")

    @classmethod
    def from_float(cls, alpha, theta, u_th0, frac_bits: int = DEFAULT_FRAC_BITS) -> "NeuronParams":
        check_frac_bits(frac_bits)
        raw = {}
        for name, val in (("alpha", alpha), ("theta", theta), ("u_th0", u_th0)):
            r = np.asarray(to_raw(val, frac_bits), dtype=np.int64)
            if not np.array_equal(r / (1 << frac_bits), np.asarray(val, dtype=np.float64)):
                raise ValueError(f"{name}={val!r} is not exactly representable with {frac_bits} fractional bits")
            raw[name] = r
        return cls(frac_bits=frac_bits, **raw)

    def broadcast(self, shape) -> "NeuronParams":
        """Materialize every parameter at the full bank ``shape``."""
        try:
            arrs = [np.broadcast_to(getattr(self, n), shape) for n in ("alpha", "theta", "u_th0")]
        except ValueError as exc:
            raise DimensionError(f"neuron parameters do not broadcast to bank shape {shape}") from exc
        return NeuronParams(*[a.copy() for a in arrs], frac_bits=self.frac_bits)

    def is_scalar(self) -> bool:
        return self.alpha.ndim == self.theta.ndim == self.u_th0.ndim == 0


# -- cost counters -----------------------------------------------------------


@dataclass
class CostCounters:
    """Event tallies of one layer, accumulated over timesteps."""

    input_fetches: int = 0
    weight_fetches: int = 0
    accumulations: int = 0
    iters_normal: int = 0
    iters_empty: int = 0
    iters_extra: int = 0
    bank_loads: int = 0
    bank_stores: int = 0
    rows_drained: int = 0
    timesteps: int = 0
    d_bits: int = field(default=16, compare=False)

    @property
    def input_bits(self) -> int:
        return self.input_fetches

    @property
    def weight_bits(self) -> int:
        return self.weight_fetches * self.d_bits

    @property
    def total_bits(self) -> int:
        return self.input_bits + self.weight_bits

    @property
    def iterations(self) -> int:
        return self.iters_normal + self.iters_empty + self.iters_extra

    def __add__(self, other: "CostCounters") -> "CostCounters":
        out = CostCounters(d_bits=self.d_bits)
        for f in fields(self):
            if f.name != "d_bits":
                setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        return out

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(input_bits=self.input_bits, weight_bits=self.weight_bits, total_bits=self.total_bits)
        return d
