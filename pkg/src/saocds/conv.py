"""Sparsity-aware output-channel dataflow for one convolutional layer.

The engine walks the COO nonzeros in (oc, ic, ci) order. Each nonzero
weight is fetched once and applied to every output pixel it can reach,
gated by the buffered input bit under it. Output channels are finished
and emitted strictly in order, so a downstream layer can consume them as
its input channels without any controller.

The per-timestep loop below evaluates the branch conditions at runtime
and checks every iteration against the precomputed
:class:`~saocds.core.IterationSchedule`; a mismatch raises
:class:`~saocds.core.ScheduleError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (CostCounters, IterationSchedule, IterKind, NeuronParams, ScheduleError,
                   SparseKernelCOO, SpikeTensor, build_schedule)
from .lif import PotentialBank, check_bank
from .stream import READ, Emit, Process, check_row, drive


@dataclass
class LayerRunResult:
    ofm: SpikeTensor
    counters: CostCounters
    bank: PotentialBank


def _mismatch(r: int, expected: str, kind: int, arg: int) -> ScheduleError:
    return ScheduleError(
        f"iteration {r}: runtime branch is {expected} but schedule says "
        f"{IterKind(kind).name}({arg})"
    )


def conv_timestep_process(kernel: SparseKernelCOO, schedule: IterationSchedule,
                          bank: PotentialBank, params: NeuronParams,
                          counters: CostCounters, pad: int = 0) -> Process:
    """One timestep of the streaming conv loop as a row-stream process.

    Reads ``IC`` rows of width ``in_w - 2*pad`` and emits ``OC`` rows of
    width ``OI``. ``params`` must already be broadcast to the bank shape.
    """
    dims = kernel.dims
    n_ic, n_oc, oi_n = dims.ic, dims.oc, dims.oi
    width = dims.in_w - 2 * pad
    ocs = kernel.oc_of.tolist()
    ics = kernel.ic_of.tolist()
    cis = kernel.ci.tolist()
    ds = kernel.d.tolist()
    n_nnz = len(ds)
    kinds = schedule.kinds.tolist()
    args = schedule.args.tolist()

    buf = np.zeros((n_ic, dims.in_w), dtype=np.int64)
    decayed = np.zeros(n_oc, dtype=bool)
    ic_read = 0
    pre_oc = n_oc
    oc = 0
    nnz = 0

    def load(c):
        if decayed[c]:
            raise AssertionError(f"output channel {c} decayed twice in one timestep")
        decayed[c] = True
        bank.begin(c, params)
        counters.bank_loads += 1

    def store(c):
        counters.bank_stores += 1
        return bank.finish(c, params)

    for r in range(schedule.reps):
        kind, arg = kinds[r], args[r]
        nnz_oc = ocs[nnz] if nnz < n_nnz else n_oc
        nnz_next_oc = ocs[nnz + 1] if nnz + 1 < n_nnz else n_oc
        if ic_read < n_ic:
            row = yield READ
            buf[ic_read, pad:pad + width] = check_row(row, width)
            ic_read += 1
        if oc != nnz_oc:
            if kind != IterKind.EXTRA or arg != oc:
                raise _mismatch(r, f"EXTRA({oc})", kind, arg)
            counters.iters_extra += 1
            load(oc)
            yield Emit(store(oc))
            oc += 1
            continue
        ic = ics[nnz]
        if ic >= ic_read:
            if kind != IterKind.EMPTY:
                raise _mismatch(r, "EMPTY", kind, arg)
            counters.iters_empty += 1
            continue
        if kind != IterKind.NORMAL or arg != nnz:
            raise _mismatch(r, f"NORMAL({nnz})", kind, arg)
        counters.iters_normal += 1
        if oc != pre_oc:
            load(oc)
        ci = cis[nnz]
        gate = buf[ic, ci:ci + oi_n]
        counters.weight_fetches += 1
        counters.input_fetches += oi_n
        counters.accumulations += int(np.count_nonzero(gate))
        bank.v[oc] += ds[nnz] * gate
        pre_oc = oc
        if nnz_next_oc != oc:
            yield Emit(store(oc))
            oc += 1
        nnz += 1

    if oc != n_oc or nnz != n_nnz:
        raise ScheduleError(
            f"schedule ended at oc={oc}/{n_oc}, nnz={nnz}/{n_nnz}; it was not built for this kernel"
        )
    # Keep the stream aligned when the schedule finishes before every channel was read.
    while ic_read < n_ic:
        check_row((yield READ), width)
        ic_read += 1
        counters.rows_drained += 1
    counters.timesteps += 1


class SaocdsConv:
    """Stateful conv engine: kernel, schedule, neuron params and potential bank."""

    def __init__(self, kernel: SparseKernelCOO, params: NeuronParams, pad: int = 0,
                 schedule: IterationSchedule | None = None, d_bits: int = 16):
        kernel.validate()
        if not kernel.is_sorted():
            raise ScheduleError("kernel entries are not in (oc, ic, ci) order")
        self.kernel = kernel
        self.schedule = build_schedule(kernel) if schedule is None else schedule
        self.pad = pad
        self.bank = PotentialBank((kernel.dims.oc, kernel.dims.oi))
        self.params = self.bank.check_params(params)
        self.counters = CostCounters(d_bits=d_bits)

    def timestep(self) -> Process:
        return conv_timestep_process(self.kernel, self.schedule, self.bank, self.params,
                                     self.counters, self.pad)

    def process(self, t_steps: int) -> Process:
        for _ in range(t_steps):
            yield from self.timestep()

    def run(self, ifm: SpikeTensor) -> LayerRunResult:
        rows = (ifm.bits[t, c] for t in range(ifm.t) for c in range(ifm.channels))
        out = drive(self.process(ifm.t), rows)
        dims = self.kernel.dims
        bits = np.array(out, dtype=np.uint8).reshape(ifm.t, dims.oc, dims.oi)
        return LayerRunResult(SpikeTensor(bits), self.counters, self.bank)


def saocds_layer_timestep(ifm_stream, kernel: SparseKernelCOO, schedule: IterationSchedule,
                          bank: PotentialBank, params: NeuronParams,
                          counters: CostCounters, pad: int = 0) -> list[np.ndarray]:
    """Run one timestep over an iterable of input-channel rows.

    Returns the ``OC`` output rows in emission order. ``bank`` and
    ``counters`` are updated in place.
    """
    check_bank(bank, (kernel.dims.oc, kernel.dims.oi))
    if not kernel.is_sorted():
        raise ScheduleError("kernel entries are not in (oc, ic, ci) order")
    params = bank.check_params(params)
    return drive(conv_timestep_process(kernel.validate(), schedule, bank, params, counters, pad),
                 ifm_stream)
