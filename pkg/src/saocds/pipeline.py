"""Run a whole network on the streaming engines.

``mode="stream"`` connects the layer engines with bounded row queues and
runs them cooperatively: a stage advances until it needs a row from an
empty queue or must push into a full one. ``mode="sequential"`` runs each
layer over all timesteps with materialized intermediates. Both modes run
the same engines and must agree bit for bit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .conv import SaocdsConv
from .core import CostCounters, SaocdsError, SpikeTensor
from .fc import MaskedFc, MaxPool
from .metrics import LatencyReport, latency_model
from .network import NetworkSpec
from .stream import READ, Emit, Process, drive

DEFAULT_QUEUE_DEPTH = 2  # rows


class PipelineDeadlock(SaocdsError):
    """No stage can advance although the pipeline has not finished."""

    def __init__(self, message: str, producer: str | None = None, consumer: str | None = None):
        super().__init__(message)
        self.producer = producer
        self.consumer = consumer


@dataclass
class NetworkRun:
    output: SpikeTensor
    counters: list[CostCounters]
    latency: LatencyReport
    layer_outputs: list[SpikeTensor] = field(default_factory=list)
    banks: list = field(default_factory=list)
    potentials: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.output, self.counters, self.latency))


class _Stage:
    def __init__(self, name: str, gen: Process, inq, outq, depth: float, record: list | None):
        self.name = name
        self.gen = gen
        self.inq = inq
        self.outq = outq
        self.depth = depth
        self.record = record
        self.pending = None
        self.send_val = None
        self.done = False

    def advance(self) -> bool:
        moved = False
        while not self.done:
            if self.pending is None:
                try:
                    self.pending = self.gen.send(self.send_val)
                except StopIteration:
                    self.done = True
                    return True
                self.send_val = None
            req = self.pending
            if req is READ:
                if not self.inq:
                    break
                self.send_val = self.inq.popleft()
            elif isinstance(req, Emit):
                if len(self.outq) >= self.depth:
                    break
                self.outq.append(req.row)
                if self.record is not None:
                    self.record.append(req.row)
            else:
                raise TypeError(f"stage {self.name} yielded unexpected request {req!r}")
            self.pending = None
            moved = True
        return moved

    @property
    def state(self) -> str:
        if self.done:
            return "finished"
        if self.pending is READ:
            return "waiting for input"
        if isinstance(self.pending, Emit):
            return "blocked on full output queue"
        return "running"


def _source(rows) -> Process:
    for row in rows:
        yield Emit(row)


def run_pipeline(stages: list[tuple[str, Process]], rows, depth: int = DEFAULT_QUEUE_DEPTH,
                 records: list | None = None) -> list[np.ndarray]:
    """Cooperatively run ``stages`` connected by queues of ``depth`` rows.

    ``rows`` feeds the first stage; the rows emitted by the last stage are
    returned. Raises :class:`PipelineDeadlock` when every unfinished stage is
    blocked.
    """
    if depth < 1:
        raise ValueError("queue depth must be at least one row")
    queues = [deque() for _ in range(len(stages) + 1)]
    sink: deque = deque()
    names = ["input"] + [n for n, _ in stages]
    procs = [_Stage("input", _source(rows), None, queues[0], depth, None)]
    for i, (name, gen) in enumerate(stages):
        last = i == len(stages) - 1
        rec = None if records is None else records[i]
        procs.append(_Stage(name, gen, queues[i], sink if last else queues[i + 1],
                            float("inf") if last else depth, rec))
    while not all(p.done for p in procs):
        # downstream first so freed queue slots are visible upstream in the same sweep
        moved = [p.advance() for p in reversed(procs)]
        if any(moved):
            continue
        for i in range(1, len(procs)):
            p = procs[i]
            if p.done or p.pending is not READ or p.inq:
                continue
            prod = procs[i - 1]
            if prod.done:
                raise PipelineDeadlock(
                    f"{p.name} is waiting for a row but {names[i - 1]} has finished "
                    f"(stream underrun between {names[i - 1]} -> {p.name})", names[i - 1], p.name)
            raise PipelineDeadlock(
                f"deadlock: {p.name} starved while {names[i - 1]} is {prod.state}",
                names[i - 1], p.name)
        blocked = ", ".join(f"{p.name}: {p.state}" for p in procs if not p.done)
        raise PipelineDeadlock(f"deadlock with no starved consumer ({blocked})")
    return list(sink)


def _engines(net: NetworkSpec):
    engines = []
    for layer, (in_shape, _) in zip(net.layers, net.shapes()):
        if layer.kind == "conv":
            engines.append(SaocdsConv(layer.kernel, layer.params, layer.pad, layer.schedule,
                                      net.d_bits))
        elif layer.kind == "pool":
            engines.append(MaxPool(layer.window, in_shape[0], in_shape[1], net.d_bits))
        else:
            engines.append(MaskedFc(layer.weights, layer.params, in_shape[0], net.d_bits))
    return engines


def _rows(bits: np.ndarray):
    t, c, _ = bits.shape
    return (bits[i, j] for i in range(t) for j in range(c))


def _tensor(rows, t: int, shape) -> SpikeTensor:
    return SpikeTensor(np.array(rows, dtype=np.uint8).reshape((t,) + tuple(shape)))


def saocds_network_run(net: NetworkSpec, x: SpikeTensor, mode: str = "stream",
                       queue_depth: int = DEFAULT_QUEUE_DEPTH, record: bool = False) -> NetworkRun:
    """Run ``x`` through ``net`` on the sparsity-aware engines.

    With ``record=True`` the output of every layer is kept in
    ``layer_outputs``.
    """
    net.check_input(x)
    shapes = net.shapes()
    engines = _engines(net)
    t = x.t
    records = [[] for _ in engines] if record else None
    if mode == "stream":
        stages = [(f"layer {i} ({l.kind})", e.process(t))
                  for i, (l, e) in enumerate(zip(net.layers, engines))]
        out_rows = run_pipeline(stages, _rows(x.bits), queue_depth, records)
    elif mode == "sequential":
        rows = list(_rows(x.bits))
        for i, e in enumerate(engines):
            rows = drive(e.process(t), rows)
            if records is not None:
                records[i] = rows
        out_rows = rows
    else:
        raise ValueError(f"mode must be 'stream' or 'sequential', got {mode!r}")
    layer_outputs = [_tensor(r, t, s[1]) for r, s in zip(records, shapes)] if record else []
    output = _tensor(out_rows, t, shapes[-1][1])
    return NetworkRun(
        output=output,
        counters=[e.counters for e in engines],
        latency=latency_model(net, t),
        layer_outputs=layer_outputs,
        banks=[getattr(e, "bank", None) for e in engines],
        potentials=[getattr(e, "potentials", []) for e in engines],
    )
