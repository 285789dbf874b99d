"""Row-stream protocol between layer engines.

A layer engine is a generator. It yields :data:`READ` when it needs the
next input row (the driver sends the row back) and yields an :class:`Emit`
for each output row it produces. Drivers decide whether rows come from a
materialized list or from a bounded queue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Generator, Iterable

import numpy as np

from .core import DimensionError, SaocdsError


class _Read:
    __slots__ = ()

    def __repr__(self):
        return "READ"


READ = _Read()


@dataclass(frozen=True, eq=False)
class Emit:
    row: np.ndarray


class StreamUnderrun(SaocdsError):
    """An engine asked for more input rows than the stream delivered."""


Process = Generator[object, object, None]


def drive(proc: Process, rows: Iterable) -> list[np.ndarray]:
    """Run ``proc`` to completion on a materialized row sequence."""
    it = iter(rows)
    out: list[np.ndarray] = []
    send = None
    n_read = 0
    while True:
        try:
            req = proc.send(send)
        except StopIteration:
            return out
        send = None
        if req is READ:
            try:
                send = next(it)
            except StopIteration:
                proc.close()
                raise StreamUnderrun(f"input stream ended after {n_read} rows") from None
            n_read += 1
        elif isinstance(req, Emit):
            out.append(req.row)
        else:
            raise TypeError(f"engine yielded unexpected request {req!r}")


def check_row(row, width: int) -> np.ndarray:
    r = np.asarray(row)
    if r.shape != (width,):
        raise DimensionError(f"row of shape {r.shape} where ({width},) was expected")
    return r
