"""Independent reference implementations used only by the tests.

None of these import the engine code they check. They trade speed for
obviousness: plain loops, Python ints and exact fractions.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NORMAL, EMPTY, EXTRA = 0, 1, 2


def alg2_kinds(ri, n_ic: int, n_oc: int) -> list[int]:
    """Iteration kinds from a literal run of the streaming loop's control flow.

    Only the control decisions are replayed: a counter of channels read,
    the current output channel and the current nonzero. The loop stops
    when every nonzero is consumed and every output channel emitted.
    """
    ri = [int(v) for v in ri]
    nnz_total = len(ri)
    kinds = []
    ic_read, oc, nnz, pre_oc = 0, 0, 0, n_oc
    while nnz < nnz_total or oc < n_oc:
        if ic_read < n_ic:
            ic_read += 1
        nnz_oc = ri[nnz] // n_ic if nnz < nnz_total else n_oc
        if oc != nnz_oc:
            kinds.append(EXTRA)
            oc += 1
            continue
        if ri[nnz] % n_ic >= ic_read:
            kinds.append(EMPTY)
            continue
        kinds.append(NORMAL)
        next_oc = ri[nnz + 1] // n_ic if nnz + 1 < nnz_total else n_oc
        pre_oc = oc
        if next_oc != oc:
            oc += 1
        nnz += 1
    assert pre_oc <= n_oc
    return kinds


def coo_bruteforce(dense) -> list[tuple[int, int, int]]:
    """(d, ri, ci) triples by exhaustive enumeration in (oc, ic, ci) order."""
    w = np.asarray(dense)
    n_oc, n_ic, kw = w.shape
    out = []
    for oc in range(n_oc):
        for ic in range(n_ic):
            for ci in range(kw):
                if w[oc, ic, ci] != 0:
                    out.append((int(w[oc, ic, ci]), oc * n_ic + ic, ci))
    return out


def round_half_even_div(x: int, shift: int) -> int:
    """``x / 2**shift`` rounded to nearest, ties to even, via Fraction."""
    q = Fraction(x, 1 << shift)
    fl = q.numerator // q.denominator
    rem = q - fl
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and fl % 2):
        return fl + 1
    return fl


def lif_int_trace(alpha: int, theta: int, u_th0: int, drives, frac_bits: int):
    """Per-timestep (potential, spike) of one neuron in raw integers."""
    lo, hi = -(1 << 31), (1 << 31) - 1
    v, s = 0, 0
    out = []
    for drive in drives:
        v = min(max(round_half_even_div(alpha * v, frac_bits) - theta * s, lo), hi)
        v = min(max(v + int(drive), lo), hi)
        s = int(v > u_th0)
        out.append((v, s))
    return out


def lif_fraction_trace(alpha: Fraction, theta: Fraction, u_th0: Fraction, drives):
    """Exact rational LIF: ``v = alpha*v - theta*s; v += drive; s = v > u_th0``."""
    v, s = Fraction(0), 0
    out = []
    for drive in drives:
        v = alpha * v - theta * s
        v += Fraction(drive)
        s = int(v > u_th0)
        out.append((v, s))
    return out


def conv_drive(ifm_t, dense_kernel, pad: int) -> np.ndarray:
    """Synaptic input ``(OC, OI)`` of one timestep via a sliding-window view."""
    x = np.pad(np.asarray(ifm_t, dtype=np.int64), ((0, 0), (pad, pad)))
    w = np.asarray(dense_kernel, dtype=np.int64)
    win = sliding_window_view(x, w.shape[2], axis=1)  # (IC, OI, KW)
    return np.einsum("cok,nck->no", win, w)


def lif_layer(drives, alpha, theta, u_th0, frac_bits: int) -> np.ndarray:
    """Apply raw-integer LIF over ``drives`` of shape ``(T, ...)``; returns spikes."""
    drives = np.asarray(drives, dtype=np.int64)
    shape = drives.shape[1:]
    a = np.broadcast_to(alpha, shape)
    th = np.broadcast_to(theta, shape)
    u = np.broadcast_to(u_th0, shape)
    spikes = np.zeros(drives.shape, dtype=np.uint8)
    for idx in np.ndindex(shape):
        trace = lif_int_trace(int(a[idx]), int(th[idx]), int(u[idx]), drives[(slice(None),) + idx],
                              frac_bits)
        for t, (_, s) in enumerate(trace):
            spikes[(t,) + idx] = s
    return spikes


def network_oracle(layers, x_bits, frac_bits: int) -> list[np.ndarray]:
    """Layer outputs of a network described as plain dicts.

    Each layer is ``{"kind": "conv", "w": (OC, IC, KW), "pad": p, "params": (a, th, u)}``,
    ``{"kind": "pool", "window": k}`` or ``{"kind": "fc", "w": (OUT, IN), "params": ...}``.
    """
    cur = np.asarray(x_bits, dtype=np.uint8)
    outs = []
    for layer in layers:
        t = cur.shape[0]
        if layer["kind"] == "conv":
            shape = conv_drive(np.zeros(cur.shape[1:]), layer["w"], layer["pad"]).shape
            drives = np.stack([conv_drive(cur[i], layer["w"], layer["pad"]) for i in range(t)]) \
                if t else np.zeros((0,) + shape, dtype=np.int64)
            cur = lif_layer(drives, *layer["params"], frac_bits)
        elif layer["kind"] == "pool":
            k = layer["window"]
            n = cur.shape[2] // k
            cur = np.stack([[[int(cur[i, c, j * k:(j + 1) * k].any()) for j in range(n)]
                             for c in range(cur.shape[1])] for i in range(t)]).astype(np.uint8) \
                if t else np.zeros((0, cur.shape[1], cur.shape[2] // k), dtype=np.uint8)
        else:
            w = np.asarray(layer["w"], dtype=np.int64)
            drives = cur.reshape(t, w.shape[1]).astype(np.int64) @ w.T
            cur = lif_layer(drives, *layer["params"], frac_bits)[:, None, :]
        outs.append(cur)
    return outs


def prune_oracle(w, density: float) -> np.ndarray:
    """Mask of the largest magnitudes by full sort on (-|w|, flat index)."""
    flat = np.asarray(w, dtype=np.float64).reshape(-1)
    k = int(Fraction(density).limit_denominator(10**9) * len(flat) + Fraction(1, 2))
    ranked = sorted(range(len(flat)), key=lambda i: (-abs(flat[i]), i))
    mask = np.zeros(len(flat), dtype=np.uint8)
    for i in ranked[:k]:
        mask[i] = 1
    return mask.reshape(np.shape(w))


def sigma_delta_first_order(x: float, n: int) -> list[int]:
    """Hand-stepped first-order error-feedback modulator on a constant input."""
    acc = 0.0
    out = []
    for _ in range(n):
        acc += x
        y = 1 if acc >= 0 else -1
        acc -= y
        out.append(1 if y > 0 else 0)
    return out
