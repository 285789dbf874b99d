"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``PASS`` or ``FAIL`` line; pytest also repeats
them in an "acceptance criteria" section of the terminal summary. Run
this file directly with ``python3 tests/test_acceptance.py`` for the
lines alone.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import random_network
from oracles import lif_fraction_trace
from saocds.compression import apply_density_profile, dequantize_w, prune_l1, quantize_w
from saocds.core import ConvDims, NeuronParams, build_schedule, coo_encode
from saocds.encoding import gen_bernoulli_input
from saocds.lif import NeuronState, decay_is_exact, lif_step
from saocds.metrics import (accumulation_ratio, fom, latency_model, stage_cycles, storage_report)
from saocds.network import ConvLayer, NetworkSpec, default_network, default_params, fig3_example
from saocds.pipeline import saocds_network_run
from saocds.reference import sw_network_run

DEFAULT_CONV_DIMS = [ConvDims(11, 2, 16), ConvDims(11, 16, 32), ConvDims(5, 32, 64)]


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------


def test_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    densities = np.round(np.arange(0.05, 1.0001, 0.05), 2)
    rates = np.round(np.arange(0.1, 0.9001, 0.1), 1)
    start = time.perf_counter()
    n, bad, largest = 1000, [], (0, 0, 0, 0)
    for i in range(n):
        net, _ = random_network(rng, max_kw=5, max_c=8, max_oi=16, density=float(rng.choice(densities)))
        for l in net.conv_layers():
            d = net.layers[l].dims
            largest = max(largest, (d.kw, d.ic, d.oc, d.oi))
            assert d.kw <= 5 and d.ic <= 8 and d.oc <= 8 and d.oi <= 16
        t = int(rng.integers(1, 9))
        x = gen_bernoulli_input(net.in_channels, net.in_width, t, float(rng.choice(rates)), i)
        if saocds_network_run(net, x).output != sw_network_run(net, x).output:
            bad.append(i)
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 120,
           f"{n - len(bad)}/{n} random instances bit-identical in {elapsed:.1f} s (limit 120 s)"
           + (f"; first failure at instance {bad[0]}" if bad else ""))


# 2 -------------------------------------------------------------------------


def test_table_one():
    net, x = fig3_example()
    sw = sw_network_run(net, x).counters[0]
    goap = saocds_network_run(net, x).counters[0]
    got = ((sw.input_fetches, sw.weight_fetches, sw.accumulations),
           (goap.input_fetches, goap.weight_fetches, goap.accumulations))
    ratio = goap.total_bits / sw.total_bits
    ok = (got == ((24, 96, 48), (48, 12, 24)) and (sw.total_bits, goap.total_bits) == (1560, 240)
          and round(100 * ratio, 2) == 15.38)
    report(2, ok, f"SW {got[0]}, GOAP {got[1]}, bits {sw.total_bits} vs {goap.total_bits} "
                  f"({100 * ratio:.2f}%)")


# 3 -------------------------------------------------------------------------


def test_table_three():
    rows = storage_report(default_network(0))
    be = [100 * r["break_even_density"] for r in rows]
    widths = [(r["ri_bits"], r["ci_bits"]) for r in rows]
    dense = [r["dense_bits"] for r in rows]
    coef = [r["coo_bits_per_density"] for r in rows]
    ok = (widths == [(5, 4), (9, 4), (11, 3)]
          and all(abs(a - b) <= 0.01 for a, b in zip(be, [64.00, 55.17, 53.33]))
          and dense == [5632, 90112, 163840] and coef == [8800, 163328, 307200])
    report(3, ok, "break-even " + "/".join(f"{v:.2f}%" for v in be)
           + f", index widths {widths}, dense {dense}, COO per density {coef}")


# 4 -------------------------------------------------------------------------


def test_table_two_at_desk_scale():
    rng = np.random.default_rng(4)
    w = rng.integers(-1000, 1001, size=(32, 16, 11))
    w[w == 0] = 1
    width, t = 128, 50
    x = gen_bernoulli_input(16, width, t, 0.5, 44)
    base = NetworkSpec([ConvLayer.from_dense(w, default_params(), width, 5)], 16, width)
    start = time.perf_counter()
    worst, lines = 0.0, []
    for s in range(10, 100, 10):
        d = 1 - s / 100
        net, _ = apply_density_profile(base, d)
        ratio = accumulation_ratio(saocds_network_run(net, x, mode="sequential").counters,
                                   sw_network_run(net, x).counters)[0]
        err = abs(ratio - d) * 100
        worst = max(worst, err)
        lines.append(f"{s}%:{100 * ratio:.2f}")
    elapsed = time.perf_counter() - start
    report(4, worst <= 1.5 and elapsed < 300,
           f"{x.bits.size} input bits, ratio vs sparsity [{' '.join(lines)}], worst deviation "
           f"{worst:.2f} pp (limit 1.5), sweep {elapsed:.1f} s (limit 300 s)")


# 5 -------------------------------------------------------------------------


def _overheads(rng, density: float) -> list[tuple[int, int]]:
    """(empty + extra, reps) of each default conv layer under one random mask."""
    out = []
    for dims in DEFAULT_CONV_DIMS:
        w = rng.standard_normal(dims.kernel_shape)
        mask = prune_l1(w, density)
        s = build_schedule(coo_encode(mask.astype(np.int64), dims))
        out.append((s.overhead, s.reps))
    return out


def test_iteration_overhead():
    trials = 100
    densities = [0.10, 0.15, 0.20, 0.25, 0.50, 0.75, 1.00]
    shares, ok = [], True
    for d in densities:
        good = np.zeros(len(DEFAULT_CONV_DIMS), dtype=int)
        for seed in range(trials):
            ov = _overheads(np.random.default_rng(seed), d)
            good += [o < 10 for o, _ in ov]
        frac = good / trials
        ok &= bool(np.all(frac >= 0.95))
        shares.append(f"{int(100 * d)}%:" + "/".join(f"{int(100 * f)}" for f in frac))
    dense_iters = sum(d.n_weights for d in DEFAULT_CONV_DIMS)
    worst5 = max(sum(r for _, r in _overheads(np.random.default_rng(seed), 0.05)) for seed in range(trials))
    ok5 = worst5 <= 0.06 * dense_iters
    report(5, ok and ok5,
           "share of trials with empty+extra < 10 per conv layer (need >= 95): "
           + " ".join(shares)
           + f"; at 5% worst total conv iterations {worst5} vs limit {0.06 * dense_iters:.0f}")


# 6 -------------------------------------------------------------------------


def test_latency_model():
    base = default_network(0)
    dense_cycles = stage_cycles(base)
    ok, parts = True, []
    for d in (0.25, 0.5, 0.75):
        net, _ = apply_density_profile(base, d)
        cyc = stage_cycles(net)
        for i in net.conv_layers():
            s = net.layers[i].schedule
            nnz_dense = base.layers[i].n_weights
            r = cyc[i] / dense_cycles[i]
            hi = d + s.overhead / nnz_dense
            ok &= d <= r <= hi
            parts.append(f"d={d} L{i}:{r:.4f}")
    lat5 = latency_model(apply_density_profile(base, 0.05)[0])
    lat4 = latency_model(apply_density_profile(base, 0.04)[0])
    fc_ok = lat5.kinds[lat5.bottleneck] == "fc" and lat5.fc_bottleneck
    plateau = lat5.max_stage_cycles == lat4.max_stage_cycles
    report(6, ok and fc_ok and plateau,
           f"cycle ratios {' '.join(parts)}; at 5% bottleneck layer {lat5.bottleneck} "
           f"({lat5.kinds[lat5.bottleneck]}), max cycles {lat5.max_stage_cycles} at 5% vs "
           f"{lat4.max_stage_cycles} at 4%")


# 7 -------------------------------------------------------------------------


def test_fom_table():
    rows = [((74578, 1.146, 11.45e6), 7464.3), ((82859, 0.473, 23.5e6), 1667.8),
            ((84467, 0.493, 23.5e6), 1772.0), ((85671, 0.552, 23.5e6), 2012.4)]
    got = [fom(*args) for args, _ in rows]
    errs = [abs(g - want) / want for g, (_, want) in zip(got, rows)]
    report(7, max(errs) <= 1e-3,
           "FoM " + ", ".join(f"{g:.1f}" for g in got) + f" uJ/S, worst relative error {max(errs):.2e}")


# 8 -------------------------------------------------------------------------


def _trace(params: NeuronParams, drives):
    state, out = NeuronState(), []
    exact = True
    for d in drives:
        exact &= decay_is_exact(state.v, int(params.alpha), params.frac_bits)
        s, state = lif_step(state, params, d)
        out.append((Fraction(state.v, 1 << params.frac_bits), s))
    return out, exact


def test_lif_and_idempotence():
    one = 256
    checks = {}
    p = NeuronParams.from_float(1.0, 1.0, 1.0)
    checks["threshold"] = _trace(p, [one])[0][0][1] == 0 and _trace(p, [one + 1])[0][0][1] == 1
    p = NeuronParams.from_float(0.5, 1.0, 100.0)
    got, exact = _trace(p, [one] + [0] * 8)
    checks["decay"] = exact and got == lif_fraction_trace(Fraction(1, 2), Fraction(1), Fraction(100),
                                                          [1] + [0] * 8)
    p = NeuronParams.from_float(0.5, 0.5, 0.5)
    drives = [256, 128, 256, 0, 128, 256, 0, 64]
    got, exact = _trace(p, drives)
    checks["soft reset"] = exact and got == lif_fraction_trace(
        Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), [Fraction(d, one) for d in drives])
    checks["soft reset fired"] = any(s for _, s in got)

    rng = np.random.default_rng(8)
    q_ok = p_ok = True
    for _ in range(10_000):
        w = rng.standard_normal(int(rng.integers(1, 200))) * 10 ** rng.uniform(-3, 2)
        f = int(rng.integers(0, 16))
        q = quantize_w(w, f)
        q_ok &= np.array_equal(quantize_w(dequantize_w(q, f), f), q)
        d = float(rng.uniform(0.01, 1.0))
        m = prune_l1(w, d)
        p_ok &= np.array_equal(prune_l1(w * m, d), m)
    checks["quantize idempotent"] = q_ok
    checks["prune idempotent"] = p_ok
    report(8, all(checks.values()), ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + " (10^4 random arrays)")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
