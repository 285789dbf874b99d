"""``saocds`` command-line front end.

Every subcommand is a thin wrapper around library calls. Reports are
JSON or CSV; JSON reports carry a ``provenance`` block with the model
hash, seed and the effective configuration so each number can be
regenerated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compare import compare_engines
from .compression import apply_density_profile, parse_profile, requantize_network
from .core import SaocdsError
from .encoding import gen_bernoulli_input, sigma_delta_encode
from .formats import (dump_model, load_trace, model_hash, parse_model, save_trace, write_csv,
                      write_json)
from .metrics import latency_model, schedule_report, storage_report
from .network import default_network, fig3_example
from .pipeline import saocds_network_run
from .reference import sw_network_run


def parse_densities(text: str) -> list[float]:
    """``"0.05..1.0"`` (step 0.05), ``"0.1..0.5:0.1"`` or ``"0.1,0.2,0.5"``."""
    text = text.strip()
    if ".." in text:
        rng, _, step = text.partition(":")
        lo, hi = (float(v) for v in rng.split(".."))
        step = float(step) if step else 0.05
        if step <= 0 or lo > hi:
            raise ValueError(f"bad density range {text!r}")
        n = int(round((hi - lo) / step))
        vals = [round(lo + i * step, 10) for i in range(n + 1)]
        vals = [v for v in vals if v <= hi + 1e-12]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals or any(not 0 < v <= 1 for v in vals):
        raise ValueError(f"densities must lie in (0, 1], got {text!r}")
    return vals


def _load_model(path):
    text = Path(path).read_text()
    return parse_model(text), model_hash(text)


def _load_iq(path) -> np.ndarray:
    if str(path).endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter="," if str(path).endswith(".csv") else None, ndmin=2)


def _provenance(args, digest: str | None, **config) -> dict:
    return {"tool": f"saocds {__version__}", "command": args.command, "model_sha256": digest,
            "seed": getattr(args, "seed", None), "config": config}


def cmd_encode(args) -> int:
    x = sigma_delta_encode(_load_iq(args.iq), args.osr, args.order, args.normalize)
    save_trace(x, args.out)
    print(f"wrote {args.out}: T={x.t} C={x.channels} W={x.width} rate={x.rate:.4f}")
    return 0


def cmd_compress(args) -> int:
    net, _ = _load_model(args.model)
    if args.frac_bits is not None:
        net = requantize_network(net, args.frac_bits)
    net, achieved = apply_density_profile(net, parse_profile(args.density))
    Path(args.out).write_text(dump_model(net, args.weights))
    print("achieved densities: " + " ".join(f"{d:.4f}" for d in achieved))
    return 0


def cmd_make_model(args) -> int:
    if args.kind == "fig3":
        net, x = fig3_example()
        if args.input_out:
            save_trace(x, args.input_out)
    else:
        net = default_network(args.seed)
    Path(args.out).write_text(dump_model(net, args.weights))
    print(f"wrote {args.out}")
    return 0


def _counter_rows(counters) -> list[dict]:
    return [{"layer": i, **c.as_dict()} for i, c in enumerate(counters)]


def cmd_run(args) -> int:
    net, digest = _load_model(args.model)
    x = load_trace(args.input)
    if args.engine == "sw":
        res = sw_network_run(net, x)
        latency = None
    else:
        res = saocds_network_run(net, x, mode=args.mode, queue_depth=args.queue_depth)
        latency = res.latency.as_dict()
    if args.out:
        save_trace(res.output, args.out)
    report = {
        "provenance": _provenance(args, digest, engine=args.engine, mode=args.mode,
                                  queue_depth=args.queue_depth, input=str(args.input)),
        "input": {"t": x.t, "channels": x.channels, "width": x.width, "rate": x.rate},
        "output": {"shape": list(res.output.bits.shape), "spikes": int(res.output.bits.sum()),
                   "counts": res.output.bits.sum(axis=(0, 1)).tolist()},
        "layers": _counter_rows(res.counters),
        "latency": latency,
    }
    if args.report:
        write_json(report, args.report)
    total = sum((c.total_bits for c in res.counters))
    print(f"{args.engine}: T={x.t}, output spikes {report['output']['spikes']}, bit traffic {total}")
    return 0


def _fmt_table(rows: list[dict], cols: list[str]) -> str:
    def cell(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    body = [[cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def cmd_compare(args) -> int:
    net, digest = _load_model(args.model)
    x = load_trace(args.input)
    cmp = compare_engines(net, x, mode=args.mode)
    rows = cmp.counter_table()
    print(_fmt_table(rows, ["layer", "engine", "input_fetches", "weight_fetches", "accumulations",
                            "total_bits", "acc_ratio"]))
    if args.report:
        write_json({"provenance": _provenance(args, digest, mode=args.mode, input=str(args.input)),
                    "equal": cmp.equal, "mismatch": None if cmp.equal else vars(cmp.mismatch),
                    "layers": rows}, args.report)
    if not cmp.equal:
        print(f"MISMATCH: {cmp.mismatch}", file=sys.stderr)
        return 1
    print("outputs bit-identical")
    return 0


def cmd_sweep(args) -> int:
    base, digest = _load_model(args.model)
    densities = parse_densities(args.densities)
    x = gen_bernoulli_input(base.in_channels, base.in_width, args.t, args.rate, args.seed)
    rows = []
    for d in densities:
        net, achieved = apply_density_profile(base, d)
        run = saocds_network_run(net, x, mode="sequential")
        ref = None if args.no_reference else sw_network_run(net, x)
        lat = run.latency
        for i, c in enumerate(run.counters):
            layer = net.layers[i]
            dense_acc = ref.counters[i].accumulations if ref else None
            rows.append({
                "density": d, "layer": i, "kind": layer.kind,
                "achieved_density": round(layer.nnz / layer.n_weights, 6) if layer.kind != "pool" else None,
                "accumulations": c.accumulations, "dense_accumulations": dense_acc,
                "acc_ratio": (c.accumulations / dense_acc) if dense_acc else None,
                "total_bits": c.total_bits, "iters_normal": c.iters_normal,
                "iters_empty": c.iters_empty, "iters_extra": c.iters_extra,
                "stage_cycles": lat.cycles[i], "bottleneck": lat.bottleneck,
                "fc_bottleneck": lat.fc_bottleneck, "total_cycles": lat.total_cycles,
            })
        print(f"density {d:.3f}: bottleneck layer {lat.bottleneck} ({lat.max_stage_cycles} cycles)")
    write_csv(rows, args.out)
    if args.report:
        write_json({"provenance": _provenance(args, digest, densities=densities, rate=args.rate,
                                              t=args.t, reference=not args.no_reference),
                    "rows": rows}, args.report)
    return 0


def cmd_analyze(args) -> int:
    net, digest = _load_model(args.model)
    storage = storage_report(net)
    schedule = schedule_report(net)
    lat = latency_model(net, args.t)
    print(_fmt_table([{**r, "break_even_%": 100 * r["break_even_density"], "density": r["density"]}
                      for r in storage],
                     ["layer", "weights", "nnz", "density", "dense_bits", "coo_bits",
                      "coo_bits_per_density", "break_even_%"]))
    print()
    print(_fmt_table(schedule, ["layer", "reps", "normal", "empty", "extra"]))
    print()
    print(f"stage cycles: {list(lat.cycles)}")
    print(f"bottleneck: layer {lat.bottleneck} ({net.layers[lat.bottleneck].kind}), "
          f"{lat.max_stage_cycles} cycles/timestep; FC-bound: {lat.fc_bottleneck}")
    if args.report:
        write_json({"provenance": _provenance(args, digest, t=args.t), "storage": storage,
                    "schedule": schedule, "latency": lat.as_dict()}, args.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saocds", description="Bit-exact streaming SNN accelerator simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", help="sigma-delta encode an IQ frame into a spike trace")
    s.add_argument("--iq", required=True, help=".npy, .csv or whitespace text, shape (channels, samples)")
    s.add_argument("--osr", type=int, required=True)
    s.add_argument("--order", type=int, default=1, choices=(1, 2))
    s.add_argument("--normalize", action="store_true", help="scale by the peak magnitude first")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("compress", help="prune and quantize a model to a density profile")
    s.add_argument("--model", required=True)
    s.add_argument("--density", required=True, help='per-layer densities, e.g. "25-20-15-20-25"')
    s.add_argument("--frac-bits", type=int, default=None)
    s.add_argument("--weights", choices=("coo", "raw", "base64"), default="coo")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compress)

    s = sub.add_parser("make-model", help="write a stock model file")
    s.add_argument("--kind", choices=("default", "fig3"), default="default")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--weights", choices=("coo", "raw", "base64"), default="coo")
    s.add_argument("--input-out", help="fig3 only: also write its example input trace")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_model)

    s = sub.add_parser("run", help="run a spike trace through a model")
    s.add_argument("--engine", choices=("saocds", "sw"), default="saocds")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", help="output spike trace")
    s.add_argument("--report", help="JSON report path")
    s.add_argument("--mode", choices=("stream", "sequential"), default="stream")
    s.add_argument("--queue-depth", type=int, default=2)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("compare", help="check both engines agree and diff their counters")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--mode", choices=("stream", "sequential"), default="stream")
    s.add_argument("--report")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="accumulation and latency data over weight densities")
    s.add_argument("--model", required=True)
    s.add_argument("--densities", default="0.05..1.0")
    s.add_argument("--rate", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--t", type=int, default=4, help="timesteps of random input")
    s.add_argument("--no-reference", action="store_true", help="skip the dense engine")
    s.add_argument("--out", required=True, help="CSV path")
    s.add_argument("--report", help="optional JSON copy with provenance")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("analyze", help="storage, schedule and bottleneck report")
    s.add_argument("--model", required=True)
    s.add_argument("--t", type=int, default=1, help="timesteps for the latency estimate")
    s.add_argument("--report")
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SaocdsError, ValueError, TypeError, OSError) as exc:
        print(f"saocds {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
