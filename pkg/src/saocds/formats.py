"""On-disk formats: model files, spike traces and metric reports.

Model files are JSON. Every object has a closed set of keys; anything
unknown is rejected with the JSON path where it was found. Decimal
literals are parsed with :class:`decimal.Decimal` and converted to raw
fixed point exactly, so a model loads identically on every platform.
:func:`dump_model` emits a canonical text that :func:`load_model` reads
back and re-emits byte for byte.

Spike traces are a 20-byte little-endian header (magic ``SPKT``, version,
reserved, T, C, W as uint32) followed by the bits in t-major, c-major,
pixel-minor order, packed little-endian within each byte.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import struct
from decimal import Decimal
from pathlib import Path

import numpy as np

from .core import ConvDims, NeuronParams, SaocdsError, SparseKernelCOO, SpikeTensor
from .fc import MaskedFcWeights
from .fixed import decimal_to_raw
from .network import ConvLayer, FcLayer, NetworkSpec, PoolLayer

MODEL_FORMAT = "saocds-model"
MODEL_VERSION = 1
TRACE_MAGIC = b"SPKT"
TRACE_VERSION = 1
_TRACE_HEADER = struct.Struct("<4sHHIII")


class ModelFormatError(SaocdsError, ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class TraceFormatError(SaocdsError, ValueError):
    pass


# -- model files: reading ----------------------------------------------------

_TOP_KEYS = {"format", "version", "name", "frac_bits", "d_bits", "input", "layers"}
_LAYER_KEYS = {
    "conv": {"kind", "name", "kw", "ic", "oc", "oi", "pad", "weights", "neuron"},
    "pool": {"kind", "name", "window"},
    "fc": {"kind", "name", "in", "out", "readout", "weights", "neuron"},
}
_WEIGHT_KEYS = {"raw": {"encoding", "data"}, "decimal": {"encoding", "data"},
                "coo": {"encoding", "d", "ri", "ci"}, "base64": {"encoding", "data"}}
_NEURON_KEYS = {"encoding", "alpha", "theta", "u_th0"}


def _require(obj, keys: set, path: str, required: set | None = None) -> None:
    if not isinstance(obj, dict):
        raise ModelFormatError(f"expected an object, got {type(obj).__name__}", path)
    extra = sorted(set(obj) - keys)
    if extra:
        raise ModelFormatError(f"unknown field {extra[0]!r}", f"{path}.{extra[0]}")
    missing = sorted((keys if required is None else required) - set(obj))
    if missing:
        raise ModelFormatError(f"missing field {missing[0]!r}", path)


def _int(obj, key: str, path: str, minimum: int = 1) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ModelFormatError(f"expected an integer >= {minimum}, got {v!r}", f"{path}.{key}")
    return v


def _raw_array(data, path: str, frac_bits: int, encoding: str, shape=None) -> np.ndarray:
    def conv(v, p):
        if isinstance(v, list):
            return [conv(x, f"{p}[{i}]") for i, x in enumerate(v)]
        if isinstance(v, bool):
            raise ModelFormatError("booleans are not numbers", p)
        if encoding == "raw":
            if not isinstance(v, int):
                raise ModelFormatError(f"raw values must be integers, got {v!r}", p)
            return v
        if not isinstance(v, (int, Decimal, str)):
            raise ModelFormatError(f"expected a decimal number, got {v!r}", p)
        try:
            return decimal_to_raw(v, frac_bits)
        except ArithmeticError:
            raise ModelFormatError(f"not a decimal number: {v!r}", p) from None

    values = conv(data, path)
    try:
        arr = np.array(values, dtype=np.int64)
    except ValueError:
        raise ModelFormatError("ragged nested array", path) from None
    if shape is not None and arr.shape != tuple(shape):
        raise ModelFormatError(f"array has shape {arr.shape}, expected {tuple(shape)}", path)
    if arr.size and (arr.min() < -32768 or arr.max() > 32767):
        raise ModelFormatError("value exceeds the signed 16-bit range", path)
    return arr


def _weights(obj, path: str, frac_bits: int, shape, conv_dims: ConvDims | None):
    if not isinstance(obj, dict) or obj.get("encoding") not in _WEIGHT_KEYS:
        raise ModelFormatError("weights need an encoding of raw, decimal, coo or base64", path)
    enc = obj["encoding"]
    _require(obj, _WEIGHT_KEYS[enc], path)
    if enc in ("raw", "decimal"):
        return _raw_array(obj["data"], f"{path}.data", frac_bits, enc, shape)
    if enc == "base64":
        try:
            buf = base64.b64decode(obj["data"], validate=True)
        except (ValueError, TypeError):
            raise ModelFormatError("invalid base64 payload", f"{path}.data") from None
        if len(buf) != 2 * int(np.prod(shape)):
            raise ModelFormatError(f"payload of {len(buf)} bytes, expected {2 * int(np.prod(shape))}",
                                   f"{path}.data")
        return np.frombuffer(buf, dtype="<i2").astype(np.int64).reshape(shape)
    if conv_dims is None:
        raise ModelFormatError("coo encoding is only valid for conv layers", path)
    cols = [_raw_array(obj[k], f"{path}.{k}", frac_bits, "raw") for k in ("d", "ri", "ci")]
    if any(c.ndim != 1 for c in cols) or len({len(c) for c in cols}) != 1:
        raise ModelFormatError("d, ri and ci must be flat lists of equal length", path)
    try:
        return SparseKernelCOO(conv_dims, *cols).validate()
    except SaocdsError as exc:
        raise ModelFormatError(str(exc), path) from None


def _neuron(obj, path: str, frac_bits: int) -> NeuronParams:
    _require(obj, _NEURON_KEYS, path)
    enc = obj["encoding"]
    if enc not in ("raw", "decimal"):
        raise ModelFormatError(f"neuron encoding must be raw or decimal, got {enc!r}", f"{path}.encoding")
    vals = {k: _raw_array(obj[k], f"{path}.{k}", frac_bits, enc) for k in ("alpha", "theta", "u_th0")}
    try:
        return NeuronParams(frac_bits=frac_bits, **vals)
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(str(exc), path) from None


def parse_model(text: str) -> NetworkSpec:
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _require(doc, _TOP_KEYS, "$", _TOP_KEYS - {"name"})
    if doc["format"] != MODEL_FORMAT:
        raise ModelFormatError(f"not a model file (format {doc['format']!r})", "$.format")
    if doc["version"] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported version {doc['version']!r}, this reader handles {MODEL_VERSION}",
                               "$.version")
    frac_bits = _int(doc, "frac_bits", "$", 0)
    if frac_bits > 15:
        raise ModelFormatError("frac_bits must be <= 15", "$.frac_bits")
    d_bits = _int(doc, "d_bits", "$")
    _require(doc["input"], {"channels", "width"}, "$.input")
    in_c = _int(doc["input"], "channels", "$.input")
    in_w = _int(doc["input"], "width", "$.input")
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise ModelFormatError("expected a non-empty list of layers", "$.layers")
    layers = []
    for i, rec in enumerate(doc["layers"]):
        p = f"$.layers[{i}]"
        kind = rec.get("kind") if isinstance(rec, dict) else None
        if kind not in _LAYER_KEYS:
            raise ModelFormatError(f"layer kind must be conv, pool or fc, got {kind!r}", f"{p}.kind")
        keys = _LAYER_KEYS[kind]
        _require(rec, keys, p, keys - {"name", "readout", "pad"})
        name = rec.get("name", "")
        try:
            if kind == "conv":
                dims = ConvDims(_int(rec, "kw", p), _int(rec, "ic", p), _int(rec, "oc", p), _int(rec, "oi", p))
                w = _weights(rec["weights"], f"{p}.weights", frac_bits, dims.kernel_shape, dims)
                params = _neuron(rec["neuron"], f"{p}.neuron", frac_bits)
                pad = _int(rec, "pad", p, 0) if "pad" in rec else 0
                if isinstance(w, SparseKernelCOO):
                    layers.append(ConvLayer(w, params, pad, name))
                else:
                    layers.append(ConvLayer.from_dense(w, params, dims.in_w - 2 * pad, pad, name))
            elif kind == "pool":
                layers.append(PoolLayer(_int(rec, "window", p), name))
            else:
                shape = (_int(rec, "out", p), _int(rec, "in", p))
                w = _weights(rec["weights"], f"{p}.weights", frac_bits, shape, None)
                params = _neuron(rec["neuron"], f"{p}.neuron", frac_bits)
                layers.append(FcLayer(MaskedFcWeights(w), params, name, rec.get("readout", "spikes")))
        except ModelFormatError:
            raise
        except (SaocdsError, ValueError) as exc:
            raise ModelFormatError(str(exc), p) from None
    try:
        return NetworkSpec(layers, in_c, in_w, frac_bits, d_bits, doc.get("name", ""))
    except (SaocdsError, ValueError) as exc:
        raise ModelFormatError(str(exc), "$.layers") from None


def load_model(path) -> NetworkSpec:
    return parse_model(Path(path).read_text())


# -- model files: writing ----------------------------------------------------


def _tolist(a):
    a = np.asarray(a)
    return int(a) if a.ndim == 0 else a.tolist()


def model_document(net: NetworkSpec, weight_encoding: str = "coo") -> dict:
    """JSON-ready document for ``net``.

    ``weight_encoding`` is ``coo`` (conv kernels as COO, FC dense raw),
    ``raw`` (everything dense) or ``base64`` (dense little-endian int16).
    """
    if weight_encoding not in ("coo", "raw", "base64"):
        raise ValueError("weight_encoding must be coo, raw or base64")

    def dense(w):
        if weight_encoding == "base64":
            return {"encoding": "base64",
                    "data": base64.b64encode(np.asarray(w).astype("<i2").tobytes()).decode("ascii")}
        return {"encoding": "raw", "data": _tolist(w)}

    def neuron(p: NeuronParams):
        return {"encoding": "raw", "alpha": _tolist(p.alpha), "theta": _tolist(p.theta),
                "u_th0": _tolist(p.u_th0)}

    layers = []
    for layer in net.layers:
        if layer.kind == "conv":
            d = layer.dims
            rec = {"kind": "conv", "name": layer.name, "kw": d.kw, "ic": d.ic, "oc": d.oc,
                   "oi": d.oi, "pad": layer.pad}
            if weight_encoding == "coo":
                k = layer.kernel
                rec["weights"] = {"encoding": "coo", "d": _tolist(k.d), "ri": _tolist(k.ri),
                                  "ci": _tolist(k.ci)}
            else:
                rec["weights"] = dense(layer.dense())
            rec["neuron"] = neuron(layer.params)
        elif layer.kind == "pool":
            rec = {"kind": "pool", "name": layer.name, "window": layer.window}
        else:
            w = layer.weights
            rec = {"kind": "fc", "name": layer.name, "in": w.n_in, "out": w.n_out,
                   "readout": layer.readout, "weights": dense(w.weights),
                   "neuron": neuron(layer.params)}
        layers.append(rec)
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "name": net.name,
            "frac_bits": net.frac_bits, "d_bits": net.d_bits,
            "input": {"channels": net.in_channels, "width": net.in_width}, "layers": layers}


def _emit(obj, indent: int) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_emit(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, list) and any(isinstance(x, dict) for x in obj):
        items = [f"{pad}  {_emit(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    return json.dumps(obj, separators=(",", ":"))


def dump_model(net: NetworkSpec, weight_encoding: str = "coo") -> str:
    return _emit(model_document(net, weight_encoding), 0) + "\n"


def save_model(net: NetworkSpec, path, weight_encoding: str = "coo") -> None:
    Path(path).write_text(dump_model(net, weight_encoding))


def model_hash(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


# -- spike traces ------------------------------------------------------------


def trace_bytes(x: SpikeTensor) -> bytes:
    header = _TRACE_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, 0, x.t, x.channels, x.width)
    return header + np.packbits(x.bits.reshape(-1), bitorder="little").tobytes()


def parse_trace(data: bytes) -> SpikeTensor:
    if len(data) < _TRACE_HEADER.size:
        raise TraceFormatError(f"trace is {len(data)} bytes, shorter than its {_TRACE_HEADER.size}-byte header")
    magic, version, _, t, c, w = _TRACE_HEADER.unpack_from(data)
    if magic != TRACE_MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}, expected {TRACE_MAGIC!r}")
    if version != TRACE_VERSION:
        raise TraceFormatError(f"unsupported trace version {version}")
    n = t * c * w
    payload = data[_TRACE_HEADER.size:]
    if len(payload) != (n + 7) // 8:
        raise TraceFormatError(f"payload is {len(payload)} bytes, header implies {(n + 7) // 8}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    if bits[n:].any():
        raise TraceFormatError("nonzero padding bits after the last frame")
    return SpikeTensor(bits[:n].reshape(t, c, w))


def save_trace(x: SpikeTensor, path) -> None:
    Path(path).write_bytes(trace_bytes(x))


def load_trace(path) -> SpikeTensor:
    return parse_trace(Path(path).read_bytes())


# -- reports -----------------------------------------------------------------


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
