"""Versioned network checkpoints in JSON or a flat little-endian binary.

JSON stores every float with its shortest round-trip repr, so reloading is
bit-exact. The binary layout is::

    magic  b"DCNET\\0"        6 bytes
    version                   uint32
    header length             uint32
    header                    UTF-8 JSON (names, widths, meta)
    payload                   float64, per network W0, b0, W1, b1, ... row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .mlp import Mlp

FORMAT_NAME = "dualconn-networks"
FORMAT_VERSION = 1
MAGIC = b"DCNET\x00"


class CheckpointError(ValueError):
    pass


def _net_to_json(net: Mlp) -> dict:
    return {
        "widths": list(net.widths),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_json(d: dict) -> Mlp:
    widths = tuple(d["widths"])
    weights = [np.array(w, dtype=float).reshape(widths[l], widths[l + 1]) for l, w in enumerate(d["weights"])]
    biases = [np.array(b, dtype=float).reshape(widths[l + 1]) for l, b in enumerate(d["biases"])]
    return Mlp(widths, weights, biases)


def save_json(path, nets: dict, meta: dict | None = None) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta or {},
        "networks": {name: _net_to_json(net) for name, net in nets.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_json(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {doc.get('version')}")
    nets = {name: _net_from_json(d) for name, d in doc["networks"].items()}
    return nets, doc.get("meta", {})


def save_binary(path, nets: dict, meta: dict | None = None) -> None:
    header = json.dumps({
        "format": FORMAT_NAME,
        "meta": meta or {},
        "networks": [{"name": name, "widths": list(net.widths)} for name, net in nets.items()],
    }).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        f.write(header)
        for net in nets.values():
            for p in net.params():
                f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_binary(path):
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = len(MAGIC)
    try:
        version, hlen = struct.unpack_from("<II", raw, off)
    except struct.error:
        raise CheckpointError(f"{path}: truncated header") from None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    off += 8
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
        entries = [(e["name"], tuple(int(w) for w in e["widths"])) for e in header["networks"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from None
    off += hlen
    payload = sum(w[l] * w[l + 1] + w[l + 1] for _, w in entries for l in range(len(w) - 1))
    if len(raw) - off < 8 * payload:
        raise CheckpointError(f"{path}: truncated payload")
    nets = {}
    for name, widths in entries:
        weights, biases = [], []
        for l in range(len(widths) - 1):
            n = widths[l] * widths[l + 1]
            weights.append(np.frombuffer(raw, "<f8", n, off).reshape(widths[l], widths[l + 1]).astype(float))
            off += 8 * n
            biases.append(np.frombuffer(raw, "<f8", widths[l + 1], off).astype(float))
            off += 8 * widths[l + 1]
        nets[name] = Mlp(widths, weights, biases)
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return nets, header.get("meta", {})


def save(path, nets: dict, meta: dict | None = None) -> None:
    """Dispatch on suffix: ``.json`` is JSON, anything else binary."""
    if str(path).endswith(".json"):
        save_json(path, nets, meta)
    else:
        save_binary(path, nets, meta)


def load(path):
    if str(path).endswith(".json"):
        return load_json(path)
    return load_binary(path)
