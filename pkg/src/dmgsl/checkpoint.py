"""Versioned binary checkpoints.

Layout: magic b"DMGSL1\\n", a little-endian uint64 header length, a canonical
JSON header (sorted keys, no whitespace), then the raw float64 little-endian
array payloads in the order the header's "arrays" list declares. Everything
that affects a continued run is stored: parameters, anchor slices, optimizer
moments, the augmentation RNG state, and the loss trace so far. Saving the
same state twice produces identical bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"DMGSL1\n"


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]  # insertion order = model parameter order
    anchors: list[np.ndarray]
    optimizer: dict  # state_dict of the optimizer, moments included
    epoch: int
    config_hash: str
    loss_trace: list[float]
    rng_state: dict = field(default_factory=dict)  # augmentation bit-generator state


def _array_entries(ckpt: Checkpoint):
    for name, arr in ckpt.params.items():
        yield f"param:{name}", arr
    for i, arr in enumerate(ckpt.anchors):
        yield f"anchor:{i}", arr
    for i, arr in enumerate(ckpt.optimizer.get("m", [])):
        yield f"opt_m:{i}", arr
    for i, arr in enumerate(ckpt.optimizer.get("v", [])):
        yield f"opt_v:{i}", arr


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    entries = list(_array_entries(ckpt))
    header = {
        "version": 1,
        "epoch": int(ckpt.epoch),
        "config_hash": ckpt.config_hash,
        "loss_trace": [float(v) for v in ckpt.loss_trace],
        "optimizer": {k: v for k, v in ckpt.optimizer.items() if k not in ("m", "v")},
        "rng_state": ckpt.rng_state,
        "n_anchors": len(ckpt.anchors),
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in entries],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(Path(path), "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in entries:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ParseError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = np.ascontiguousarray(arr, dtype=np.float64)
        offset += count * 8
    if offset != len(raw):
        raise ParseError(f"{path}: trailing bytes after declared arrays")
    params = {k.split(":", 1)[1]: v for k, v in arrays.items() if k.startswith("param:")}
    anchors = [arrays[f"anchor:{i}"] for i in range(header["n_anchors"])]
    optimizer = dict(header["optimizer"])
    n_moments = sum(1 for k in arrays if k.startswith("opt_m:"))
    if n_moments:
        optimizer["m"] = [arrays[f"opt_m:{i}"] for i in range(n_moments)]
        optimizer["v"] = [arrays[f"opt_v:{i}"] for i in range(n_moments)]
    return Checkpoint(
        params=params,
        anchors=anchors,
        optimizer=optimizer,
        epoch=int(header["epoch"]),
        config_hash=header["config_hash"],
        loss_trace=[float(x) for x in header["loss_trace"]],
        rng_state=header["rng_state"],
    )
