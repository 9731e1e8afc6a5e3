"""Versioned binary model checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes  b"ADVINFO\\x00"
    version    u32
    meta_len   u32      length of the UTF-8 JSON metadata block
    meta       JSON     {"model": <spec dict>, "params": [[name, [dims...]], ...], ...}
    payload    float64  little-endian values of every parameter, in ``params`` order
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .models import LayerSpec, ModelSpec, Network

MAGIC = b"ADVINFO\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def spec_to_dict(spec: ModelSpec) -> dict:
    return asdict(spec)


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(
        name=d["name"],
        input_shape=tuple(d["input_shape"]),
        classes=d["classes"],
        layers=tuple(LayerSpec(**layer) for layer in d["layers"]),
    )


def save_checkpoint(net: Network, path, extra: dict | None = None) -> None:
    names = list(net.params)
    meta = {
        "model": spec_to_dict(net.spec),
        "params": [[n, list(net.params[n].shape)] for n in names],
        "dtype": str(net.dtype),
        "extra": extra or {},
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(net.params[n].data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[Network, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, meta_len = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    meta = json.loads(raw[16 : 16 + meta_len])
    spec = spec_from_dict(meta["model"])
    dtype = np.dtype(meta["dtype"])
    offset = 16 + meta_len
    params = {}
    for name, shape in meta["params"]:
        count = math.prod(shape)
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated at parameter {name}")
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    expected = [n for n, _ in spec.parameter_shapes()]
    if list(params) != expected:
        raise CheckpointError(f"{path}: parameter names {list(params)} do not match model {expected}")
    return Network(spec, params), meta.get("extra", {})
