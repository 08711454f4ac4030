"""Checkpoint files: a JSON header followed by little-endian float32 tensors.

Layout::

    b"ISLRCKPT" | u32 header length | header JSON (utf-8) | tensor bytes

The header holds the model config, arbitrary ``extra`` metadata and, per
tensor, its name and shape in storage order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .network import ModelConfig

MAGIC = b"ISLRCKPT"


def save_checkpoint(path, params: dict, config: ModelConfig, extra: dict | None = None) -> None:
    tensors = [{"name": k, "shape": list(np.shape(v))} for k, v in params.items()]
    header = json.dumps({"config": config.to_dict(), "tensors": tensors, "extra": extra or {}}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for k in params:
            fh.write(np.ascontiguousarray(params[k], dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, ModelConfig, dict]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    off = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + hlen])
    off += hlen
    params = {}
    for t in header["tensors"]:
        count = int(np.prod(t["shape"], dtype=np.int64))
        end = off + 4 * count
        if end > len(data):
            raise DataError(f"{path}: truncated tensor {t['name']!r}")
        params[t["name"]] = np.frombuffer(data[off:end], dtype="<f4").reshape(t["shape"]).astype(np.float32)
        off = end
    if off != len(data):
        raise DataError(f"{path}: {len(data) - off} trailing bytes")
    return params, ModelConfig.from_dict(header["config"]), header["extra"]
