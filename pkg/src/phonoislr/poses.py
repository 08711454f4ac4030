"""Pose sequences: storage format, per-clip normalization and time resampling.

Binary layout (little-endian)::

    b"PSQ1" | u32 T | u32 K | u32 C | f32 fps | T*K*C f32 coordinates (row-major)

A ``.json`` file with keys ``T``, ``K``, ``C``, ``fps`` and a nested ``frames``
list is accepted as a human-readable fallback.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"PSQ1"
_HEADER = struct.Struct("<4sIIIf")


@dataclass(frozen=True)
class PoseSequence:
    frames: np.ndarray  # (T, K, C)
    fps: float = 25.0

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise DataError(f"pose frames must be T x K x C, got shape {frames.shape}")
        T, K, C = frames.shape
        if T < 1 or K < 1 or C not in (2, 3):
            raise DataError(f"invalid pose shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise DataError("pose contains non-finite coordinates")
        object.__setattr__(self, "frames", frames)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.frames.shape


def save_pose(pose: PoseSequence, path) -> None:
    path = Path(path)
    frames = np.ascontiguousarray(pose.frames, dtype="<f4")
    if path.suffix == ".json":
        T, K, C = frames.shape
        doc = {"T": T, "K": K, "C": C, "fps": float(pose.fps), "frames": frames.astype(float).tolist()}
        path.write_text(json.dumps(doc))
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *frames.shape, pose.fps))
        fh.write(frames.tobytes())


def load_pose(path) -> PoseSequence:
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        frames = np.asarray(doc["frames"], dtype=np.float32)
        declared = (doc["T"], doc["K"], doc["C"])
        if frames.shape != declared:
            raise DataError(f"{path}: frames shape {frames.shape} differs from declared {declared}")
        return PoseSequence(frames, float(doc.get("fps", 25.0)))
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated pose header")
    magic, T, K, C, fps = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    payload = data[_HEADER.size:]
    if len(payload) != 4 * T * K * C:
        raise DataError(f"{path}: header declares {T}x{K}x{C} floats but payload has {len(payload)} bytes")
    frames = np.frombuffer(payload, dtype="<f4").reshape(T, K, C).astype(np.float32)
    return PoseSequence(frames, float(fps))


def normalize_pose(frames: np.ndarray) -> np.ndarray:
    """Center every coordinate axis on its clip mean and scale the clip into [-1, 1]."""
    out = frames - frames.reshape(-1, frames.shape[-1]).mean(axis=0)
    scale = np.abs(out).max()
    return out / scale if scale > 0 else out


def resample_frames(frames: np.ndarray, length: int) -> np.ndarray:
    """Linearly interpolate a ``(T, ...)`` array to ``length`` frames."""
    T = frames.shape[0]
    if T == length:
        return frames.copy()
    if T == 1:
        return np.repeat(frames, length, axis=0)
    pos = np.linspace(0.0, T - 1, length)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, T - 1)
    frac = (pos - lo).reshape((-1,) + (1,) * (frames.ndim - 1))
    return frames[lo] * (1.0 - frac) + frames[hi] * frac


def model_input(pose: PoseSequence, length: int) -> np.ndarray:
    """Normalized, resampled ``(length, K*C)`` float32 matrix for the encoder."""
    frames = normalize_pose(pose.frames.astype(np.float64))
    frames = resample_frames(frames, length)
    return frames.reshape(length, -1).astype(np.float32)
