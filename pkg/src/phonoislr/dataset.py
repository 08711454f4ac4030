"""Benchmark metadata joined with a phonological lexicon.

The metadata is a JSON mirror of WLASL's file: an array of gloss entries, each
``{"gloss": ..., "instances": [{"video_id": ..., "split": ...}, ...]}``.
Joining adds a ``phonemes`` list (one int per phoneme type, ``-1`` when the
gloss is absent from the lexicon) to every instance and leaves everything else
as it was.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError
from .inventory import MISSING, PhonemeInventory
from .lexicon import Lexicon, normalize_gloss
from .poses import PoseSequence, load_pose, model_input

SPLITS = ("train", "val", "test")
POSE_SUFFIXES = (".pose", ".json")


@dataclass
class VideoSample:
    video_id: str
    gloss_id: int
    phonemes: tuple[int, ...]
    split: str
    pose: PoseSequence | None = None

    @property
    def labeled(self) -> bool:
        return any(v != MISSING for v in self.phonemes)


@dataclass
class SampleSet:
    samples: list[VideoSample]
    vocabulary: tuple[str, ...]
    inventory: PhonemeInventory
    _features: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def coverage(self) -> float:
        if not self.samples:
            return 0.0
        return sum(s.labeled for s in self.samples) / len(self.samples)

    def split(self, name: str) -> list[VideoSample]:
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}")
        return [s for s in self.samples if s.split == name]

    def gloss_labels(self, samples: Iterable[VideoSample]) -> np.ndarray:
        return np.array([s.gloss_id for s in samples], dtype=np.int64)

    def phoneme_labels(self, samples: Iterable[VideoSample]) -> np.ndarray:
        """``(N, K)`` int array of phoneme value ids, ``MISSING`` where unlabeled."""
        rows = [s.phonemes for s in samples]
        return np.array(rows, dtype=np.int64).reshape(len(rows), len(self.inventory))

    def features(self, samples: list[VideoSample], length: int) -> np.ndarray:
        """Stack encoder inputs of shape ``(N, length, K*C)``; cached per video."""
        out = []
        for s in samples:
            key = (s.video_id, length)
            if key not in self._features:
                if s.pose is None:
                    raise DataError(f"no pose attached for video {s.video_id!r}")
                self._features[key] = model_input(s.pose, length)
            out.append(self._features[key])
        return np.stack(out) if out else np.zeros((0, length, 0), dtype=np.float32)


def load_metadata(path) -> list[dict]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read metadata {path}: {exc}") from exc
    validate_metadata(data)
    return data


def validate_metadata(data) -> None:
    if not isinstance(data, list) or not data:
        raise DataError("metadata must be a non-empty JSON array of gloss entries")
    seen = set()
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "gloss" not in entry or not isinstance(entry.get("instances"), list):
            raise DataError(f"metadata entry {i} lacks 'gloss' or 'instances'")
        key = normalize_gloss(entry["gloss"])
        if key in seen:
            raise DataError(f"duplicate gloss {entry['gloss']!r} in metadata")
        seen.add(key)
        for inst in entry["instances"]:
            if "video_id" not in inst or "split" not in inst:
                raise DataError(f"instance of {entry['gloss']!r} lacks 'video_id' or 'split'")
            if inst["split"] not in SPLITS:
                raise DataError(f"unknown split {inst['split']!r} for video {inst['video_id']!r}")


def write_metadata(entries: list[dict], path) -> None:
    Path(path).write_text(json.dumps(entries, indent=1) + "\n")


def enrich_metadata(metadata: list[dict], lexicon: Lexicon) -> list[dict]:
    """Copy of ``metadata`` with a ``phonemes`` list on every instance."""
    validate_metadata(metadata)
    missing = [MISSING] * len(lexicon.inventory)
    out = copy.deepcopy(metadata)
    for entry in out:
        sign = lexicon.lookup(entry["gloss"])
        phonemes = list(sign.phonemes) if sign is not None else missing
        for inst in entry["instances"]:
            inst["phonemes"] = list(phonemes)
    return out


def sample_set_from_metadata(entries: list[dict], inventory: PhonemeInventory) -> SampleSet:
    """Build a :class:`SampleSet` from metadata that already carries phoneme lists."""
    validate_metadata(entries)
    k = len(inventory)
    samples = []
    for gloss_id, entry in enumerate(entries):
        for inst in entry["instances"]:
            phonemes = tuple(int(v) for v in inst.get("phonemes", [MISSING] * k))
            if len(phonemes) != k:
                raise DataError(f"video {inst['video_id']!r} has {len(phonemes)} phoneme fields, expected {k}")
            for t, v in enumerate(phonemes):
                if v != MISSING and not 0 <= v < inventory[t].cardinality:
                    raise DataError(f"video {inst['video_id']!r}: value {v} out of range for {inventory[t].name!r}")
            samples.append(VideoSample(str(inst["video_id"]), gloss_id, phonemes, inst["split"]))
    return SampleSet(samples, tuple(e["gloss"] for e in entries), inventory)


def join_datasets(metadata, lexicon: Lexicon) -> SampleSet:
    """Give every video the full phoneme tuple of its gloss, or all-missing if unmatched.

    ``metadata`` is a path or an already-parsed list of gloss entries.  Vocabulary
    order, video ids and splits are carried over unchanged.
    """
    if not isinstance(metadata, list):
        metadata = load_metadata(metadata)
    return sample_set_from_metadata(enrich_metadata(metadata, lexicon), lexicon.inventory)


def partition_by_coverage(sample_set: SampleSet, split: str) -> tuple[list[VideoSample], list[VideoSample]]:
    """Split one fold into (with phoneme labels, without phoneme labels)."""
    samples = sample_set.split(split)
    return [s for s in samples if s.labeled], [s for s in samples if not s.labeled]


def coverage_summary(sample_set: SampleSet) -> dict:
    """Sign and video counts per split, for labeled and unlabeled glosses."""
    labeled_glosses = {s.gloss_id for s in sample_set.samples if s.labeled}
    rows = {}
    for name, flag in (("without_P", False), ("with_P", True)):
        row = {sp: 0 for sp in SPLITS}
        for s in sample_set.samples:
            if s.labeled == flag:
                row[s.split] += 1
        row["total"] = sum(row[sp] for sp in SPLITS)
        rows[name] = row
    return {
        "signs": {
            "with_P": len(labeled_glosses),
            "without_P": len(sample_set.vocabulary) - len(labeled_glosses),
            "total": len(sample_set.vocabulary),
        },
        "videos": {
            **rows,
            "total": {k: rows["with_P"][k] + rows["without_P"][k] for k in (*SPLITS, "total")},
        },
        "coverage": sample_set.coverage,
    }


def find_pose_file(pose_dir, video_id: str) -> Path:
    for suffix in POSE_SUFFIXES:
        path = Path(pose_dir) / f"{video_id}{suffix}"
        if path.exists():
            return path
    raise DataError(f"no pose file for video {video_id!r} in {pose_dir}")


def attach_poses(sample_set: SampleSet, pose_dir) -> SampleSet:
    for s in sample_set.samples:
        s.pose = load_pose(find_pose_file(pose_dir, s.video_id))
    return sample_set
