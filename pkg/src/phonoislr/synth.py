"""Synthetic desk-scale datasets whose poses are composed from phoneme values.

Each gloss gets a phoneme tuple.  The first three phoneme types drive the
pose of a hand made of ``hand_keypoints`` points next to a static body:

* type 0 ("handshape") sets a fixed offset pattern of the hand keypoints,
* type 1 ("location") sets the time-averaged hand position,
* type 2 ("movement") sets a zero-mean trajectory of the hand over time.

Any further types are carried as labels only.  Gaussian noise is added to
every coordinate.  A fraction of the glosses is written to the lexicon (so a
join labels exactly their videos); the rest stay unlabeled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import SPLITS, SampleSet, VideoSample
from .inventory import MISSING, PhonemeInventory, PhonemeType
from .lexicon import Lexicon, Sign
from .poses import PoseSequence

CONTROL_ROLES = ("handshape", "location", "movement")
DEFAULT_TYPE_NAMES = ("Handshape", "Location", "Movement")


@dataclass
class GeneratorConfig:
    glosses: int = 50
    cardinalities: tuple[int, ...] = (5, 7, 4)
    type_names: tuple[str, ...] | None = None
    videos_per_gloss: int = 20
    frames: int = 32
    body_keypoints: int = 5
    hand_keypoints: int = 6
    dims: int = 2
    noise: float = 0.15
    coverage: float = 0.5
    collision_rate: float = 0.0
    split_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    handshape_scale: float = 0.05
    location_scale: float = 0.15
    movement_scale: float = 0.06
    seed: int = 0

    def __post_init__(self):
        self.cardinalities = tuple(int(c) for c in self.cardinalities)
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        if self.type_names is not None:
            self.type_names = tuple(self.type_names)

    def names(self) -> tuple[str, ...]:
        if self.type_names is not None:
            if len(self.type_names) != len(self.cardinalities):
                raise ValueError("type_names and cardinalities differ in length")
            return self.type_names
        extra = tuple(f"Type {i}" for i in range(len(DEFAULT_TYPE_NAMES), len(self.cardinalities)))
        return (DEFAULT_TYPE_NAMES + extra)[: len(self.cardinalities)]

    def validate(self) -> None:
        if self.glosses < 2:
            raise ValueError("need at least 2 glosses")
        if len(self.cardinalities) < 1:
            raise ValueError("need at least 1 phoneme type")
        if any(c < 2 for c in self.cardinalities):
            raise ValueError("every phoneme type needs at least 2 values")
        if self.videos_per_gloss < 3:
            raise ValueError("need at least 3 videos per gloss (one per split)")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        if not 0.0 <= self.collision_rate < 1.0:
            raise ValueError("collision_rate must lie in [0, 1)")
        if self.frames < 1 or self.hand_keypoints < 1 or self.body_keypoints < 0 or self.dims not in (2, 3):
            raise ValueError("invalid pose geometry")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        self.names()

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown generator options: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cardinalities"] = list(self.cardinalities)
        d["split_fractions"] = list(self.split_fractions)
        d["type_names"] = list(self.type_names) if self.type_names is not None else None
        return d


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def value_names(cardinality: int) -> tuple[str, ...]:
    # zero-padded so lexicographic order equals numeric order
    width = len(str(cardinality - 1))
    return tuple(f"v{v:0{width}d}" for v in range(cardinality))


def build_inventory(config: GeneratorConfig) -> PhonemeInventory:
    return PhonemeInventory(tuple(
        PhonemeType(i, name, value_names(card)) for i, (name, card) in enumerate(zip(config.names(), config.cardinalities))
    ))


@dataclass
class _Prototypes:
    body: np.ndarray
    handshape: np.ndarray
    location: np.ndarray
    movement: np.ndarray


def _prototypes(config: GeneratorConfig, rng: np.random.Generator) -> _Prototypes:
    C, Kh, T = config.dims, config.hand_keypoints, config.frames
    cards = list(config.cardinalities) + [1] * (3 - min(3, len(config.cardinalities)))
    body = rng.uniform(-1.0, 1.0, size=(config.body_keypoints, C))
    hs = rng.normal(0.0, config.handshape_scale, size=(cards[0], Kh, C))
    hs -= hs.mean(axis=1, keepdims=True)
    loc = rng.uniform(-config.location_scale, config.location_scale, size=(cards[1], C))
    t = np.linspace(0.0, 1.0, T)[:, None]
    amp = rng.normal(0.0, config.movement_scale, size=(cards[2], 2, 2, C))
    phase = rng.uniform(0.0, 2 * np.pi, size=(cards[2], 2, 1, C))
    mov = np.zeros((cards[2], T, C))
    for h in (0, 1):
        arg = 2 * np.pi * (h + 1) * t[None] + phase[:, h]
        mov += amp[:, h, 0][:, None] * np.sin(arg) + amp[:, h, 1][:, None] * np.cos(arg)
    mov -= mov.mean(axis=1, keepdims=True)
    # roles without a phoneme type contribute nothing
    if len(config.cardinalities) < 2:
        loc[:] = 0.0
    if len(config.cardinalities) < 3:
        mov[:] = 0.0
    return _Prototypes(body, hs, loc, mov)


def render_pose(protos: _Prototypes, phonemes, config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Noisy ``(T, K, C)`` pose of one video with the given phoneme tuple."""
    ph = list(phonemes) + [0] * (3 - min(3, len(phonemes)))
    hand = protos.location[ph[1]][None, None, :] + protos.movement[ph[2]][:, None, :] + protos.handshape[ph[0]][None, :, :]
    body = np.broadcast_to(protos.body[None], (config.frames,) + protos.body.shape)
    frames = np.concatenate([body, hand], axis=1)
    if config.noise > 0:
        frames = frames + rng.normal(0.0, config.noise, size=frames.shape)
    return frames.astype(np.float32)


def _assign_tuples(config: GeneratorConfig, labeled: list[int], rng: np.random.Generator):
    cards = config.cardinalities
    G = config.glosses
    n_cover = max(cards)
    cover = [tuple(i % c for c in cards) for i in range(n_cover)]
    product = math.prod(cards)
    n_cover_labeled = min(len(labeled), n_cover)
    rest = [g for g in range(G) if g not in set(labeled[:n_cover_labeled])]
    # colliding glosses copy a tuple from some gloss that owns a distinct one
    n_collide = min(round_half_up(config.collision_rate * G), len(rest) - (n_cover_labeled == 0))
    n_new = len(rest) - n_collide
    if n_cover + n_new > product:
        raise ValueError(
            f"infeasible generator config: {n_cover + n_new} distinct phoneme tuples needed, "
            f"only {product} exist")

    used = set(cover)
    if product <= 200_000:
        pool = [tup for tup in itertools.product(*(range(c) for c in cards)) if tup not in used]
        picks = [pool[i] for i in rng.permutation(len(pool))[:n_new]]
    else:
        picks = []
        while len(picks) < n_new:
            tup = tuple(int(rng.integers(c)) for c in cards)
            if tup not in used:
                used.add(tup)
                picks.append(tup)

    tuples: dict[int, tuple[int, ...]] = {}
    for g, tup in zip(labeled[:n_cover_labeled], cover):
        tuples[g] = tup
    order = [rest[i] for i in rng.permutation(len(rest))]
    for g, tup in zip(order[:n_new], picks):
        tuples[g] = tup
    donors = sorted(tuples)
    for g in order[n_new:]:
        tuples[g] = tuples[donors[int(rng.integers(len(donors)))]]
    fillers = cover[n_cover_labeled:]
    return tuples, fillers


def _split_counts(n: int, fractions) -> dict[str, int]:
    n_val = max(1, round_half_up(n * fractions[1]))
    n_test = max(1, round_half_up(n * fractions[2]))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ValueError(f"{n} videos per gloss cannot fill all three splits")
    return {"train": n_train, "val": n_val, "test": n_test}


def generate_synthetic(config: GeneratorConfig | None = None):
    """Generate a lexicon, a pose-bearing sample set and a ground-truth manifest.

    Returns:
        ``(lexicon, sample_set, manifest)``.  ``sample_set`` is exactly what
        joining the generated metadata with ``lexicon`` yields, with poses
        attached.  ``manifest`` is a JSON-ready dict holding the seed, the
        config, every gloss's true tuple and the per-video label mask.
    """
    config = config or GeneratorConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    inventory = build_inventory(config)
    G, K = config.glosses, len(config.cardinalities)
    glosses = [f"G{g:03d}" for g in range(G)]

    n_labeled = round_half_up(config.coverage * G)
    labeled = sorted(int(g) for g in rng.permutation(G)[:n_labeled])
    tuples, fillers = _assign_tuples(config, labeled, rng)
    labeled_set = set(labeled)

    lex_entries = [(glosses[g], tuples[g]) for g in labeled]
    lex_entries += [(f"LEX{i:03d}", tup) for i, tup in enumerate(fillers)]
    lexicon = Lexicon(inventory, tuple(Sign(name, i, tup) for i, (name, tup) in enumerate(lex_entries)))

    protos = _prototypes(config, rng)
    counts = _split_counts(config.videos_per_gloss, config.split_fractions)
    samples = []
    for g in range(G):
        splits = [sp for sp in SPLITS for _ in range(counts[sp])]
        splits = [splits[i] for i in rng.permutation(len(splits))]
        phonemes = tuples[g] if g in labeled_set else (MISSING,) * K
        for v, split in enumerate(splits):
            frames = render_pose(protos, tuples[g], config, rng)
            samples.append(VideoSample(f"{glosses[g]}_{v:03d}", g, tuple(phonemes), split, PoseSequence(frames)))
    sample_set = SampleSet(samples, tuple(glosses), inventory)

    manifest = {
        "seed": config.seed,
        "config": config.to_dict(),
        "phoneme_types": [
            {"name": t.name, "values": list(t.values), "role": CONTROL_ROLES[t.id] if t.id < 3 else None}
            for t in inventory.types
        ],
        "glosses": [
            {"gloss": glosses[g], "phonemes": list(tuples[g]), "in_lexicon": g in labeled_set} for g in range(G)
        ],
        "lexicon_only": [{"gloss": name, "phonemes": list(tup)} for name, tup in lex_entries[len(labeled):]],
        "videos": [{"video_id": s.video_id, "gloss": glosses[s.gloss_id], "split": s.split, "labeled": s.labeled}
                   for s in samples],
    }
    return lexicon, sample_set, manifest


def metadata_from_samples(sample_set: SampleSet, with_phonemes: bool = False) -> list[dict]:
    """WLASL-style metadata array for a sample set, in vocabulary order."""
    entries = [{"gloss": g, "instances": []} for g in sample_set.vocabulary]
    for s in sample_set.samples:
        inst = {"video_id": s.video_id, "split": s.split}
        if with_phonemes:
            inst["phonemes"] = list(s.phonemes)
        entries[s.gloss_id]["instances"].append(inst)
    return entries
