import hashlib
import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonoislr.dataset import (coverage_summary, enrich_metadata, join_datasets, load_metadata,
                               partition_by_coverage, sample_set_from_metadata, validate_metadata)
from phonoislr.errors import DataError
from phonoislr.inventory import MISSING
from phonoislr.poses import PoseSequence, load_pose, model_input, normalize_pose, resample_frames, save_pose
from phonoislr.synth import GeneratorConfig, generate_synthetic, metadata_from_samples

from conftest import make_lexicon


def toy_metadata(n_glosses=10, per_gloss=3):
    splits = ["train", "val", "test"]
    return [{"gloss": f"w{g}", "instances": [{"video_id": f"v{g}_{i}", "split": splits[i % 3]}
                                             for i in range(per_gloss)]} for g in range(n_glosses)]


@pytest.fixture
def four_sign_lexicon():
    return make_lexicon([("W0", ("a", "x")), ("w3", ("b", "y")), ("W5", ("a", "y")), ("w9", ("c", "x")),
                         ("other", ("b", "x"))])


def test_toy_join_counts(four_sign_lexicon):
    ss = join_datasets(toy_metadata(), four_sign_lexicon)
    assert len(ss) == 30
    assert sum(s.labeled for s in ss.samples) == 12
    assert ss.coverage == pytest.approx(0.4)
    summary = coverage_summary(ss)
    assert summary["signs"] == {"with_P": 4, "without_P": 6, "total": 10}
    assert summary["videos"]["with_P"] == {"train": 4, "val": 4, "test": 4, "total": 12}
    assert summary["videos"]["total"]["total"] == 30


def test_join_copies_tuples_verbatim(four_sign_lexicon):
    ss = join_datasets(toy_metadata(), four_sign_lexicon)
    for s in ss.samples:
        sign = four_sign_lexicon.lookup(ss.vocabulary[s.gloss_id])
        if sign is None:
            assert s.phonemes == (MISSING, MISSING)
        else:
            assert s.phonemes == sign.phonemes


def test_join_preserves_videos_and_inputs(four_sign_lexicon):
    meta = toy_metadata()
    before = json.dumps(meta, sort_keys=True)
    ss = join_datasets(meta, four_sign_lexicon)
    assert json.dumps(meta, sort_keys=True) == before
    want = Counter((i["video_id"], i["split"]) for e in meta for i in e["instances"])
    assert Counter((s.video_id, s.split) for s in ss.samples) == want
    assert list(ss.vocabulary) == [e["gloss"] for e in meta]


def test_full_coverage():
    lex = make_lexicon([(f"w{g}", ("a" if g % 2 else "b",)) for g in range(4)])
    ss = join_datasets(toy_metadata(4), lex)
    assert ss.coverage == 1.0
    with_p, without_p = partition_by_coverage(ss, "test")
    assert without_p == [] and len(with_p) == 4


def test_partition_exhaustive(four_sign_lexicon):
    ss = join_datasets(toy_metadata(), four_sign_lexicon)
    for split in ("train", "val", "test"):
        a, b = partition_by_coverage(ss, split)
        assert len(a) + len(b) == len(ss.split(split))
        assert not {s.video_id for s in a} & {s.video_id for s in b}


@pytest.mark.parametrize("bad", [
    [],
    {"gloss": "a"},
    [{"gloss": "a"}],
    [{"gloss": "a", "instances": [{"video_id": "1", "split": "dev"}]}],
    [{"gloss": "a", "instances": [{"split": "train"}]}],
    [{"gloss": "a", "instances": []}, {"gloss": "A ", "instances": []}],
])
def test_malformed_metadata(bad):
    with pytest.raises(DataError):
        validate_metadata(bad)


def test_enriched_metadata_round_trip(tmp_path, four_sign_lexicon):
    joined = enrich_metadata(toy_metadata(), four_sign_lexicon)
    p = tmp_path / "joined.json"
    p.write_text(json.dumps(joined))
    ss = sample_set_from_metadata(load_metadata(p), four_sign_lexicon.inventory)
    assert ss.coverage == pytest.approx(0.4)
    joined[0]["instances"][0]["phonemes"] = [9, 0]
    with pytest.raises(DataError):
        sample_set_from_metadata(joined, four_sign_lexicon.inventory)


def test_pose_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pose = PoseSequence(rng.normal(size=(7, 3, 2)).astype(np.float32), fps=30.0)
    for name in ("a.pose", "a.json"):
        save_pose(pose, tmp_path / name)
        back = load_pose(tmp_path / name)
        assert back.frames.tobytes() == pose.frames.tobytes()
        assert back.fps == 30.0
    save_pose(PoseSequence(np.zeros((1, 1, 2), np.float32)), tmp_path / "min.pose")
    assert load_pose(tmp_path / "min.pose").shape == (1, 1, 2)


def test_truncated_pose_rejected(tmp_path):
    pose = PoseSequence(np.ones((4, 2, 3), np.float32))
    p = tmp_path / "x.pose"
    save_pose(pose, p)
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(DataError):
        load_pose(p)


def test_pose_validation():
    with pytest.raises(DataError):
        PoseSequence(np.full((2, 2, 2), np.nan, np.float32))
    with pytest.raises(DataError):
        PoseSequence(np.zeros((2, 2, 4), np.float32))


def test_normalize_and_resample():
    rng = np.random.default_rng(1)
    frames = rng.normal(3.0, 2.0, size=(9, 4, 2))
    out = normalize_pose(frames)
    assert np.allclose(out.reshape(-1, 2).mean(axis=0), 0.0)
    assert np.abs(out).max() == pytest.approx(1.0)
    r = resample_frames(frames, 17)
    assert r.shape == (17, 4, 2)
    assert np.allclose(r[0], frames[0]) and np.allclose(r[-1], frames[-1])
    assert np.allclose(r[2], frames[1])
    x = model_input(PoseSequence(frames.astype(np.float32)), 32)
    assert x.shape == (32, 8) and x.dtype == np.float32


def digest(ss):
    h = hashlib.sha256()
    for s in ss.samples:
        h.update(f"{s.video_id}|{s.gloss_id}|{s.phonemes}|{s.split}".encode())
        h.update(s.pose.frames.tobytes())
    return h.hexdigest()


def test_generator_deterministic():
    cfg = dict(glosses=8, videos_per_gloss=4, frames=6)
    a = generate_synthetic(GeneratorConfig(**cfg, seed=4))
    b = generate_synthetic(GeneratorConfig(**cfg, seed=4))
    c = generate_synthetic(GeneratorConfig(**cfg, seed=5))
    assert digest(a[1]) == digest(b[1]) != digest(c[1])
    assert a[2] == b[2]


def test_half_coverage_exact():
    _, ss, manifest = generate_synthetic(GeneratorConfig(glosses=10, videos_per_gloss=20, coverage=0.5, frames=4))
    assert len(ss) == 200
    assert sum(s.labeled for s in ss.samples) == 100
    assert sum(v["labeled"] for v in manifest["videos"]) == 100


def test_zero_coverage():
    _, ss, _ = generate_synthetic(GeneratorConfig(glosses=6, videos_per_gloss=3, coverage=0.0, frames=4))
    assert ss.coverage == 0.0


def test_splits_stratified():
    _, ss, _ = generate_synthetic(GeneratorConfig(glosses=5, videos_per_gloss=20, frames=4))
    for g in range(5):
        counts = Counter(s.split for s in ss.samples if s.gloss_id == g)
        assert counts == {"train": 14, "val": 3, "test": 3}


def test_noise_free_glosses():
    _, ss, manifest = generate_synthetic(GeneratorConfig(glosses=2, videos_per_gloss=3, noise=0.0, frames=8))
    assert manifest["glosses"][0]["phonemes"] != manifest["glosses"][1]["phonemes"]
    by_gloss = {g: [s.pose.frames for s in ss.samples if s.gloss_id == g] for g in (0, 1)}
    for g in (0, 1):
        assert all(np.array_equal(by_gloss[g][0], f) for f in by_gloss[g][1:])
    assert not np.array_equal(by_gloss[0][0], by_gloss[1][0])


def test_controlling_factors_recoverable_without_noise():
    cfg = GeneratorConfig(glosses=40, videos_per_gloss=3, noise=0.0, frames=16)
    _, ss, manifest = generate_synthetic(cfg)
    truth = np.array([manifest["glosses"][s.gloss_id]["phonemes"] for s in ss.samples])
    hands = np.stack([s.pose.frames[:, cfg.body_keypoints:, :].astype(np.float64) for s in ss.samples])
    centroid = hands.mean(axis=2)
    features = {
        0: (hands - centroid[:, :, None, :]).mean(axis=1).reshape(len(hands), -1),
        1: centroid.mean(axis=1),
        2: (centroid - centroid.mean(axis=1, keepdims=True)).reshape(len(hands), -1),
    }
    for t, feats in features.items():
        classes = np.unique(truth[:, t])
        assert len(classes) == cfg.cardinalities[t]
        centers = np.stack([feats[truth[:, t] == c].mean(axis=0) for c in classes])
        pred = classes[np.argmin(((feats[:, None] - centers[None]) ** 2).sum(-1), axis=1)]
        assert (pred == truth[:, t]).mean() == 1.0


def test_manifest_rescan(tmp_path):
    from phonoislr.experiment import write_synthetic
    from phonoislr.inventory import load_inventory
    from phonoislr.lexicon import load_lexicon

    lex, ss, manifest = generate_synthetic(GeneratorConfig(glosses=12, videos_per_gloss=3, frames=4, seed=2))
    out = write_synthetic(lex, ss, manifest, tmp_path / "d")
    assert load_inventory(out / "lexicon.csv").cardinalities == (5, 7, 4)
    stored = json.loads((out / "manifest.json").read_text())
    assert stored == json.loads(json.dumps(manifest))
    again = join_datasets(out / "metadata.json", load_lexicon(out / "lexicon.csv"))
    assert [s.phonemes for s in again.samples] == [s.phonemes for s in ss.samples]
    assert [v["labeled"] for v in stored["videos"]] == [s.labeled for s in again.samples]
    for v in stored["videos"][:5]:
        assert (out / "poses" / f"{v['video_id']}.pose").exists()


def test_collisions_and_infeasible():
    _, _, manifest = generate_synthetic(GeneratorConfig(glosses=20, videos_per_gloss=3, frames=4, collision_rate=0.3))
    tuples = [tuple(g["phonemes"]) for g in manifest["glosses"]]
    assert len(set(tuples)) < len(tuples)
    with pytest.raises(ValueError):
        generate_synthetic(GeneratorConfig(glosses=10, cardinalities=(2, 2), videos_per_gloss=3, frames=4))
    with pytest.raises(ValueError):
        GeneratorConfig.from_dict({"glosses": 3, "colour": 1})


@given(st.integers(2, 30), st.floats(0.0, 1.0), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_coverage_matches_recount(glosses, rho, seed):
    _, ss, manifest = generate_synthetic(GeneratorConfig(glosses=glosses, videos_per_gloss=3, frames=2,
                                                         coverage=rho, seed=seed, body_keypoints=1,
                                                         hand_keypoints=1))
    labeled = sum(s.labeled for s in ss.samples)
    assert ss.coverage == labeled / len(ss)
    assert labeled == 3 * sum(g["in_lexicon"] for g in manifest["glosses"])
    meta = metadata_from_samples(ss)
    assert sum(len(e["instances"]) for e in meta) == len(ss)
