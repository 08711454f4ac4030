"""Reproducible experiments: data loading, subset resolution, multi-seed training and reports."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import (SampleSet, attach_poses, coverage_summary, enrich_metadata, load_metadata,
                      sample_set_from_metadata, write_metadata)
from .errors import DataError
from .inventory import PhonemeSubset
from .lexicon import Lexicon, load_lexicon, write_lexicon
from .metrics import METRICS, POPULATIONS, aggregate_seeds, evaluate, format_table, majority_baseline, welch_test
from .network import ModelConfig
from .poses import save_pose
from .synth import GeneratorConfig, generate_synthetic, metadata_from_samples
from .training import arrays_for, linear_probe, model_config_for, phoneme_accuracy, predict, train
from .utility import select_optimal_subset

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3)


@dataclass
class ExperimentConfig:
    lexicon: str | None = None
    metadata: str | None = None
    pose_dir: str | None = None
    out: str = "runs"
    subset: str = "optimal:2"
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    synth: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    selection_method: str = "exact"
    sweep: list[int] | None = None
    comparisons: int = 3
    expect_asllex: bool = False
    delimiter: str | None = None
    gloss_column: str | None = None
    phoneme_columns: list[str] | None = None
    baseline_checkpoint: str | None = None
    full_checkpoint: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def synthetic(self) -> bool:
        return self.metadata is None

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig.from_dict(self.synth)


def write_json(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_synthetic(lexicon: Lexicon, sample_set: SampleSet, manifest: dict, out_dir) -> Path:
    """Write lexicon.csv, metadata.json, manifest.json and poses/ under ``out_dir``."""
    out = Path(out_dir)
    (out / "poses").mkdir(parents=True, exist_ok=True)
    write_lexicon(lexicon, out / "lexicon.csv")
    write_metadata(metadata_from_samples(sample_set), out / "metadata.json")
    write_json(out / "manifest.json", manifest)
    for s in sample_set.samples:
        save_pose(s.pose, out / "poses" / f"{s.video_id}.pose")
    return out


def load_lexicon_from(config: ExperimentConfig) -> Lexicon:
    lex = load_lexicon(config.lexicon, config.delimiter, config.gloss_column, config.phoneme_columns)
    if config.expect_asllex:
        lex.inventory.check_asllex()
    return lex


def load_data(config: ExperimentConfig, need_poses: bool = True) -> tuple[Lexicon, SampleSet]:
    """Real data when a metadata path is configured, otherwise the synthetic generator."""
    if config.synthetic:
        lexicon, sample_set, _ = generate_synthetic(config.generator_config())
        return lexicon, sample_set
    if config.lexicon is None:
        raise ValueError("a metadata file needs a lexicon file to join with")
    lexicon = load_lexicon_from(config)
    sample_set = sample_set_from_metadata(enrich_metadata(load_metadata(config.metadata), lexicon), lexicon.inventory)
    if need_poses:
        if config.pose_dir is None:
            raise ValueError("pose_dir is required for training and evaluation on real data")
        attach_poses(sample_set, config.pose_dir)
    return lexicon, sample_set


def resolve_subset(spec: str, lexicon: Lexicon, method: str = "exact") -> tuple[PhonemeSubset, dict]:
    """Turn ``none`` / ``all`` / ``optimal:n`` / ``Name,Name`` into a subset."""
    spec = spec.strip()
    inv = lexicon.inventory
    if spec in ("none", ""):
        subset, how = PhonemeSubset(), {"spec": spec}
    elif spec == "all":
        subset, how = inv.full_subset(), {"spec": spec}
    elif spec.startswith("optimal:"):
        n = int(spec.split(":", 1)[1])
        result = select_optimal_subset(lexicon, n, method)
        subset = result.subset
        how = {"spec": spec, "method": method, "utility": result.utility,
               "unique_count": result.unique_count, "included_count": result.included_count}
    else:
        subset, how = inv.subset(n.strip() for n in spec.split(",")), {"spec": spec}
    how["types"] = subset.names(inv)
    log.info("subset %s resolved to %s", spec, how["types"] or "(none)")
    return subset, how


def evaluate_model(params, model_config: ModelConfig, sample_set: SampleSet, split: str = "test") -> dict:
    samples = sample_set.split(split)
    arrays = arrays_for(sample_set, samples, model_config)
    pred = predict(params, arrays.x, model_config)
    labeled = np.array([s.labeled for s in samples], dtype=bool)
    majority = {}
    for t, name in zip(model_config.phoneme_types, model_config.phoneme_names):
        try:
            majority[name] = majority_baseline(sample_set, t, "train", split)
        except DataError:
            majority[name] = None
    return evaluate(pred.scores, arrays.gloss, labeled, pred.phonemes, arrays.phonemes,
                    model_config.phoneme_names, majority)


def train_one(sample_set: SampleSet, subset: PhonemeSubset, seed: int, overrides: dict, out_dir=None):
    model_config = model_config_for(sample_set, subset, **{**overrides, "seed": seed})
    log_fh = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        log_fh = open(Path(out_dir) / f"train_seed{seed}.jsonl", "w")
    try:
        state, history = train(model_config, sample_set, log_fh)
    finally:
        if log_fh is not None:
            log_fh.close()
    if out_dir is not None:
        save_checkpoint(Path(out_dir) / f"seed{seed}.ckpt", state.params, model_config,
                        {"best_epoch": state.best_epoch, "best_val_acc1": state.best_val_accuracy,
                         "epochs": state.epoch})
    return state, model_config


def compare_models(base: dict, other: dict, comparisons: int, population: str = "all") -> dict:
    out = {}
    for m in METRICS:
        a = [r["populations"][population][m] for r in other["per_seed"]]
        b = [r["populations"][population][m] for r in base["per_seed"]]
        out[m] = welch_test(a, b, comparisons).to_dict()
    return out


def delta_row(base: dict, other: dict) -> dict:
    row = {}
    for p in POPULATIONS:
        row[p] = {}
        for m in METRICS:
            a, b = other["mean"]["populations"][p][m], base["mean"]["populations"][p][m]
            row[p][m] = None if a is None or b is None else a - b
    return row


def cmd_experiment(config: ExperimentConfig) -> dict:
    """Train baseline and auxiliary models for every seed and compare them.

    With ``config.sweep`` set, one model per ``optimal:n`` subset is trained
    instead, each compared with the ``n = 0`` model.
    """
    if len(config.seeds) < 2:
        raise ValueError("an experiment needs at least two seeds")
    out = Path(config.out)
    lexicon, sample_set = load_data(config)
    if config.sweep:
        specs = [(f"n={n}", "none" if n == 0 else f"optimal:{n}") for n in config.sweep]
        if config.sweep[0] != 0:
            specs.insert(0, ("n=0", "none"))
    else:
        specs = [("baseline", "none"), ("auxiliary", config.subset)]

    resolved = {}
    models = {}
    for label, spec in specs:
        subset, how = resolve_subset(spec, lexicon, config.selection_method)
        resolved[label] = how
        reports = []
        for seed in config.seeds:
            log.info("training %s seed %d", label, seed)
            state, model_config = train_one(sample_set, subset, seed, config.model, out / "models" / label)
            reports.append(evaluate_model(state.params, model_config, sample_set))
        models[label] = aggregate_seeds(reports)

    base_label = specs[0][0]
    comparisons, deltas = {}, {}
    for label, _ in specs[1:]:
        comparisons[label] = compare_models(models[base_label], models[label], config.comparisons)
        deltas[label] = delta_row(models[base_label], models[label])

    metrics = {"models": models, "subsets": resolved, "baseline": base_label,
               "delta": deltas, "significance": comparisons, "seeds": list(config.seeds)}
    write_json(out / "metrics.json", metrics)
    write_json(out / "config.json", {**config.to_dict(), "resolved_subsets": resolved})
    (out / "report.txt").write_text(format_experiment(metrics) + "\n")
    return metrics


def format_experiment(metrics: dict) -> str:
    parts = []
    base = metrics["baseline"]
    for label, delta in metrics["delta"].items():
        parts.append(f"[{label} vs {base}] subset: {', '.join(metrics['subsets'][label]['types']) or '(none)'}")
        parts.append(format_table({base: metrics["models"][base], label: metrics["models"][label]},
                                  delta, metrics["significance"][label]))
        parts.append("")
    if not metrics["delta"]:
        parts.append(format_table({base: metrics["models"][base]}))
    return "\n".join(parts).rstrip()


def cmd_synth(config: ExperimentConfig) -> dict:
    gen = config.generator_config()
    lexicon, sample_set, manifest = generate_synthetic(gen)
    write_synthetic(lexicon, sample_set, manifest, config.out)
    return {"out": str(config.out), "glosses": gen.glosses, "videos": len(sample_set),
            "lexicon_signs": len(lexicon), "coverage": sample_set.coverage}


def cmd_join(config: ExperimentConfig) -> dict:
    if config.metadata is None or config.lexicon is None:
        raise ValueError("join needs both a lexicon and a metadata file")
    lexicon = load_lexicon_from(config)
    joined = enrich_metadata(load_metadata(config.metadata), lexicon)
    sample_set = sample_set_from_metadata(joined, lexicon.inventory)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    write_metadata(joined, Path(config.out) / "joined.json")
    summary = coverage_summary(sample_set)
    write_json(Path(config.out) / "summary.json", summary)
    return summary


def format_summary(summary: dict) -> str:
    lines = [f"{'P labels':<10}{'# signs':>8}{'train':>8}{'val':>8}{'test':>8}{'total':>8}"]
    for key, mark in (("without_P", "no"), ("with_P", "yes"), ("total", "total")):
        v = summary["videos"][key]
        lines.append(f"{mark:<10}{summary['signs'][key]:>8}{v['train']:>8}{v['val']:>8}{v['test']:>8}{v['total']:>8}")
    lines.append(f"coverage: {100 * summary['coverage']:.1f}% of videos have phoneme labels")
    return "\n".join(lines)


def cmd_probe(config: ExperimentConfig) -> dict:
    """Per phoneme type: multi-task head vs linear probe on a gloss-only encoder vs majority."""
    lexicon, sample_set = load_data(config)
    inv = sample_set.inventory
    seed = config.seeds[0]
    out = Path(config.out)
    if config.baseline_checkpoint:
        base_params, base_config, _ = load_checkpoint(config.baseline_checkpoint)
    else:
        state, base_config = train_one(sample_set, PhonemeSubset(), seed, config.model, out / "models" / "baseline")
        base_params = state.params
    if config.full_checkpoint:
        full_params, full_config, _ = load_checkpoint(config.full_checkpoint)
    else:
        state, full_config = train_one(sample_set, inv.full_subset(), seed, config.model, out / "models" / "full")
        full_params = state.params
    if base_config.phoneme_types:
        raise ValueError("the probe's baseline checkpoint must be trained without phoneme heads")

    test = sample_set.split("test")
    arrays = arrays_for(sample_set, test, full_config)
    pred = predict(full_params, arrays.x, full_config)
    rows = []
    for t in inv.types:
        full_acc = None
        if t.id in full_config.phoneme_types:
            i = full_config.phoneme_types.index(t.id)
            full_acc = phoneme_accuracy(pred.phonemes[:, i], arrays.phonemes[:, i])
        try:
            _, probe_acc = linear_probe(base_params, base_config, sample_set, t.id, seed=seed)
            majority = majority_baseline(sample_set, t.id)
        except DataError:
            probe_acc = majority = None
        rows.append({"type": t.name, "full": full_acc, "probe": probe_acc, "majority": majority})
    result = {"seed": seed, "rows": rows}
    write_json(out / "probe.json", result)
    with open(out / "probe.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["type", "full", "probe", "majority"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return result


def format_probe(result: dict) -> str:
    lines = [f"{'phoneme type':<24}{'full':>8}{'probe':>8}{'majority':>10}"]

    def cell(v, w):
        return f"{'-':>{w}}" if v is None else f"{v:>{w}.3f}"

    for r in result["rows"]:
        lines.append(f"{r['type']:<24}{cell(r['full'], 8)}{cell(r['probe'], 8)}{cell(r['majority'], 10)}")
    return "\n".join(lines)
