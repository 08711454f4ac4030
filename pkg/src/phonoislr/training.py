"""Mini-batch training with early stopping, prediction, and frozen-encoder probes."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import SampleSet, VideoSample
from .errors import DataError, NumericalError
from .inventory import MISSING, PhonemeSubset
from .network import (ModelConfig, compute_loss, forward, init_params, loss_and_grads, softmax)

log = logging.getLogger(__name__)


def model_config_for(sample_set: SampleSet, subset: PhonemeSubset, **overrides) -> ModelConfig:
    """Model config whose heads match the vocabulary and the active phoneme subset."""
    inv = sample_set.inventory
    pose = next((s.pose for s in sample_set.samples if s.pose is not None), None)
    if pose is None:
        raise DataError("sample set has no poses attached")
    _, K, C = pose.shape
    return ModelConfig(
        input_dim=K * C,
        gloss_classes=len(sample_set.vocabulary),
        phoneme_types=tuple(subset.members),
        phoneme_classes=tuple(inv[t].cardinality for t in subset),
        phoneme_names=tuple(inv[t].name for t in subset),
        **overrides,
    )


@dataclass
class Arrays:
    x: np.ndarray
    gloss: np.ndarray
    phonemes: np.ndarray  # (N, |subset|)


def arrays_for(sample_set: SampleSet, samples: list[VideoSample], config: ModelConfig) -> Arrays:
    x = sample_set.features(samples, config.T_model)
    ph = sample_set.phoneme_labels(samples)[:, list(config.phoneme_types)]
    return Arrays(x, sample_set.gloss_labels(samples), ph)


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


class EarlyStopping:
    """Track the best score; signal a stop after ``patience`` epochs without improvement.

    Only a strictly higher score counts as an improvement, so on ties the
    earlier checkpoint is kept.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.since_improvement = 0

    def update(self, epoch: int, score: float) -> bool:
        if score > self.best:
            self.best, self.best_epoch, self.since_improvement = score, epoch, 0
            return True
        self.since_improvement += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.since_improvement >= self.patience


@dataclass
class TrainState:
    params: dict
    config: ModelConfig
    epoch: int = 0
    best_val_accuracy: float = 0.0
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    optimizer: Adam | None = field(default=None, repr=False)
    rng_state: dict | None = field(default=None, repr=False)


def predict_logits(params: dict, x: np.ndarray, config: ModelConfig, batch_size: int = 256):
    outs = [forward(params, x[i:i + batch_size], config) for i in range(0, len(x), batch_size)]
    n_heads = len(config.head_names)
    if not outs:
        return np.zeros((0, config.embed_dim)), [np.zeros((0, s)) for s in config.head_sizes]
    emb = np.concatenate([o.embedding for o in outs])
    logits = [np.concatenate([o.logits[h] for o in outs]) for h in range(n_heads)]
    return emb, logits


@dataclass
class Prediction:
    scores: np.ndarray  # (N, |V|) softmax over glosses
    phonemes: np.ndarray  # (N, |subset|) argmax value ids
    embedding: np.ndarray


def predict(params: dict, x: np.ndarray, config: ModelConfig) -> Prediction:
    emb, logits = predict_logits(params, x, config)
    scores = softmax(logits[0].astype(np.float64), axis=1)
    ph = np.stack([lg.argmax(axis=1) for lg in logits[1:]], axis=1) if len(logits) > 1 else np.zeros((len(x), 0), int)
    return Prediction(scores, ph, emb)


def top1_accuracy(params, arrays: Arrays, config) -> float:
    if len(arrays.gloss) == 0:
        return 0.0
    _, logits = predict_logits(params, arrays.x, config)
    return float((logits[0].argmax(axis=1) == arrays.gloss).mean())


def train(config: ModelConfig, sample_set: SampleSet, log_file=None) -> tuple[TrainState, list[dict]]:
    """Train until validation top-1 has not improved for ``patience`` epochs.

    Returns the state holding the best-validation parameters and the
    per-epoch log.  ``log_file`` (an open text file) receives one JSON line per
    epoch.
    """
    train_s, val_s = sample_set.split("train"), sample_set.split("val")
    if not train_s or not val_s:
        raise DataError("train and val splits must be non-empty")
    tr = arrays_for(sample_set, train_s, config)
    va = arrays_for(sample_set, val_s, config)

    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng, np.float32)
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    stopper = EarlyStopping(config.patience)
    best = {k: v.copy() for k, v in params.items()}
    history = []
    start = time.perf_counter()
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(tr.gloss))
        sums = None
        n_batches = 0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            breakdown, grads = loss_and_grads(params, tr.x[idx], tr.gloss[idx], tr.phonemes[idx], config)
            if not np.isfinite(breakdown.total):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {i // config.batch_size}")
            opt.step(params, grads)
            row = np.array([breakdown.total, breakdown.gloss_loss, *breakdown.phoneme_losses])
            sums = row if sums is None else sums + row
            n_batches += 1
        means = sums / n_batches
        val_acc = top1_accuracy(params, va, config)
        if stopper.update(epoch, val_acc):
            best = {k: v.copy() for k, v in params.items()}
        entry = {
            "epoch": epoch,
            "total_loss": float(means[0]),
            "gloss_loss": float(means[1]),
            "phoneme_losses": {n: float(v) for n, v in zip(config.phoneme_names, means[2:])},
            "val_acc1": val_acc,
            "elapsed": round(time.perf_counter() - start, 3),
        }
        history.append(entry)
        if log_file is not None:
            log_file.write(json.dumps(entry) + "\n")
        if stopper.should_stop:
            break
    log.info("trained %d epochs, best val A@1 %.4f at epoch %d", epoch, stopper.best, stopper.best_epoch)
    state = TrainState(best, config, epoch, float(stopper.best), stopper.best_epoch, stopper.since_improvement,
                       opt, rng.bit_generator.state)
    return state, history


def phoneme_accuracy(pred: np.ndarray, labels: np.ndarray) -> float | None:
    mask = labels != MISSING
    if not mask.any():
        return None
    return float((pred[mask] == labels[mask]).mean())


@dataclass
class ProbeHead:
    W: np.ndarray
    b: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def logits(self, emb: np.ndarray) -> np.ndarray:
        return ((emb - self.mean) / self.std) @ self.W + self.b

    def predict(self, emb: np.ndarray) -> np.ndarray:
        return self.logits(emb).argmax(axis=1)


def fit_linear_probe(train_emb, train_y, n_classes: int, val_emb=None, val_y=None,
                     epochs: int = 300, lr: float = 1e-2, seed: int = 0) -> ProbeHead:
    """Softmax regression on fixed embeddings, full-batch Adam.

    Inputs are standardized with training statistics.  When validation data is
    given the epoch with the best validation accuracy is kept.
    """
    train_emb = np.asarray(train_emb, dtype=np.float64)
    train_y = np.asarray(train_y)
    if len(train_y) == 0:
        raise DataError("no labeled samples to fit a probe on")
    mean = train_emb.mean(axis=0)
    std = train_emb.std(axis=0)
    std[std < 1e-8] = 1.0
    xs = (train_emb - mean) / std
    rng = np.random.default_rng(seed)
    params = {"W": rng.normal(0, 0.01, size=(xs.shape[1], n_classes)), "b": np.zeros(n_classes)}
    opt = Adam(params, lr)
    probe = ProbeHead(params["W"], params["b"], mean, std)
    best, best_acc = (params["W"].copy(), params["b"].copy()), -1.0
    for _ in range(epochs):
        _, (dl,) = compute_loss([xs @ params["W"] + params["b"]], train_y, np.zeros((len(train_y), 0)))
        opt.step(params, {"W": xs.T @ dl, "b": dl.sum(axis=0)})
        if val_emb is not None and len(val_y):
            acc = float((probe.predict(val_emb) == val_y).mean())
            if acc > best_acc:
                best, best_acc = (params["W"].copy(), params["b"].copy()), acc
    if val_emb is not None and len(val_y):
        probe = ProbeHead(best[0], best[1], mean, std)
    return probe


def linear_probe(params: dict, config: ModelConfig, sample_set: SampleSet, type_id: int,
                 seed: int = 0) -> tuple[ProbeHead, float]:
    """Fit a probe for one phoneme type on frozen embeddings; return it with its test accuracy."""
    card = sample_set.inventory[type_id].cardinality
    parts = {}
    for split in ("train", "val", "test"):
        samples = [s for s in sample_set.split(split) if s.phonemes[type_id] != MISSING]
        if samples:
            emb, _ = predict_logits(params, sample_set.features(samples, config.T_model), config)
        else:
            emb = np.zeros((0, config.embed_dim))
        parts[split] = (emb, np.array([s.phonemes[type_id] for s in samples], dtype=np.int64))
    if len(parts["train"][1]) == 0:
        raise DataError(f"no labeled training samples for phoneme type {sample_set.inventory[type_id].name!r}")
    probe = fit_linear_probe(*parts["train"], card, *parts["val"], seed=seed)
    test_emb, test_y = parts["test"]
    acc = float((probe.predict(test_emb) == test_y).mean()) if len(test_y) else float("nan")
    return probe, acc
