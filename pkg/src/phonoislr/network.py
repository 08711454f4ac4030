"""Multi-head pose-sequence classifier with a hand-written backward pass.

Architecture::

    x (B, T, D) -> relu(x W_in + b_in) = h (B, T, E)
                -> temporal pooling (attention or mean) = z (B, E)
                -> relu(z W1 + b1) -> relu(. W2 + b2) = e (B, E)
                -> one linear head per output, all reading e

The first head predicts the gloss; each further head predicts the value of
one phoneme type.  The loss is the gloss cross entropy plus a (weighted) sum
of phoneme cross entropies, each averaged over the samples that carry a label
for that head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalError
from .inventory import MISSING

POOLINGS = ("attention", "mean")


@dataclass
class ModelConfig:
    input_dim: int
    gloss_classes: int
    phoneme_types: tuple[int, ...] = ()
    phoneme_classes: tuple[int, ...] = ()
    phoneme_names: tuple[str, ...] = ()
    loss_weights: tuple[float, ...] | None = None
    T_model: int = 32
    embed_dim: int = 64
    pooling: str = "attention"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0

    def __post_init__(self):
        self.phoneme_types = tuple(int(t) for t in self.phoneme_types)
        self.phoneme_classes = tuple(int(c) for c in self.phoneme_classes)
        self.phoneme_names = tuple(self.phoneme_names) or tuple(f"phoneme{t}" for t in self.phoneme_types)
        if self.loss_weights is None:
            self.loss_weights = (1.0,) * len(self.phoneme_types)
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if not (len(self.phoneme_types) == len(self.phoneme_classes) == len(self.phoneme_names) == len(self.loss_weights)):
            raise ValueError("phoneme head descriptions differ in length")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")

    @property
    def head_names(self) -> list[str]:
        return ["gloss"] + [f"phoneme{t}" for t in self.phoneme_types]

    @property
    def head_sizes(self) -> list[int]:
        return [self.gloss_classes, *self.phoneme_classes]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("phoneme_types", "phoneme_classes", "phoneme_names", "loss_weights"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def init_params(config: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> dict[str, np.ndarray]:
    """Fan-in scaled uniform initialization."""
    D, E = config.input_dim, config.embed_dim

    def uniform(fan_in, shape, gain):
        bound = gain / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    relu_gain = np.sqrt(6.0)
    params = {
        "W_in": uniform(D, (D, E), relu_gain),
        "b_in": np.zeros(E, dtype=dtype),
    }
    if config.pooling == "attention":
        params["attn"] = uniform(E, (E,), 1.0)
    params["W1"] = uniform(E, (E, E), relu_gain)
    params["b1"] = np.zeros(E, dtype=dtype)
    params["W2"] = uniform(E, (E, E), relu_gain)
    params["b2"] = np.zeros(E, dtype=dtype)
    for name, size in zip(config.head_names, config.head_sizes):
        params[f"{name}.W"] = uniform(E, (E, size), 1.0)
        params[f"{name}.b"] = np.zeros(size, dtype=dtype)
    return params


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=axis, keepdims=True)


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


@dataclass
class ForwardResult:
    embedding: np.ndarray
    logits: list[np.ndarray]
    attention: np.ndarray
    cache: dict = field(repr=False, default_factory=dict)


def forward(params: dict, x: np.ndarray, config: ModelConfig) -> ForwardResult:
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite model input")
    B, T, _ = x.shape
    pre_h = x @ params["W_in"] + params["b_in"]
    h = np.maximum(pre_h, 0)
    if config.pooling == "attention":
        alpha = softmax(h @ params["attn"], axis=1)
    else:
        alpha = np.full((B, T), 1.0 / T, dtype=x.dtype)
    z = np.einsum("bt,bte->be", alpha, h)
    pre1 = z @ params["W1"] + params["b1"]
    a1 = np.maximum(pre1, 0)
    pre2 = a1 @ params["W2"] + params["b2"]
    e = np.maximum(pre2, 0)
    logits = [e @ params[f"{n}.W"] + params[f"{n}.b"] for n in config.head_names]
    cache = {"x": x, "pre_h": pre_h, "h": h, "alpha": alpha, "z": z, "pre1": pre1, "a1": a1, "pre2": pre2}
    return ForwardResult(e, logits, alpha, cache)


@dataclass
class LossBreakdown:
    gloss_loss: float
    phoneme_losses: list[float]
    total: float
    labeled_counts: list[int]


def compute_loss(logits: list[np.ndarray], gloss_labels: np.ndarray, phoneme_labels: np.ndarray,
                 weights=None) -> tuple[LossBreakdown, list[np.ndarray]]:
    """Masked per-head mean cross entropy and its gradient w.r.t. every head's logits.

    Args:
        logits: gloss logits first, then one array per phoneme head.
        gloss_labels: ``(B,)`` gloss ids.
        phoneme_labels: ``(B, n_heads - 1)`` value ids, ``MISSING`` where absent.
        weights: per phoneme head loss weights (default all 1).
    """
    n_ph = len(logits) - 1
    phoneme_labels = np.asarray(phoneme_labels).reshape(len(gloss_labels), n_ph)
    weights = (1.0,) * n_ph if weights is None else tuple(weights)
    labels = [np.asarray(gloss_labels)] + [phoneme_labels[:, i] for i in range(n_ph)]
    head_weights = (1.0,) + weights
    losses, counts, grads = [], [], []
    for lg, y, w in zip(logits, labels, head_weights):
        mask = y != MISSING
        n = int(mask.sum())
        grad = np.zeros_like(lg)
        counts.append(n)
        if n == 0:
            losses.append(0.0)
            grads.append(grad)
            continue
        yl = y[mask]
        if yl.max() >= lg.shape[1] or yl.min() < 0:
            raise ValueError(f"label id out of range for head with {lg.shape[1]} classes")
        rows = lg[mask]
        lsm = log_softmax(rows, axis=1)
        losses.append(float(-lsm[np.arange(n), yl].mean()))
        g = np.exp(lsm)
        g[np.arange(n), yl] -= 1.0
        grad[mask] = g * (w / n)
        grads.append(grad)
    total = losses[0] + sum(w * l for w, l in zip(weights, losses[1:]))
    return LossBreakdown(losses[0], losses[1:], float(total), counts), grads


def backward(params: dict, result: ForwardResult, dlogits: list[np.ndarray], config: ModelConfig) -> dict[str, np.ndarray]:
    """Gradients of the loss w.r.t. every parameter, given gradients w.r.t. the logits."""
    c = result.cache
    e = result.embedding
    grads = {}
    de = np.zeros_like(e)
    for name, dl in zip(config.head_names, dlogits):
        grads[f"{name}.W"] = e.T @ dl
        grads[f"{name}.b"] = dl.sum(axis=0)
        de += dl @ params[f"{name}.W"].T
    dpre2 = de * (c["pre2"] > 0)
    grads["W2"] = c["a1"].T @ dpre2
    grads["b2"] = dpre2.sum(axis=0)
    da1 = dpre2 @ params["W2"].T
    dpre1 = da1 * (c["pre1"] > 0)
    grads["W1"] = c["z"].T @ dpre1
    grads["b1"] = dpre1.sum(axis=0)
    dz = dpre1 @ params["W1"].T

    h, alpha = c["h"], c["alpha"]
    dh = alpha[:, :, None] * dz[:, None, :]
    if config.pooling == "attention":
        dalpha = np.einsum("bte,be->bt", h, dz)
        ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        grads["attn"] = np.einsum("bt,bte->e", ds, h)
        dh += ds[:, :, None] * params["attn"][None, None, :]
    dpre_h = dh * (c["pre_h"] > 0)
    x = c["x"]
    grads["W_in"] = np.einsum("btd,bte->de", x, dpre_h)
    grads["b_in"] = dpre_h.sum(axis=(0, 1))
    return {k: grads[k] for k in params}


def loss_and_grads(params: dict, x: np.ndarray, gloss_labels, phoneme_labels, config: ModelConfig):
    result = forward(params, x, config)
    breakdown, dlogits = compute_loss(result.logits, gloss_labels, phoneme_labels, config.loss_weights)
    return breakdown, backward(params, result, dlogits, config)


def total_loss(params, x, gloss_labels, phoneme_labels, config) -> float:
    result = forward(params, x, config)
    return compute_loss(result.logits, gloss_labels, phoneme_labels, config.loss_weights)[0].total


@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tolerance: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative error of one tensor; 0 when both are exactly zero."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def gradcheck(params: dict, x: np.ndarray, gloss_labels, phoneme_labels, config: ModelConfig,
              step: float = 1e-5, tolerance: float = 1e-4,
              grad_fn: Callable | None = None) -> GradcheckReport:
    """Compare analytic gradients with central finite differences in float64.

    ``grad_fn(params, x, gloss_labels, phoneme_labels, config) -> grads`` may
    replace the built-in backward pass (used to test the checker itself).
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    x = np.asarray(x, dtype=np.float64)
    if grad_fn is None:
        analytic = loss_and_grads(params, x, gloss_labels, phoneme_labels, config)[1]
    else:
        analytic = grad_fn(params, x, gloss_labels, phoneme_labels, config)
    errors = {}
    for name, p in params.items():
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = total_loss(params, x, gloss_labels, phoneme_labels, config)
            flat[i] = orig - step
            down = total_loss(params, x, gloss_labels, phoneme_labels, config)
            flat[i] = orig
            nflat[i] = (up - down) / (2 * step)
        errors[name] = relative_error(analytic[name], numeric)
    return GradcheckReport(errors, tolerance)


def gradcheck_grid(step: float = 1e-5, tolerance: float = 1e-4, seed: int = 0) -> list[tuple[dict, GradcheckReport]]:
    """Gradient check over pooling x subset size x label masking on a tiny model."""
    rng = np.random.default_rng(seed)
    out = []
    for pooling in POOLINGS:
        for n_heads in (0, 2, 16):
            for masking in ("full", "mixed", "all-missing"):
                batch, T, D, E = 4, 5, 3, 4
                classes = tuple(int(c) for c in rng.integers(2, 4, size=n_heads))
                config = ModelConfig(input_dim=D, gloss_classes=4, phoneme_types=tuple(range(n_heads)),
                                     phoneme_classes=classes, T_model=T, embed_dim=E, pooling=pooling,
                                     loss_weights=tuple(rng.uniform(0.5, 2.0, size=n_heads)))
                params = init_params(config, rng, dtype=np.float64)
                for k in params:
                    if k.startswith("b") or k.endswith(".b"):
                        params[k] = rng.normal(0, 0.1, size=params[k].shape)
                x = rng.normal(size=(batch, T, D))
                y = rng.integers(0, 4, size=batch)
                ph = np.stack([rng.integers(0, c, size=batch) for c in classes], axis=1) if n_heads else np.zeros((batch, 0), int)
                if masking == "mixed" and n_heads:
                    ph[rng.random(ph.shape) < 0.4] = MISSING
                    ph[0, :] = MISSING
                elif masking == "all-missing":
                    ph[:] = MISSING
                report = gradcheck(params, x, y, ph, config, step, tolerance)
                out.append(({"pooling": pooling, "heads": n_heads, "masking": masking}, report))
    return out
