"""Recognition metrics, majority baselines, seed aggregation and Welch's t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .dataset import SampleSet
from .errors import DataError
from .inventory import MISSING

POPULATIONS = ("all", "with_P", "without_P")
METRICS = ("A@1", "A@3", "MRR")


def ranks(scores: np.ndarray, true: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimistic rank of the true class (1 + number of strictly higher scores).

    Returns the ranks and, per sample, how many other classes tie with the
    true class's score.
    """
    scores = np.asarray(scores, dtype=np.float64)
    true = np.asarray(true)
    if scores.ndim != 2 or len(scores) != len(true):
        raise ValueError("scores must be (N, |V|) with one true label per row")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    own = scores[np.arange(len(true)), true][:, None]
    higher = (scores > own).sum(axis=1)
    ties = (scores == own).sum(axis=1) - 1
    return 1 + higher, ties


def topk_accuracy(scores, true, k: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    r, _ = ranks(scores, true)
    return float((r <= k).mean()) if len(r) else float("nan")


def mean_reciprocal_rank(scores, true) -> float:
    r, _ = ranks(scores, true)
    return float((1.0 / r).mean()) if len(r) else float("nan")


def recognition_metrics(scores, true) -> dict:
    r, ties = ranks(scores, true)
    n = len(r)
    if n == 0:
        return {"n": 0, "A@1": None, "A@3": None, "MRR": None, "ties": 0}
    return {
        "n": n,
        "A@1": float((r <= 1).mean()),
        "A@3": float((r <= 3).mean()),
        "MRR": float((1.0 / r).mean()),
        "ties": int((ties > 0).sum()),
    }


def majority_value(values: np.ndarray) -> int:
    """Most frequent value; the smallest id wins ties."""
    values = np.asarray(values)
    counts = np.bincount(values)
    return int(np.argmax(counts))


def majority_baseline(sample_set: SampleSet, head, train_split: str = "train", test_split: str = "test") -> float:
    """Accuracy on ``test_split`` of always predicting the training majority.

    ``head`` is ``"gloss"`` or a phoneme type id; only labeled samples count.
    """
    def labels(split):
        samples = sample_set.split(split)
        if head == "gloss":
            return np.array([s.gloss_id for s in samples], dtype=np.int64)
        y = np.array([s.phonemes[head] for s in samples], dtype=np.int64)
        return y[y != MISSING]

    train_y = labels(train_split)
    if len(train_y) == 0:
        raise DataError(f"no labeled training samples for head {head!r}")
    test_y = labels(test_split)
    if len(test_y) == 0:
        raise DataError(f"no labeled {test_split} samples for head {head!r}")
    return float((test_y == majority_value(train_y)).mean())


@dataclass
class WelchResult:
    t: float
    df: float
    p: float
    comparisons: int
    alpha: float
    significant: bool
    degenerate: bool = False

    @property
    def threshold(self) -> float:
        return self.alpha / self.comparisons

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v
        return {"t": clean(self.t), "df": clean(self.df), "p": clean(self.p), "comparisons": self.comparisons,
                "threshold": self.threshold, "significant": self.significant, "degenerate": self.degenerate}


def welch_test(values_a: Sequence[float], values_b: Sequence[float], m: int = 3, alpha: float = 0.05) -> WelchResult:
    """Two-sided Welch t-test, significance judged at the Bonferroni level ``alpha / m``.

    Groups with fewer than two values, or with zero variance in both groups,
    are flagged ``degenerate`` and never reported significant.
    """
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if m < 1:
        raise ValueError("number of comparisons must be at least 1")
    if len(a) < 2 or len(b) < 2:
        return WelchResult(math.nan, math.nan, math.nan, m, alpha, False, True)
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0:
        return WelchResult(math.nan, math.nan, math.nan, m, alpha, False, True)
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = float(2 * stats.t.sf(abs(t), df))
    return WelchResult(float(t), float(df), p, m, alpha, p < alpha / m)


def flatten(report: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in report.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "/"))
        elif isinstance(v, (int, float)) and not isinstance(v, bool) or v is None:
            out[key] = v
    return out


def unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        node = out
        parts = key.split("/")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    return out


def aggregate_seeds(reports: Sequence[dict]) -> dict:
    """Per-cell mean and sample standard deviation over per-seed reports."""
    if len(reports) < 2:
        raise ValueError("need at least two seeds to aggregate")
    flats = [flatten(r) for r in reports]
    keys = list(flats[0])
    if any(list(f) != keys for f in flats[1:]):
        raise ValueError("per-seed reports have different shapes")
    mean, sd = {}, {}
    for k in keys:
        vals = [f[k] for f in flats]
        if any(v is None for v in vals):
            mean[k] = sd[k] = None
            continue
        arr = np.array(vals, dtype=np.float64)
        mean[k] = float(arr.mean())
        sd[k] = float(arr.std(ddof=1))
    mean, sd = unflatten(mean), unflatten(sd)
    for k, v in reports[0].items():
        # empty sections (e.g. no phoneme heads) vanish when flattened
        if isinstance(v, dict) and k not in mean:
            mean[k], sd[k] = {}, {}
    return {"seeds": len(reports), "mean": mean, "sd": sd, "per_seed": list(reports)}


def evaluate(scores: np.ndarray, true: np.ndarray, labeled: np.ndarray,
             phoneme_preds: np.ndarray | None = None, phoneme_labels: np.ndarray | None = None,
             phoneme_names: Sequence[str] = (), majority: dict | None = None) -> dict:
    """Evaluation report for one trained model on one test population.

    ``labeled`` flags samples whose gloss carries phoneme labels; it splits
    the population into ``with_P`` and ``without_P``.
    """
    labeled = np.asarray(labeled, dtype=bool)
    true = np.asarray(true)
    report = {"populations": {
        "all": recognition_metrics(scores, true),
        "with_P": recognition_metrics(scores[labeled], true[labeled]),
        "without_P": recognition_metrics(scores[~labeled], true[~labeled]),
    }}
    accs = {}
    for i, name in enumerate(phoneme_names):
        y = phoneme_labels[:, i]
        mask = y != MISSING
        accs[name] = float((phoneme_preds[mask, i] == y[mask]).mean()) if mask.any() else None
    report["phoneme_accuracy"] = accs
    report["majority_baseline"] = dict(majority or {})
    return report


def format_cell(metric: str, mean, sd) -> str:
    if mean is None:
        return "-"
    if metric == "MRR":
        return f"{mean:.2f}±{sd:.2f}" if sd is not None else f"{mean:.2f}"
    return f"{100 * mean:.1f}±{100 * sd:.1f}" if sd is not None else f"{100 * mean:.1f}"


def format_table(models: dict[str, dict], delta: dict | None = None, significance: dict | None = None) -> str:
    """Populations x metrics text table of aggregated reports (A@k in %, MRR as a fraction)."""
    header = f"{'model':<12}" + "".join(f"{p + ' ' + m:>16}" for p in POPULATIONS for m in METRICS)
    lines = [header]
    for name, agg in models.items():
        row = f"{name:<12}"
        for p in POPULATIONS:
            for m in METRICS:
                row += f"{format_cell(m, agg['mean']['populations'][p][m], agg['sd']['populations'][p][m]):>16}"
        lines.append(row)
    if delta is not None:
        row = f"{'delta':<12}"
        for p in POPULATIONS:
            for m in METRICS:
                v = delta[p][m]
                star = "*" if significance and p == "all" and significance.get(m, {}).get("significant") else ""
                cell = "-" if v is None else (f"{star}{v:+.2f}" if m == "MRR" else f"{star}{100 * v:+.1f}")
                row += f"{cell:>16}"
        lines.append(row)
    return "\n".join(lines)
