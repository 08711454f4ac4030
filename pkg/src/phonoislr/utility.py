"""How well phoneme-type subsets pin down signs.

For a subset of phoneme types, signs are bucketed by their values on those
types.  A sign is *uniquely identified* when its bucket holds only itself, and
the utility of the subset is the fraction of (includable) signs that are.
Signs lacking a value on any type of the subset are left out of both the
numerator and the denominator.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .inventory import MISSING, PhonemeSubset, all_subsets_of_size
from .lexicon import Lexicon

METHODS = ("exact", "greedy")


@dataclass
class LookupTable:
    """Restricted phoneme tuple -> gloss ids sharing it, for one subset."""

    subset: PhonemeSubset
    buckets: dict[tuple[int, ...], tuple[int, ...]]
    excluded: tuple[int, ...] = ()

    @property
    def included_count(self) -> int:
        return sum(len(b) for b in self.buckets.values())


@dataclass
class Posterior:
    probabilities: dict[int, float]
    unseen: bool = False


@dataclass
class UtilityResult:
    subset: PhonemeSubset
    utility: float
    unique_count: int
    included_count: int
    method: str = "direct"
    names: list[str] = field(default_factory=list)
    seconds: float = 0.0
    excluded_count: int = 0

    def as_fraction(self) -> Fraction:
        if self.included_count == 0:
            return Fraction(0)
        return Fraction(self.unique_count, self.included_count)

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset.members),
            "names": self.names,
            "utility": self.utility,
            "unique_count": self.unique_count,
            "included_count": self.included_count,
            "excluded_count": self.excluded_count,
            "method": self.method,
            "seconds": self.seconds,
        }


def build_lookup(lexicon: Lexicon, subset: PhonemeSubset) -> LookupTable:
    buckets: dict[tuple[int, ...], list[int]] = defaultdict(list)
    excluded = []
    for sign in lexicon.signs:
        key = tuple(sign.phonemes[m] for m in subset)
        if MISSING in key:
            excluded.append(sign.gloss_id)
        else:
            buckets[key].append(sign.gloss_id)
    return LookupTable(subset, {k: tuple(v) for k, v in buckets.items()}, tuple(excluded))


def query_posterior(table: LookupTable, observed: Sequence[int]) -> Posterior:
    """Uniform distribution over the signs sharing ``observed``; empty if none do."""
    observed = tuple(int(v) for v in observed)
    if len(observed) != len(table.subset):
        raise ValueError(f"observed tuple has {len(observed)} values, subset has {len(table.subset)} types")
    bucket = table.buckets.get(observed)
    if not bucket:
        return Posterior({}, unseen=True)
    p = 1.0 / len(bucket)
    return Posterior({g: p for g in bucket})


def _subset_counts(codes: np.ndarray, members: tuple[int, ...]) -> tuple[int, int]:
    """(unique_count, included_count) of the signs restricted to ``members``."""
    cols = codes[:, list(members)]
    included = cols[(cols != MISSING).all(axis=1)] if members else cols
    n = included.shape[0]
    if n == 0:
        return 0, 0
    if not members:
        return (1 if n == 1 else 0), n
    radices = included.max(axis=0) + 1
    if np.sum(np.log2(radices.astype(float))) < 62:
        # mixed-radix key per row; much faster than row-wise unique
        weights = np.cumprod(np.concatenate([[1], radices[:-1]])).astype(np.int64)
        _, counts = np.unique(included @ weights, return_counts=True)
    else:
        _, counts = np.unique(included, axis=0, return_counts=True)
    return int((counts == 1).sum()), n


def _result(lexicon, subset, unique, included, method, seconds=0.0) -> UtilityResult:
    util = unique / included if included else 0.0
    return UtilityResult(subset, util, unique, included, method, subset.names(lexicon.inventory), seconds,
                         len(lexicon) - included)


def compute_utility(lexicon: Lexicon, subset: PhonemeSubset) -> UtilityResult:
    """Fraction of includable signs whose restricted tuple no other sign shares."""
    unique, included = _subset_counts(lexicon.code_matrix(), subset.members)
    return _result(lexicon, subset, unique, included, "direct")


def pairwise_utility(lexicon: Lexicon, subset: PhonemeSubset) -> float:
    """Pair-counting form of the utility, for comparison only.

    For each includable sign S, with its own values on the subset observed,
    counts the signs S' that the lookup posterior ranks strictly below S, and
    divides the total by ``|V| - 1``.  This is not a fraction of signs and is
    never used for selection.
    """
    table = build_lookup(lexicon, subset)
    n = table.included_count
    if n < 2:
        return 0.0
    total = 0
    for bucket in table.buckets.values():
        # members of the bucket get p = 1/|bucket|, every other sign p = 0
        total += len(bucket) * (n - len(bucket))
    return total / (n - 1)


def _better(a: tuple[int, int], b: tuple[int, int] | None) -> bool:
    """Whether counts ``a`` give a strictly higher utility than ``b``."""
    if b is None:
        return True
    ua, na = a
    ub, nb = b
    fa = Fraction(ua, na) if na else Fraction(0)
    fb = Fraction(ub, nb) if nb else Fraction(0)
    return fa > fb


def select_optimal_subset(lexicon: Lexicon, n: int, method: str = "exact") -> UtilityResult:
    """Highest-utility subset of ``n`` phoneme types.

    ``exact`` scans every size-``n`` subset in lexicographic order and keeps
    the first maximum.  ``greedy`` adds one type at a time, each time the one
    with the best resulting utility (lexicographically smallest set on ties).
    """
    k = len(lexicon.inventory)
    if not 0 <= n <= k:
        raise ValueError(f"subset size {n} outside [0, {k}]")
    if method not in METHODS:
        raise ValueError(f"unknown selection method {method!r}")
    codes = lexicon.code_matrix()
    start = time.perf_counter()
    if method == "exact":
        best, best_counts = None, None
        for cand in all_subsets_of_size(k, n):
            counts = _subset_counts(codes, cand.members)
            if _better(counts, best_counts):
                best, best_counts = cand, counts
    else:
        best = PhonemeSubset()
        best_counts = _subset_counts(codes, ())
        for _ in range(n):
            step, step_counts = None, None
            # candidates in ascending order of the grown set
            for t in sorted(set(range(k)) - set(best.members), key=lambda t: best.union([t]).members):
                cand = best.union([t])
                counts = _subset_counts(codes, cand.members)
                if _better(counts, step_counts):
                    step, step_counts = cand, counts
            best, best_counts = step, step_counts
    return _result(lexicon, best, *best_counts, method, time.perf_counter() - start)


def utility_sweep(lexicon: Lexicon, sizes: Iterable[int], method: str = "exact") -> list[UtilityResult]:
    return [select_optimal_subset(lexicon, n, method) for n in sizes]


def format_results(results: Sequence[UtilityResult]) -> str:
    lines = [f"{'n':>2}  {'utility':>8}  {'unique':>6}  {'incl.':>6}  {'method':<6}  subset"]
    for r in results:
        names = ", ".join(r.names) if r.names else "(none)"
        lines.append(f"{len(r.subset):>2}  {r.utility:>8.4f}  {r.unique_count:>6}  {r.included_count:>6}  {r.method:<6}  {names}")
    return "\n".join(lines)
