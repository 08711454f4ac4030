from __future__ import annotations

import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from phonoislr.inventory import PhonemeInventory, PhonemeType
from phonoislr.lexicon import Lexicon, Sign, lexicon_from_table

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool | None, detail: str = "") -> None:
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"[{status}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_lexicon(rows, names=None):
    """Lexicon from ``{gloss: (value names...)}`` or a list of (gloss, values) pairs."""
    items = list(rows.items()) if isinstance(rows, dict) else list(rows)
    k = len(items[0][1])
    header = ["gloss"] + list(names or [f"t{i}" for i in range(k)])
    return lexicon_from_table(header, [[g, *map(str, vals)] for g, vals in items])


def coded_lexicon(codes, cardinalities):
    """Lexicon straight from value ids; value names are the ids themselves."""
    types = tuple(PhonemeType(i, f"t{i}", tuple(str(v) for v in range(c))) for i, c in enumerate(cardinalities))
    signs = tuple(Sign(f"S{i}", i, tuple(int(v) for v in row)) for i, row in enumerate(codes))
    return Lexicon(PhonemeInventory(types), signs)


def random_lexicon(rng, max_signs=10, max_types=4, min_card=2, max_card=5, missing_rate=0.0,
                   n_signs=None, n_types=None):
    n = n_signs or int(rng.integers(2, max_signs + 1))
    k = n_types or int(rng.integers(1, max_types + 1))
    cards = [int(c) for c in rng.integers(min_card, max_card + 1, size=k)]
    codes = np.stack([rng.integers(0, c, size=n) for c in cards], axis=1)
    if missing_rate:
        codes[rng.random(codes.shape) < missing_rate] = -1
    return coded_lexicon(codes, cards)


def oracle_unique_count(lexicon, members) -> tuple[int, int]:
    """Brute force: signs whose restricted tuple occurs exactly once, among signs with no gaps."""
    keyed = []
    for sign in lexicon.signs:
        vals = tuple(sign.phonemes[m] for m in members)
        if -1 not in vals:
            keyed.append(vals)
    counts = Counter(keyed)
    return sum(1 for v in keyed if counts[v] == 1), len(keyed)


def oracle_best_subset(lexicon, n):
    """Exhaustive search ranking by (included-normalized utility desc, subset ids asc)."""
    best = None
    for combo in itertools.combinations(range(len(lexicon.inventory)), n):
        u, inc = oracle_unique_count(lexicon, combo)
        util = Fraction(u, inc) if inc else Fraction(0)
        if best is None or util > best[1]:
            best = (combo, util)
    return best


@pytest.fixture
def toy_lexicon():
    # the A/B/C example: only A is uniquely identified by (t0, t1)
    lex = coded_lexicon([(1, 1), (1, 2), (1, 2)], (3, 3))
    return Lexicon(lex.inventory, tuple(Sign(g, i, s.phonemes) for i, (g, s) in enumerate(zip("ABC", lex.signs))))
