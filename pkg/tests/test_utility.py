import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonoislr.inventory import PhonemeSubset
from phonoislr.utility import (build_lookup, compute_utility, pairwise_utility, query_posterior,
                               select_optimal_subset, utility_sweep)

from conftest import coded_lexicon, oracle_best_subset, oracle_unique_count, random_lexicon

P01 = PhonemeSubset((0, 1))


def test_toy_buckets(toy_lexicon):
    table = build_lookup(toy_lexicon, P01)
    assert table.buckets == {(1, 1): (0,), (1, 2): (1, 2)}
    assert table.excluded == ()


def test_empty_subset_single_bucket(toy_lexicon):
    table = build_lookup(toy_lexicon, PhonemeSubset())
    assert table.buckets == {(): (0, 1, 2)}
    assert compute_utility(toy_lexicon, PhonemeSubset()).utility == 0.0


def test_missing_sign_excluded():
    lex = coded_lexicon([(0, -1), (1, 0), (1, 1)], (2, 2))
    table = build_lookup(lex, PhonemeSubset((1,)))
    assert table.excluded == (0,)
    r = compute_utility(lex, PhonemeSubset((1,)))
    assert (r.unique_count, r.included_count, r.excluded_count) == (2, 2, 1)


def test_posterior_values(toy_lexicon):
    table = build_lookup(toy_lexicon, P01)
    assert query_posterior(table, (1, 1)).probabilities == {0: 1.0}
    assert query_posterior(table, (1, 2)).probabilities == {1: 0.5, 2: 0.5}
    unseen = query_posterior(table, (9, 9))
    assert unseen.unseen and unseen.probabilities == {}
    with pytest.raises(ValueError):
        query_posterior(table, (1,))


def test_toy_utility_one_third(toy_lexicon):
    r = compute_utility(toy_lexicon, P01)
    assert r.as_fraction() == Fraction(1, 3)
    assert r.utility == pytest.approx(1 / 3)


def test_pairwise_form_toy(toy_lexicon):
    # buckets of size 1 and 2 among 3 signs: (1*2 + 2*1) / 2
    assert pairwise_utility(toy_lexicon, P01) == pytest.approx(2.0)


def test_select_separating_type():
    lex = coded_lexicon([(0, 0, 0), (0, 1, 1), (0, 0, 2), (1, 1, 3)], (2, 2, 4))
    r = select_optimal_subset(lex, 1)
    assert r.subset.members == (2,)
    assert r.utility == 1.0
    singles = [oracle_unique_count(lex, (t,))[0] for t in range(3)]
    assert singles == [1, 0, 4]


def test_select_bounds():
    lex = coded_lexicon([(0, 0), (1, 1)], (2, 2))
    r = select_optimal_subset(lex, 0)
    assert r.subset == PhonemeSubset() and r.utility == 0.0
    with pytest.raises(ValueError):
        select_optimal_subset(lex, 3)
    with pytest.raises(ValueError):
        select_optimal_subset(lex, 1, method="anneal")


def test_tie_break_is_lexicographic():
    # every single type separates all signs equally well
    lex = coded_lexicon([(0, 0, 0), (1, 1, 1)], (2, 2, 2))
    assert select_optimal_subset(lex, 1).subset.members == (0,)
    assert select_optimal_subset(lex, 2).subset.members == (0, 1)
    assert select_optimal_subset(lex, 2, "greedy").subset.members == (0, 1)


def test_sweep_monotone_and_full():
    rng = np.random.default_rng(7)
    lex = random_lexicon(rng, n_signs=30, n_types=4)
    rows = utility_sweep(lex, [1, 2, 3, 4])
    utils = [r.utility for r in rows]
    assert utils == sorted(utils)
    assert rows[-1].unique_count == compute_utility(lex, lex.inventory.full_subset()).unique_count
    assert len(utility_sweep(lex, [0])) == 1


def test_oracle_equivalence_with_gaps():
    rng = np.random.default_rng(11)
    for _ in range(100):
        lex = random_lexicon(rng, missing_rate=0.2)
        k = len(lex.inventory)
        for n in range(k + 1):
            for combo in itertools.combinations(range(k), n):
                r = compute_utility(lex, PhonemeSubset(combo))
                assert (r.unique_count, r.included_count) == oracle_unique_count(lex, combo)


def test_wide_fallback_path():
    # radix product above 2**62 takes the row-wise unique path
    rng = np.random.default_rng(0)
    cards = [1000] * 8
    codes = rng.integers(0, 1000, size=(50, 8))
    codes[1] = codes[0]
    lex = coded_lexicon(codes, cards)
    r = compute_utility(lex, lex.inventory.full_subset())
    assert (r.unique_count, r.included_count) == oracle_unique_count(lex, range(8))


def test_exact_matches_oracle_and_beats_greedy():
    rng = np.random.default_rng(5)
    for _ in range(30):
        lex = random_lexicon(rng, max_signs=25, n_types=5)
        for n in range(6):
            exact = select_optimal_subset(lex, n, "exact")
            combo, util = oracle_best_subset(lex, n)
            assert exact.subset.members == combo
            assert exact.as_fraction() == util
            assert select_optimal_subset(lex, n, "greedy").as_fraction() <= exact.as_fraction()


def test_deterministic_selection():
    rng = np.random.default_rng(3)
    lex = random_lexicon(rng, max_signs=40, n_types=5)
    a = [select_optimal_subset(lex, n).subset for n in range(6)]
    b = [select_optimal_subset(lex, n).subset for n in range(6)]
    assert a == b


codes_strategy = st.integers(1, 5).flatmap(lambda k: st.tuples(
    st.just(k),
    st.lists(st.lists(st.integers(0, 3), min_size=k, max_size=k), min_size=2, max_size=15),
))


@given(codes_strategy, st.data())
@settings(max_examples=200, deadline=None)
def test_unique_count_monotone_under_superset(kc, data):
    k, rows = kc
    lex = coded_lexicon(rows, (4,) * k)
    big = data.draw(st.sets(st.integers(0, k - 1)))
    small = data.draw(st.sets(st.sampled_from(sorted(big)))) if big else set()
    a = compute_utility(lex, PhonemeSubset(tuple(small)))
    b = compute_utility(lex, PhonemeSubset(tuple(big)))
    assert a.unique_count <= b.unique_count
    assert a.utility <= b.utility


@given(codes_strategy, st.data())
@settings(max_examples=100, deadline=None)
def test_posterior_normalized(kc, data):
    k, rows = kc
    lex = coded_lexicon(rows, (4,) * k)
    subset = PhonemeSubset(tuple(data.draw(st.sets(st.integers(0, k - 1)))))
    table = build_lookup(lex, subset)
    assert sorted(g for b in table.buckets.values() for g in b) == list(range(len(rows)))
    for key in table.buckets:
        post = query_posterior(table, key)
        assert abs(sum(post.probabilities.values()) - 1.0) < 1e-12
