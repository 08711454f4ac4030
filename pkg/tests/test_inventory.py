import math
import json

import pytest
from hypothesis import given, settings, strategies as st

from phonoislr.errors import DataError
from phonoislr.inventory import (MISSING, PhonemeInventory, PhonemeSubset, PhonemeType, all_subsets_of_size,
                                 inventory_from_table, load_inventory)
from phonoislr.synth import GeneratorConfig, generate_synthetic, value_names
from phonoislr.lexicon import write_lexicon


def test_smallest_inventory():
    inv = inventory_from_table(["gloss", "t1"], [["A", "b"], ["B", "a"]])
    assert len(inv) == 1
    assert inv[0].cardinality == 2
    assert inv[0].value_ids == {"a": 0, "b": 1}


def test_value_ids_ignore_row_order():
    rows = [["A", "z", "1"], ["B", "m", "2"], ["C", "a", "-1"]]
    a = inventory_from_table(["gloss", "x", "y"], rows)
    b = inventory_from_table(["gloss", "x", "y"], rows[::-1])
    assert a == b
    assert a[0].values == ("a", "m", "z")
    assert a[1].encode("-1") == MISSING
    assert a[1].encode("") == MISSING


@pytest.mark.parametrize("header,rows", [
    (["gloss", "t", "t"], [["A", "a", "b"], ["B", "b", "a"]]),
    (["gloss", "t"], [["A", "a"], ["B", "a"]]),
    (["gloss", "t"], []),
    (["gloss"], [["A"], ["B"]]),
])
def test_rejects_bad_tables(header, rows):
    with pytest.raises(DataError):
        inventory_from_table(header, rows)


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(DataError):
        load_inventory(p)


def test_invariants_enforced():
    with pytest.raises(DataError):
        PhonemeType(0, "t", ("a",))
    t = PhonemeType(0, "t", ("a", "b"))
    with pytest.raises(DataError):
        PhonemeInventory((t, PhonemeType(1, "t", ("a", "b"))))
    with pytest.raises(DataError):
        PhonemeInventory((PhonemeType(1, "t", ("a", "b")),))


def test_subset_is_sorted_and_unique():
    assert PhonemeSubset((3, 0, 2)).members == (0, 2, 3)
    assert list(PhonemeSubset((2, 1))) == [1, 2]
    with pytest.raises(ValueError):
        PhonemeSubset((1, 1))


def test_name_variants_resolve():
    types = (PhonemeType(0, "Dominant Handshape", ("a", "b")), PhonemeType(1, "Thumb Position", ("a", "b")))
    inv = PhonemeInventory(types)
    assert inv.type_id("Handshape") == 0
    assert inv.type_id("Thumb Contact") == 1
    assert inv.type_id("thumb position") == 1
    with pytest.raises(KeyError):
        inv.type_id("Spread")


def test_asllex_check():
    small = PhonemeInventory((PhonemeType(0, "t", ("a", "b")),))
    with pytest.raises(DataError):
        small.check_asllex()
    names = ["Dominant Handshape", "Nondominant Handshape", "Second Handshape", "Major Location", "Minor Location",
             "Second Minor Location", "Path Movement", "Repeated Movement", "Wrist Twist", "Contact", "Flexion",
             "Selected Fingers", "Sign Type", "Spread", "Spread Change", "Thumb Position"]
    cards = {"Minor Location": 37, "Dominant Handshape": 49, "Path Movement": 8}
    types = tuple(PhonemeType(i, n, value_names(cards.get(n, 4))) for i, n in enumerate(names))
    PhonemeInventory(types).check_asllex()


def test_round_trip_through_dict_and_file(tmp_path):
    lex, _, _ = generate_synthetic(GeneratorConfig(glosses=12, videos_per_gloss=3, frames=4))
    inv = lex.inventory
    assert PhonemeInventory.from_dict(json.loads(json.dumps(inv.to_dict()))) == inv
    write_lexicon(lex, tmp_path / "lex.csv")
    again = load_inventory(tmp_path / "lex.csv")
    assert again == inv
    assert again.cardinalities == (5, 7, 4)
    assert load_inventory(tmp_path / "lex.csv") == again


def test_subset_counts_small_cases():
    assert len(all_subsets_of_size(16, 2)) == 120
    assert all_subsets_of_size(5, 0) == [PhonemeSubset()]
    assert len(all_subsets_of_size(16, 8)) == math.comb(16, 8) == 12870
    with pytest.raises(ValueError):
        all_subsets_of_size(3, 4)
    with pytest.raises(ValueError):
        all_subsets_of_size(3, -1)


@given(st.integers(0, 16).flatmap(lambda k: st.tuples(st.just(k), st.integers(0, k))))
@settings(max_examples=60, deadline=None)
def test_subset_enumeration_matches_binomial(kn):
    k, n = kn
    subsets = all_subsets_of_size(k, n)
    assert len(subsets) == math.comb(k, n)
    keys = [s.members for s in subsets]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)
    assert all(list(s.members) == sorted(s.members) and len(s) == n for s in subsets)
