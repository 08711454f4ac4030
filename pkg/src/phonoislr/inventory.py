"""Phoneme types, their value vocabularies, and phoneme-type subsets.

The inventory is induced from a lexicon table rather than hard-coded: each
non-gloss column becomes one phoneme type, and the distinct non-missing cell
values of that column become its value vocabulary.  Value ids follow the
lexicographic order of the value names so that two loads of the same data
agree regardless of row order.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import DataError

#: Integer encoding of an absent phoneme label.
MISSING = -1
#: Cell spelling of an absent label in tabular and JSON files.
MISSING_TOKEN = "-1"

# ASL-LEX 2.0 reference sizes, only checked on request.
ASLLEX_TYPE_COUNT = 16
ASLLEX_CARDINALITIES = {"Minor Location": 37, "Dominant Handshape": 49, "Path Movement": 8}
ASLLEX_MAX_TOTAL_VALUES = 200
ASLLEX_NAME_VARIANTS = {"Thumb Contact": "Thumb Position", "Handshape": "Dominant Handshape"}


def is_missing_cell(cell: str) -> bool:
    cell = cell.strip()
    return cell == MISSING_TOKEN or cell == ""


@dataclass(frozen=True)
class PhonemeType:
    id: int
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise DataError(f"phoneme type {self.name!r} has fewer than 2 distinct values")
        if len(set(self.values)) != len(self.values):
            raise DataError(f"phoneme type {self.name!r} has duplicate value names")

    @property
    def cardinality(self) -> int:
        return len(self.values)

    @functools.cached_property
    def value_ids(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.values)}

    def encode(self, cell: str) -> int:
        """Map a cell spelling to its value id (``MISSING`` for the missing marker)."""
        if is_missing_cell(cell):
            return MISSING
        try:
            return self.value_ids[cell.strip()]
        except KeyError:
            raise DataError(f"unknown value {cell!r} for phoneme type {self.name!r}") from None

    def decode(self, value_id: int) -> str:
        if value_id == MISSING:
            return MISSING_TOKEN
        return self.values[value_id]


@dataclass(frozen=True, order=True)
class PhonemeSubset:
    """An ordered set of phoneme-type ids, always sorted ascending."""

    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if len(set(members)) != len(members):
            raise ValueError(f"duplicate phoneme types in subset {members}")
        if any(m < 0 for m in members):
            raise ValueError(f"negative phoneme type id in subset {members}")
        object.__setattr__(self, "members", tuple(sorted(members)))

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, type_id) -> bool:
        return type_id in self.members

    def union(self, other: Iterable[int]) -> "PhonemeSubset":
        return PhonemeSubset(tuple(set(self.members) | set(other)))

    def names(self, inventory: "PhonemeInventory") -> list[str]:
        return [inventory.types[m].name for m in self.members]


@dataclass(frozen=True)
class PhonemeInventory:
    types: tuple[PhonemeType, ...]
    _by_name: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [t.name for t in self.types]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate phoneme type names: {names}")
        if [t.id for t in self.types] != list(range(len(self.types))):
            raise DataError("phoneme type ids must be the contiguous range 0..K-1")
        object.__setattr__(self, "_by_name", {t.name: t for t in self.types})

    def __len__(self) -> int:
        return len(self.types)

    def __getitem__(self, type_id: int) -> PhonemeType:
        return self.types[type_id]

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.types]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(t.cardinality for t in self.types)

    @property
    def total_values(self) -> int:
        return sum(self.cardinalities)

    def type_id(self, name: str) -> int:
        try:
            return self._by_name[name].id
        except KeyError:
            pass
        canonical = ASLLEX_NAME_VARIANTS.get(name)
        if canonical in self._by_name:
            return self._by_name[canonical].id
        for t in self.types:
            if t.name.casefold() == name.strip().casefold():
                return t.id
        raise KeyError(f"unknown phoneme type {name!r}; known: {self.names}")

    def subset(self, names_or_ids: Iterable) -> PhonemeSubset:
        ids = [m if isinstance(m, int) else self.type_id(m) for m in names_or_ids]
        for m in ids:
            if not 0 <= m < len(self.types):
                raise ValueError(f"phoneme type id {m} out of range")
        return PhonemeSubset(tuple(ids))

    def full_subset(self) -> PhonemeSubset:
        return PhonemeSubset(tuple(range(len(self.types))))

    def to_dict(self) -> dict:
        return {"types": [{"id": t.id, "name": t.name, "values": list(t.values)} for t in self.types]}

    @classmethod
    def from_dict(cls, data: dict) -> "PhonemeInventory":
        return cls(tuple(PhonemeType(int(t["id"]), t["name"], tuple(t["values"])) for t in data["types"]))

    def check_asllex(self) -> None:
        """Raise :class:`DataError` unless this looks like the ASL-LEX 2.0 inventory."""
        problems = []
        if len(self.types) != ASLLEX_TYPE_COUNT:
            problems.append(f"expected {ASLLEX_TYPE_COUNT} phoneme types, found {len(self.types)}")
        for name, card in ASLLEX_CARDINALITIES.items():
            try:
                found = self.types[self.type_id(name)].cardinality
            except KeyError:
                problems.append(f"missing phoneme type {name!r}")
                continue
            if found != card:
                problems.append(f"{name}: expected {card} values, found {found}")
        if self.total_values >= ASLLEX_MAX_TOTAL_VALUES:
            problems.append(f"{self.total_values} values in total, expected fewer than {ASLLEX_MAX_TOTAL_VALUES}")
        if problems:
            raise DataError("inventory does not match ASL-LEX 2.0: " + "; ".join(problems))


def inventory_from_table(header: Sequence[str], rows: Sequence[Sequence[str]], gloss_column: int = 0) -> PhonemeInventory:
    """Induce an inventory from a lexicon table.

    Every column except ``gloss_column`` is a phoneme type.  Its values are the
    distinct non-missing cells, sorted lexicographically.

    Raises:
        DataError: on an empty table, duplicate column names, no phoneme
            columns, or a column with fewer than two distinct values.
    """
    header = [h.strip() for h in header]
    if not header or not rows:
        raise DataError("lexicon table is empty")
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate column names: {dupes}")
    phoneme_cols = [i for i in range(len(header)) if i != gloss_column]
    if not phoneme_cols:
        raise DataError("lexicon table has no phoneme-type columns")
    types = []
    for type_id, col in enumerate(phoneme_cols):
        distinct = {row[col].strip() for row in rows if not is_missing_cell(row[col])}
        if len(distinct) < 2:
            raise DataError(f"column {header[col]!r} has {len(distinct)} distinct value(s); at least 2 required")
        types.append(PhonemeType(type_id, header[col], tuple(sorted(distinct))))
    return PhonemeInventory(tuple(types))


def load_inventory(path, delimiter: str | None = None) -> PhonemeInventory:
    """Read a lexicon file and return only its induced inventory."""
    from .lexicon import read_table

    header, rows = read_table(path, delimiter)
    return inventory_from_table(header, rows)


def all_subsets_of_size(inventory: PhonemeInventory | int, n: int) -> list[PhonemeSubset]:
    """All size-``n`` subsets of the inventory's types, in lexicographic order."""
    k = inventory if isinstance(inventory, int) else len(inventory)
    if not 0 <= n <= k:
        raise ValueError(f"subset size {n} outside [0, {k}]")
    return [PhonemeSubset(c) for c in itertools.combinations(range(k), n)]
