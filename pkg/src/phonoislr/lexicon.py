"""Sign vocabulary with per-sign phoneme-value tuples, read from ASL-LEX-style tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, MissingPhonemeError
from .inventory import MISSING, PhonemeInventory, PhonemeSubset, inventory_from_table


def normalize_gloss(gloss: str) -> str:
    """Matching key for a gloss: trimmed and case-folded."""
    return gloss.strip().casefold()


@dataclass(frozen=True)
class Sign:
    gloss: str
    gloss_id: int
    phonemes: tuple[int, ...]

    def restrict(self, subset: PhonemeSubset) -> tuple[int, ...]:
        return restrict_tuple(self, subset)


@dataclass(frozen=True)
class Lexicon:
    inventory: PhonemeInventory
    signs: tuple[Sign, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, sign in enumerate(self.signs):
            if sign.gloss_id != i:
                raise DataError(f"gloss_id {sign.gloss_id} of {sign.gloss!r} does not match row {i}")
            if not sign.gloss.strip():
                raise DataError(f"empty gloss at row {i}")
            if len(sign.phonemes) != len(self.inventory):
                raise DataError(f"sign {sign.gloss!r} has {len(sign.phonemes)} phoneme slots, expected {len(self.inventory)}")
            key = normalize_gloss(sign.gloss)
            if key in index:
                raise DataError(f"duplicate gloss {sign.gloss!r} (rows {index[key]} and {i})")
            index[key] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.signs)

    def __contains__(self, gloss: str) -> bool:
        return normalize_gloss(gloss) in self._index

    def lookup(self, gloss: str) -> Sign | None:
        i = self._index.get(normalize_gloss(gloss))
        return None if i is None else self.signs[i]

    @property
    def glosses(self) -> list[str]:
        return [s.gloss for s in self.signs]

    def code_matrix(self):
        """Signs × types integer array of value ids (``MISSING`` = -1)."""
        return np.array([s.phonemes for s in self.signs], dtype=np.int64).reshape(len(self.signs), len(self.inventory))

    def stats(self) -> dict:
        n = len(self.signs)
        columns = []
        for t in self.inventory.types:
            missing = sum(1 for s in self.signs if s.phonemes[t.id] == MISSING)
            columns.append({"name": t.name, "cardinality": t.cardinality, "missing_rate": missing / n if n else 0.0})
        return {"signs": n, "types": columns}


def restrict_tuple(sign: Sign, subset: PhonemeSubset) -> tuple[int, ...]:
    """Project a sign's phoneme tuple onto ``subset`` (ascending type id order).

    Raises:
        MissingPhonemeError: if the sign has no value for a member of the subset.
    """
    out = tuple(sign.phonemes[m] for m in subset)
    if MISSING in out:
        missing = [m for m, v in zip(subset, out) if v == MISSING]
        raise MissingPhonemeError(f"sign {sign.gloss!r} has no value for phoneme type(s) {missing}")
    return out


def sniff_delimiter(header_line: str) -> str:
    return "\t" if header_line.count("\t") > header_line.count(",") else ","


def read_table(path, delimiter: str | None = None) -> tuple[list[str], list[list[str]]]:
    """Read a delimiter-separated file with a header row.

    The delimiter is tab or comma, picked from whichever occurs more often in
    the header unless given explicitly.  Blank lines are skipped.
    """
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot read lexicon file {path}: {exc}") from exc
    return parse_table(text, delimiter)


def parse_table(text: str, delimiter: str | None = None) -> tuple[list[str], list[list[str]]]:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError("lexicon file is empty")
    if delimiter is None:
        delimiter = sniff_delimiter(lines[0])
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = next(reader)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: {len(row)} fields, header has {len(header)}")
        rows.append(row)
    return header, rows


def lexicon_from_table(header: Sequence[str], rows: Sequence[Sequence[str]], gloss_column: int = 0) -> Lexicon:
    inventory = inventory_from_table(header, rows, gloss_column)
    phoneme_cols = [i for i in range(len(header)) if i != gloss_column]
    signs = []
    for i, row in enumerate(rows):
        phonemes = tuple(inventory[t].encode(row[col]) for t, col in enumerate(phoneme_cols))
        signs.append(Sign(row[gloss_column].strip(), i, phonemes))
    return Lexicon(inventory, tuple(signs))


def select_columns(header, rows, gloss_column: str | None, phoneme_columns: Sequence[str] | None):
    """Reorder a wide table to ``gloss, phoneme...`` keeping only the named columns."""
    if gloss_column is None and phoneme_columns is None:
        return header, rows
    header = [h.strip() for h in header]
    gloss_col = header.index(gloss_column) if gloss_column is not None else 0
    if phoneme_columns is None:
        cols = [i for i in range(len(header)) if i != gloss_col]
    else:
        missing = [c for c in phoneme_columns if c not in header]
        if missing:
            raise DataError(f"columns not found in lexicon header: {missing}")
        cols = [header.index(c) for c in phoneme_columns]
    keep = [gloss_col] + cols
    return [header[i] for i in keep], [[row[i] for i in keep] for row in rows]


def load_lexicon(path, delimiter: str | None = None, gloss_column: str | None = None,
                 phoneme_columns: Sequence[str] | None = None) -> Lexicon:
    """Load a lexicon file.

    The default layout is ``gloss,<type1>,...,<typeK>`` with ``-1`` (or an
    empty cell) for a missing value.  Wider exports can be narrowed with
    ``gloss_column`` and ``phoneme_columns``.  Gloss ids follow row order.
    """
    header, rows = read_table(path, delimiter)
    header, rows = select_columns(header, rows, gloss_column, phoneme_columns)
    return lexicon_from_table(header, rows)


def write_lexicon(lexicon: Lexicon, path, gloss_header: str = "gloss") -> None:
    inv = lexicon.inventory
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([gloss_header] + inv.names)
        for sign in lexicon.signs:
            writer.writerow([sign.gloss] + [inv[t].decode(v) for t, v in enumerate(sign.phonemes)])
