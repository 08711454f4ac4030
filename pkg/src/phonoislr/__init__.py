"""Phonology-aware isolated sign recognition on pose sequences."""

from .errors import DataError, MissingPhonemeError, NumericalError
from .inventory import MISSING, PhonemeInventory, PhonemeSubset, PhonemeType, load_inventory
from .lexicon import Lexicon, Sign, load_lexicon
from .utility import compute_utility, select_optimal_subset

__version__ = "0.1.0"

__all__ = [
    "DataError", "MissingPhonemeError", "NumericalError", "MISSING", "PhonemeInventory", "PhonemeSubset",
    "PhonemeType", "load_inventory", "Lexicon", "Sign", "load_lexicon", "compute_utility",
    "select_optimal_subset",
]
