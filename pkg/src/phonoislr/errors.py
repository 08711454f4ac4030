"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class MissingPhonemeError(DataError):
    """A sign has no value for a phoneme type that was asked for."""


class NumericalError(RuntimeError):
    """Divergence during training or a failed gradient check."""
