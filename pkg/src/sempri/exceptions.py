"""Exception hierarchy shared by all sempri modules."""


class SempriError(Exception):
    """Base class for every error raised by this package."""


class DataError(SempriError, ValueError):
    """Input data is missing, malformed or inconsistent."""


class CorruptFileError(DataError):
    """A file exists but its header or payload cannot be decoded."""


class UnsupportedFormatError(DataError):
    """A raster uses a mode or bit depth the loaders do not accept."""


class InvariantError(SempriError, AssertionError):
    """An internal consistency check failed."""
