"""Exception hierarchy shared by the library and the command-line front end."""


class MvDenoiseError(Exception):
    """Base class for every error raised deliberately by this package."""


class DataError(MvDenoiseError, ValueError):
    """Malformed input data: bad shapes, non-finite values, unreadable files."""


class NumericalError(MvDenoiseError, ArithmeticError):
    """A numerical step could not be completed (e.g. an unrepairable matrix)."""
