class CubewrightError(Exception):
    """Base class for library errors."""


class AlgebraFormatError(CubewrightError):
    """An algebra document failed to parse or validate.

    ``location`` names where the problem is (``"line 3, column 5"``,
    ``"operations[1].table[7]"``) when that is known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ResourceLimitError(CubewrightError):
    """A closure grew past its configured cap."""

    def __init__(self, what, count, cap):
        self.what = what
        self.count = count
        self.cap = cap
        super().__init__(f"{what} limit exceeded: {count} > {cap}")


class InconsistencyError(CubewrightError):
    """Two computations that must agree did not. Always an implementation bug."""
