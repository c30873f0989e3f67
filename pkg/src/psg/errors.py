"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError (and subclasses) -> 2,
NetworkError -> 3.
"""


class PsgError(Exception):
    pass


class DataError(PsgError):
    """Invalid, malformed, or inconsistent dataset content."""


class ExtractionError(DataError):
    """Problem-statement region missing or empty in a fetched page."""


class NetworkError(PsgError):
    """Remote request failed after retries."""


class RateLimitError(NetworkError):
    """Provider kept answering 429 after all retries."""


class TrainingDivergedError(PsgError):
    """Non-finite loss encountered; message carries epoch and batch."""
