"""Exception hierarchy shared across the toolkit.

The CLI maps these onto its stable exit codes: missing input -> 2,
data quality -> 3, missing upstream artifact -> 4, total failure -> 5.
"""


class BondlabError(Exception):
    """Base class for all toolkit errors."""


class MissingInputError(BondlabError):
    """A configured input file or directory does not exist / is unreadable."""


class DataQualityError(BondlabError):
    """Input exists but violates quality rules (too many malformed rows, ...).

    ``details`` optionally carries per-row diagnostics, e.g. a list of
    ``(line_number, reason)`` pairs.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or []


class SchemaError(BondlabError):
    """A record violates the wire-format contract (bad field, bad invariant)."""


class InsufficientDataError(BondlabError):
    """Not enough observations for the requested computation."""


class DegenerateSeriesError(BondlabError):
    """A series has zero variance where variance is required."""


class NumericError(BondlabError):
    """A non-finite value appeared where finite math was required."""


class StaleCacheError(BondlabError):
    """A forward-pass cache no longer matches the parameters it was built from."""


class MissingUpstreamError(BondlabError):
    """A pipeline command needs an artifact that an earlier command produces."""


class TotalFailureError(BondlabError):
    """Every unit of work in a command failed."""
