"""Exception types for the bridge."""


class BridgeError(Exception):
    """Base class for bridge failures."""


class MissingInputError(BridgeError):
    """An input file, prompt fixture, or credential is absent."""


class SchemaError(BridgeError):
    """An input record does not match the expected shape."""


class CheckpointError(BridgeError):
    """A scorer checkpoint could not be loaded.  Fatal."""


class InferenceError(BridgeError):
    """Scoring failed for one article.  The article is skipped."""


class AuthError(BridgeError):
    """The labelling endpoint rejected the credentials.  Fatal."""


class RateLimitError(BridgeError):
    """The labelling endpoint asked us to slow down.  Retried with backoff."""


class TransportError(BridgeError):
    """A labelling call failed in a retryable way (timeouts, 5xx, ...)."""


class LabelParseError(BridgeError):
    """An endpoint reply was not one bare float in [-1, 1].  Retried."""
