"""Exception types shared across the toolkit."""


class IllumchartError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(IllumchartError, ValueError):
    """An input violates an operation's preconditions."""


class PlacementError(IllumchartError):
    """A checker placement rectangle falls outside the image."""


class SamplingError(IllumchartError):
    """A patch sample region degenerated to zero pixels."""


class EstimationFailedError(IllumchartError):
    """No usable signal was left to estimate an illuminant from."""


class DataError(IllumchartError):
    """A manifest, config, or image file is malformed or missing."""


class ProtocolError(IllumchartError):
    """The backend violated the wire protocol (version, id echo, dims)."""


class DecodeError(ProtocolError):
    """A payload could not be decoded: malformed JSON, base64, PNG, or dims."""


class TransportError(IllumchartError):
    """Transport-level failure (timeout, broken pipe, refused). Retriable."""


class BackendFailure(IllumchartError):
    """The backend returned an error envelope."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class UsageError(IllumchartError):
    """Bad command-line arguments or config keys."""
