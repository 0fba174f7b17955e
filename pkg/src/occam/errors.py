"""Exception hierarchy shared across the pipeline.

Exit-code mapping used by the CLI: ConfigError -> 2, ProviderError -> 3,
DataError -> 4.
"""


class OccamError(Exception):
    pass


class ConfigError(OccamError):
    """Invalid configuration, profiles, or command-line values."""


class DataError(OccamError):
    """Unreadable or malformed dataset files, images, or annotations."""


class ProviderError(OccamError):
    """Failure of a segmentation provider or embedder backend."""


class RetryableProviderError(ProviderError):
    """Transient transport failure; the call may be retried."""


class ProtocolError(ProviderError):
    """Malformed payload from a provider or embedder; not retryable."""
