"""Exception hierarchy shared across the toolkit.

Every domain failure derives from :class:`VeriframeError` so the CLI can map
it to exit code 1 while genuine bugs still surface as ordinary tracebacks.
"""


class VeriframeError(Exception):
    """Base class for all expected, user-facing failures."""


class ManifestError(VeriframeError):
    """Manifest file missing, malformed, or violating its invariants."""


class MediaError(VeriframeError):
    """Image or video payload that cannot be decoded."""


class DetectorError(VeriframeError):
    """A face-detection backend failed; the backend name is in the message."""


class RegistryError(VeriframeError):
    """Lookup of an unregistered backbone or detector name."""


class DataPipeError(VeriframeError):
    """Empty split or otherwise unusable index rows."""


class ArtifactError(VeriframeError):
    """Model artifact missing pieces, failing its checksum, or unsupported."""


class DivergenceError(VeriframeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
