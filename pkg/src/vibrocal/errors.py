"""Exception types shared across the package."""


class VibrocalError(ValueError):
    """Domain error: invalid signal, model, configuration, or file content."""


class FitError(VibrocalError):
    """Transfer-function fitting failed (underdetermined or singular system)."""


class MapFormatError(VibrocalError):
    """A device map file is malformed or has an unsupported format version."""
