"""Exception types shared across the package."""


class HazardNetError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HazardNetError):
    """Tensor or parameter shapes do not line up."""


class ConfigError(HazardNetError):
    """Network configuration cannot produce a valid layer chain."""


class LabelError(HazardNetError):
    """Unknown class label or out-of-range class index."""


class DataError(HazardNetError):
    """Dataset is empty, degenerate, or otherwise unusable."""


class DecodeError(HazardNetError):
    """Image byte stream is malformed or uses an unsupported encoding."""
