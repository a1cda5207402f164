"""Exception hierarchy.

Everything raised on purpose derives from Pixel2CancerError so callers (and
the CLI) can catch one base class and map subtypes to exit codes.
"""


class Pixel2CancerError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(Pixel2CancerError):
    """Volume dimensions or spacing disagree between pipeline inputs."""


class ValidationError(Pixel2CancerError):
    """A parameter or file field is out of its documented range."""


class CorruptFileError(Pixel2CancerError):
    """A volume file is truncated or internally inconsistent."""


class UnsupportedFormatError(Pixel2CancerError):
    """A file is recognized but uses a feature this reader does not support."""


class EmptyOrganError(Pixel2CancerError):
    """The quantified organ has no simulable voxels to seed."""


class EmptyTumorError(Pixel2CancerError):
    """An operation that needs a non-empty tumor got an all-healthy grid."""


class DeterminismError(Pixel2CancerError):
    """Two runs that must be bit-identical produced different results."""
