"""Exception hierarchy shared by all facegraph modules."""


class FaceGraphError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(FaceGraphError):
    """An argument violates a documented precondition (empty image, bad lengths, ...)."""


class InvalidConfig(FaceGraphError):
    """A configuration value is out of its legal range or inconsistent."""


class FormatMismatch(FaceGraphError):
    """An image was supplied in a pixel format the operation does not accept."""


class AlignmentError(FaceGraphError):
    """Paired inputs (e.g. training images and masks) do not line up."""


class OutOfBounds(FaceGraphError):
    """A pixel position lies outside the image it refers to."""


class DegenerateTemplate(FaceGraphError):
    """A matching template is constant and therefore unusable for correlation."""


class DegenerateJet(FaceGraphError):
    """A jet has no energy (all magnitudes zero), usually from a textureless patch."""


class SingularSystem(FaceGraphError):
    """The displacement-estimation system is numerically singular."""


class BankMismatch(FaceGraphError):
    """Jets or graphs built with incompatible filter-bank parameters were combined."""


class EmptyDataset(FaceGraphError):
    """A dataset root contains no usable persons or images."""


class DataError(FaceGraphError):
    """A data file (annotation, model file, image) is missing or malformed."""


class InternalError(FaceGraphError):
    """An invariant the pipeline guarantees was violated; indicates a bug."""
