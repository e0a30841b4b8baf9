class ExtractorError(Exception):
    """Base class for extraction failures."""


class ModelLoadError(ExtractorError):
    pass


class ImageDecodeError(ExtractorError):
    pass


class ShapeMismatch(ExtractorError):
    pass
