"""Exception hierarchy shared by every module of the toolkit."""


class RefkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(RefkitError, ValueError):
    pass


class DimensionMismatchError(RefkitError, ValueError):
    pass


class DegenerateInputError(RefkitError):
    """Raised when an image carries no usable gradient information."""


class NoValidPixelsError(RefkitError):
    pass


class NoValidViewError(RefkitError):
    pass


class PreconditionError(RefkitError):
    pass


class MalformedSceneError(RefkitError):
    pass


class SceneValidationError(RefkitError):
    pass


class ParseError(RefkitError, ValueError):
    pass
