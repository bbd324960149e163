"""Exception types shared across the toolkit."""


class AmbiError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(AmbiError, ValueError):
    pass


class MalformedSignalError(AmbiError, ValueError):
    """Channel layout does not describe a valid ambisonic signal."""


class UnsupportedConventionError(AmbiError, ValueError):
    pass


class UnsupportedFormatError(AmbiError, ValueError):
    pass


class IllConditionedLayoutError(AmbiError, ValueError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ParseError(AmbiError, ValueError):
    """Container could not be parsed; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
