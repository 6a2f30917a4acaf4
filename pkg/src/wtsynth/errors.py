"""Exception types shared across the package."""


class SynthError(Exception):
    """Base class for errors raised by this package."""


class FormatError(SynthError):
    """A file does not match the expected on-disk layout."""


class UnsupportedFormatError(FormatError):
    """The file is recognizable but uses a codec or layout we do not handle."""


class DivergenceError(SynthError):
    """An optimization run produced non-finite values and was aborted."""

    def __init__(self, iteration, block, message=None):
        self.iteration = iteration
        self.block = block
        if message is None:
            message = (
                f"non-finite values in {block} at iteration {iteration}; "
                "try a lower learning rate"
            )
        super().__init__(message)
