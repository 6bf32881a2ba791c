"""Exception types shared across the package."""


class GramError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GramError, ValueError):
    """An argument is outside the operation's valid domain."""


class ShapeError(GramError, ValueError):
    """Matrix dimensions do not line up."""


class FormatError(GramError, ValueError):
    """A dataset directory or file does not follow the expected layout."""


class ParseError(FormatError):
    """A token inside a dataset file could not be parsed."""

    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class IntegrityError(FormatError):
    """Dataset files are individually well-formed but mutually inconsistent."""


class NumericError(GramError, ArithmeticError):
    """A computation produced a non-finite value."""

    def __init__(self, message: str, *, layer: int | None = None, epoch: int | None = None):
        detail = message
        if layer is not None:
            detail += f" (layer {layer})"
        if epoch is not None:
            detail += f" (epoch {epoch})"
        super().__init__(detail)
        self.layer = layer
        self.epoch = epoch


class TapeStateError(GramError, RuntimeError):
    """A tape was used in a way its lifecycle does not allow (e.g. backward twice)."""
