"""Exception types raised across the package."""


class LayoutForgeError(ValueError):
    """Base class for all package errors."""


class SchemaError(LayoutForgeError):
    """A record field is missing or has the wrong type.

    ``path`` is a dotted/indexed location such as ``objects[2].status``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class VocabError(LayoutForgeError):
    """A categorical field holds a value outside its closed vocabulary."""

    def __init__(self, path: str, value, allowed):
        self.path = path
        self.value = value
        self.allowed = tuple(allowed)
        super().__init__(f"{path}: {value!r} not in {sorted(self.allowed)}")


class RefError(LayoutForgeError):
    """An object id is referenced but not defined."""

    def __init__(self, path: str, ref: str):
        self.path = path
        self.ref = ref
        super().__init__(f"{path}: unknown object id {ref!r}")


class CoverageError(LayoutForgeError):
    """A layout does not cover exactly the expected set of object ids."""

    def __init__(self, missing=(), extra=(), context: str = ""):
        self.missing = list(missing)
        self.extra = list(extra)
        msg = f"missing={self.missing} extra={self.extra}"
        super().__init__(f"{context}: {msg}" if context else msg)


class BoxRangeError(LayoutForgeError):
    """A bounding box component is outside [0, 1] or a visible box is empty."""


class EmptyInput(LayoutForgeError):
    """A frame sequence has no frames."""


class InsufficientFrames(LayoutForgeError):
    """A metric needs more sampled frames than are available."""


class DimensionMismatch(LayoutForgeError):
    """Two frames that must share a shape do not."""
