"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` subclasses to exit code 1 and
``NumericalError`` to exit code 2.
"""


class MotionSigError(Exception):
    """Base class for all package errors."""


class ValidationError(MotionSigError, ValueError):
    """Input violates a documented contract."""


class ParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class DegenerateBoneError(ValidationError):
    def __init__(self, parent, child, frame=None):
        self.bone = (parent, child)
        self.frame = frame
        at = f" at frame {frame}" if frame is not None else ""
        super().__init__(f"zero-length bone ({parent}, {child}){at}")


class ShapeError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DatasetError(ValidationError):
    pass


class LoadError(ValidationError):
    """Corrupt, truncated or incompatible persisted file."""


class NumericalError(MotionSigError, RuntimeError):
    """Training diverged or produced non-finite values."""


class MetricError(ValidationError):
    """Metric cannot be computed from the given data (e.g. missing labels)."""
