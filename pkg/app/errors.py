# app/errors.py
from typing import Any, Dict, Iterable, Optional, Tuple


class GoGePoError(Exception):
    """Base class for every error raised by the package"""


class ShapeError(GoGePoError, ValueError):
    """Shape mismatch inside a tape primitive"""

    def __init__(self, node: str, expected: Any, actual: Any):
        self.node = node
        self.expected = expected
        self.actual = actual
        super().__init__(f"{node}: expected shape {expected}, got {actual}")


class NonFiniteError(GoGePoError, ValueError):
    """NaN or inf where a finite value is required"""

    def __init__(self, what: str):
        self.what = what
        super().__init__(f"non-finite values in {what}")


class InvalidPermutationError(GoGePoError, ValueError):
    pass


class EmptyBufferError(GoGePoError, ValueError):
    pass


class EmptyBatchError(GoGePoError, ValueError):
    pass


class ConfigError(GoGePoError, ValueError):
    """Invalid run configuration"""


class ConfigFileNotFound(ConfigError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"config file not found: {path}")


class ConfigParseError(ConfigError):
    def __init__(self, path: str, line: int, text: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: cannot parse {text!r}")


class ConfigValidationError(ConfigError):
    def __init__(self, path: str, problems: Iterable[Tuple[str, str]]):
        self.path = path
        self.problems = list(problems)
        self.keys = [key for key, _ in self.problems]
        details = "; ".join(f"{key}: {msg}" for key, msg in self.problems)
        super().__init__(f"{path}: {details}")


class CheckpointError(GoGePoError):
    pass


class CheckpointVersionError(CheckpointError):
    def __init__(self, path: str, found: Any, expected: int):
        self.found = found
        super().__init__(f"{path}: checkpoint version {found!r} is not supported (expected {expected})")


class TrainingDivergedError(GoGePoError):
    """A loss became non-finite; the run is aborted instead of clipped"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.message = message
        self.diagnostics = diagnostics or {}
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({details})" if details else message)


class UnboundInputError(GoGePoError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"tape leaf {name!r} is not bound")
