"""Exception hierarchy. Every error carries a stable short code the CLI
maps to an exit status."""

from __future__ import annotations


class LayerpmError(Exception):
    """Base class; `code` is machine-readable, `args[0]` is the message."""

    code = "E_INTERNAL"

    def __init__(self, message: str):
        super().__init__(message)

    def __str__(self) -> str:
        return self.args[0]


class UnknownPackageError(LayerpmError):
    code = "E_UNKNOWN_PKG"


class NotEnabledError(LayerpmError):
    code = "E_NOT_ENABLED"


class CycleError(LayerpmError):
    code = "E_CYCLE"


class DisabledRequiredError(LayerpmError):
    """A disabled package occurs in the enabled closure. The offending
    dependency path is kept for the message."""

    code = "E_DISABLED_REQUIRED"

    def __init__(self, message: str, path: tuple[str, ...] = ()):
        super().__init__(message)
        self.path = path


class MissingExternalError(LayerpmError):
    """Some external resolved to `missing`. The full resolution report is
    attached so callers can still inspect what was computed."""

    code = "E_MISSING_EXTERNAL"

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class LockConflictError(LayerpmError):
    code = "E_LOCK_CONFLICT"


class ProbeError(LayerpmError):
    code = "E_PROBE"


class StateCorruptError(LayerpmError):
    code = "E_STATE_CORRUPT"


class StateLockedError(LayerpmError):
    code = "E_STATE_LOCKED"
