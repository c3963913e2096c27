"""Exception hierarchy shared by the library, the CLI and the HTTP service."""


class SwipecfError(Exception):
    """Base class for all errors raised by swipecf."""

    kind = "error"


class ValidationError(SwipecfError, ValueError):
    """An event, record or config failed validation."""

    kind = "validation"

    def __init__(self, message: str, event_id: str | None = None):
        if event_id is not None:
            message = f"{message} (event_id={event_id!r})"
        super().__init__(message)
        self.event_id = event_id


class CorruptLineError(ValidationError):
    kind = "corrupt_line"

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownUserError(SwipecfError, LookupError):
    kind = "unknown_user"

    def __init__(self, user_id: str):
        super().__init__(f"unknown user {user_id!r}")
        self.user_id = user_id


class StoreMissingError(SwipecfError):
    kind = "missing_store"


class StorageError(SwipecfError):
    """I/O failure in the event store. Safe to retry, unlike ValidationError."""

    kind = "storage"
    retriable = True
