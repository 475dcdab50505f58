"""Exception hierarchy for amrc."""
import typing


class AMRCError(Exception):
    pass


class InputError(AMRCError, ValueError):
    pass


class ConfigError(InputError):
    pass


class IngestionError(InputError):
    """Raised for a malformed data file. ``row`` is the 0-based data row."""

    def __init__(self, message: str, row: typing.Optional[int] = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class StateError(AMRCError):
    pass


class DegenerateVarianceError(AMRCError, ArithmeticError):
    pass


class InternalError(AMRCError):
    pass


class UnsupportedError(AMRCError):
    pass


class StepError(AMRCError):
    """Raised when an online step fails. ``t`` is the 1-based step index."""

    def __init__(self, t: int, cause: BaseException) -> None:
        self.t = t
        self.cause = cause
        super().__init__(f"step {t} failed: {cause}")
