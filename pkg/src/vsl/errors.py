"""Exception types shared across the package.

The CLI maps ValidationError (and subclasses) to exit code 2 and every
other VslError to exit code 1.
"""


class VslError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(VslError):
    """Bad input data: malformed files, mismatched trial ids, bad flags."""

    def __init__(self, message: str, offenders: list[str] | None = None):
        self.offenders = offenders or []
        if self.offenders:
            shown = ", ".join(self.offenders[:20])
            more = "" if len(self.offenders) <= 20 else f" (+{len(self.offenders) - 20} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class InsufficientDataError(ValidationError):
    """Not enough admissible data points for a regression or fit."""

    def __init__(self, message: str):
        super().__init__(message)


class PlacementError(VslError):
    """Rejection sampling could not place an item within the attempt budget."""


class BracketError(VslError):
    """The criterion search bracket does not contain the maximum.

    This signals a bug in the rate formulas, not bad user input.
    """
