"""Exception types shared across the package.

Two broad families matter to callers: `ValidationError` (bad input, CLI
exit code 1) and `BudgetExceeded` (refused work, CLI exit code 2).
"""


class BayesAgoraError(Exception):
    """Base class for all package errors."""


class ValidationError(BayesAgoraError, ValueError):
    """Input the caller can fix."""


class BudgetExceeded(BayesAgoraError):
    """Computation refused because it would exceed a configured budget."""


# -- signal models ------------------------------------------------------

class LengthMismatch(ValidationError):
    pass


class WeightNotPositive(ValidationError):
    pass


class WeightsDoNotSumToOne(ValidationError):
    pass


class DistributionsEqual(ValidationError):
    pass


class QOutOfRange(ValidationError):
    pass


class MTooSmall(ValidationError):
    pass


class UnknownSignal(ValidationError):
    pass


# -- graphs --------------------------------------------------------------

class UnknownVertex(ValidationError):
    pass


class NTooSmall(ValidationError):
    pass


class NotStronglyConnected(ValidationError):
    pass


class DisconnectedAfterRetries(BayesAgoraError):
    pass


class BadGraphFile(ValidationError):
    pass


# -- engines -------------------------------------------------------------

class StateBudgetExceeded(BudgetExceeded):
    pass


class BallBudgetExceeded(BudgetExceeded):
    pass


class TimeOutOfRange(ValidationError):
    pass


class FixpointNotReached(BayesAgoraError):
    pass


class HistoryNotRecorded(BayesAgoraError):
    """A run executed with keep_history=False cannot answer this query."""


# -- statistics ----------------------------------------------------------

class POutOfRange(ValidationError):
    pass


class InvalidConditional(ValidationError):
    pass


class VerticesTooClose(ValidationError):
    pass
