"""Exception taxonomy shared across the package.

Domain errors all derive from :class:`TriageError` so callers (CLI, service)
can map them to exit codes / HTTP statuses in one place.
"""


class TriageError(Exception):
    """Base class for all domain errors raised by this package."""


class UnsupportedFormat(TriageError):
    """Image payload whose magic bytes are neither PNG nor JPEG."""


class CorruptImage(TriageError):
    """Image payload recognized but undecodable."""


class NoLungFound(TriageError):
    """Segmentation found no interior dark component of plausible lung size."""


class EmptyLungMask(TriageError):
    """A lung mask with zero area where a positive area is required."""


class DetectorUnavailable(TriageError):
    """An external detector adapter could not supply detections."""


class SchemaViolation(TriageError):
    """A structured payload (detection sidecar, labels file) that does not
    conform to its schema."""


class QuotaMismatch(TriageError):
    """Split quotas inconsistent with the per-class item counts."""


class EmptyDataset(TriageError):
    """A dataset operation invoked on zero items."""


class MissingPrediction(TriageError):
    """A labeled item without a predicted class where one is required."""


class InvalidProportion(TriageError):
    """A proportion outside [0, 1]."""


class ZeroSampleSize(TriageError):
    """A sample size below 1 where at least one observation is required."""


class EmptyInput(TriageError):
    """A summary operation invoked on an empty collection."""


class UnknownKey(TriageError):
    """A storage key that does not exist."""


class InvalidToken(TriageError):
    """An auth token that fails structural or signature checks."""


class ExpiredToken(InvalidToken):
    """An auth token past its expiry."""


class InvalidCredentials(TriageError):
    """Login rejected; deliberately identical for unknown email and wrong
    password."""


class AccountLocked(TriageError):
    """Login rejected because the account accrued too many failures."""


class ValidationFailed(TriageError):
    """A request body missing or malforming required fields."""


class PatientNotFound(TriageError):
    """No such patient visible in the caller's scope."""


class ScanNotFound(TriageError):
    """No such scan visible in the caller's scope."""


class PayloadTooLarge(TriageError):
    """An upload exceeding the configured byte limit."""
