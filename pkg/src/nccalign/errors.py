"""Exception types shared across the toolkit."""


class PgmError(ValueError):
    """Malformed or unsupported PGM data; the message names the offending field."""


class UnalignableError(RuntimeError):
    """No valid disparity anywhere in the field, so alignment cannot proceed."""


class UndefinedMetricError(ValueError):
    """A metric whose definition degenerates on the given inputs (zero variance, zero baseline)."""
