"""Exception types shared across the package."""


class PoolTestError(Exception):
    """Base class for all package errors."""


class InvalidStrategy(PoolTestError):
    """A strategy id or construction request is malformed."""


class DomainError(PoolTestError):
    """Numeric argument outside the mathematical domain."""


class AnalysisError(PoolTestError):
    """Exact tree analysis cannot proceed (e.g. divergent loop)."""


class BracketError(PoolTestError):
    """Root bracketing interval contains no sign change."""


class ParseError(PoolTestError):
    """Strategy DSL document violates the schema."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{message}" + (f" (at {location})" if location else ""))
        self.location = location


class PersistError(PoolTestError):
    """Session persistence record is corrupt or tampered."""

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message + (f" (record {offset})" if offset >= 0 else ""))
        self.offset = offset


class SequencingError(PoolTestError):
    """Session protocol violation (stale or duplicate instruction)."""


class RosterError(PoolTestError):
    """Session roster or parameters are invalid."""


class NotFound(PoolTestError):
    """Unknown session id."""
