"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ShapeError(ValueError):
    """Array dimensions disagree with the model or with each other."""


class FormatError(ValueError):
    """Base class for malformed CAPM / CPXD containers."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class CorruptPayloadError(FormatError):
    """Header is readable but the payload holds NaN/inf or inconsistent sizes."""


class EnumerationGuardError(RuntimeError):
    """Requested exact enumeration exceeds the state-space budget."""
