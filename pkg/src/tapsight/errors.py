"""Exception types shared across the package."""


class TapsightError(Exception):
    """Base class for all package errors."""


class UnknownMagicError(TapsightError):
    """File does not start with a known capture-file magic number."""


class TruncatedHeaderError(TapsightError):
    """File is shorter than the 24-byte global header."""


class StoreError(TapsightError):
    """Base class for metadata-store errors."""


class PathExistsError(StoreError):
    """Refusing to overwrite an existing store file."""


class FinalizedRunError(StoreError):
    """Write attempted after the run was finalized."""


class ConstraintViolationError(StoreError):
    """Record references a flow id that was never inserted."""


class UnknownSelectorError(StoreError):
    """table.column selector does not name a searchable text column."""


class RulesetParseError(TapsightError):
    """Ruleset file could not be parsed; message carries diagnostics."""


class UnsupportedVersionError(RulesetParseError):
    """Ruleset file declares a format_version this build does not read."""
