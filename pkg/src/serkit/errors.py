"""Exception taxonomy shared across the toolkit.

Every error raised on a contract violation derives from SerkitError so
callers (and the CLI) can distinguish usage problems from genuine bugs.
"""

from __future__ import annotations


class SerkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SerkitError):
    """Malformed container or file header."""


class UnsupportedError(SerkitError):
    """Well-formed input using a codec or layout we do not handle."""


class EmptyAudioError(SerkitError):
    """Audio container with a zero-length data payload."""


class ShapeError(SerkitError):
    """Operand shapes incompatible with the requested operation."""


class InputTooShortError(SerkitError):
    """Sequence shorter than the minimum the operation can consume."""

    def __init__(self, message: str, min_samples: int | None = None):
        super().__init__(message)
        self.min_samples = min_samples


class ArchiveError(SerkitError):
    """Tensor archive missing tensors, corrupt, or inconsistent."""


class VersionError(SerkitError):
    """Tensor archive written by an incompatible format version."""


class LabelError(SerkitError):
    """Class label outside the declared label set."""


class DataError(SerkitError):
    """Training data violating a precondition (e.g. absent class)."""


class EmptyDatasetError(SerkitError):
    """Dataset scan produced no usable utterances."""


class StratifyError(SerkitError):
    """Class too small for the requested stratified partition."""


class ConfigError(SerkitError):
    """Invalid or mismatched run configuration / provenance."""
