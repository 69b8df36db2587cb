"""Exception hierarchy.

``ValidationError`` covers bad inputs a caller could have checked (malformed
files, out-of-range parameters, schema violations); the CLI maps it to exit
code 2. Everything else under ``CapoodError`` is a runtime failure (exit 3).
"""


class CapoodError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CapoodError, ValueError):
    """Invalid input data or parameters."""


class FormatError(ValidationError):
    """A file did not conform to its wire format.

    ``line`` is the 1-based line number when the problem is tied to one.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            prefix += f"{line}: " if line is not None else " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class DegenerateCaptionError(ValidationError):
    """A caption has no scorable token records under the requested config."""


class DistributionError(ValidationError):
    """A next-token distribution failed validation during decoding."""


class TrainingDivergedError(CapoodError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
