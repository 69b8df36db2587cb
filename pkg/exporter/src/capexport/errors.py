"""Exception hierarchy.

``InputError`` covers anything the caller could have fixed up front (bad
identifiers, malformed stub files, out-of-range parameters); the CLI maps
it to exit code 2. ``SchemaError`` means a composed output line failed its
own schema check, which aborts the export. Everything else under
``ExportError`` (adapter faults, bad model distributions) exits 3.
"""


class ExportError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ExportError, ValueError):
    """Invalid input data or parameters."""


class SchemaError(ExportError):
    """An output line violated the wire format it was about to be written in."""
