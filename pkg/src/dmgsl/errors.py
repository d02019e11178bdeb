"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data/config
problems exit 2, numeric failures exit 3.
"""


class DMGSLError(Exception):
    """Base class for all package errors."""


class ShapeError(DMGSLError):
    """Tensor shapes do not conform to an operation's rule."""


class DomainError(DMGSLError):
    """Value outside an operation's numeric domain (log of <= 0, all-masked row)."""


class ContractError(DMGSLError):
    """An API contract was violated (non-scalar loss, alpha not summing to 1)."""


class ParseError(DMGSLError):
    """A file could not be parsed; message carries the line number."""


class SchemaError(DMGSLError):
    """Structurally invalid data (bad edge type, duplicate edge, zero columns)."""


class DataError(DMGSLError):
    """Data values unusable for the requested operation."""


class ConfigError(DMGSLError):
    """Invalid or inconsistent configuration."""


class NumericError(DMGSLError):
    """Numeric failure at runtime (NaN loss, zero embedding row)."""
