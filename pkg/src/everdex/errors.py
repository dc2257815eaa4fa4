"""Exception taxonomy shared across the package.

Every CLI failure path maps one of these onto a nonzero exit code and a
single-line ``category: message`` diagnostic, so the class names double as
machine-parseable error categories.
"""


class EverdexError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class DimensionMismatchError(EverdexError):
    """Operands disagree on vector/matrix dimensions."""

    category = "dimension-mismatch"


class DegenerateInputError(EverdexError):
    """Input is structurally valid but numerically unusable (e.g. zero vector)."""

    category = "degenerate-input"


class NonFiniteError(EverdexError):
    """NaN/Inf encountered where finite values are required; training aborts."""

    category = "non-finite"


class ProtocolError(EverdexError):
    """An API was driven out of order (tape reuse, empty buffer, bad growth)."""

    category = "protocol"


class ContractViolationError(EverdexError):
    """A benchmark contract was broken (stage order, data access, split overlap)."""

    category = "contract-violation"


class FormatError(EverdexError):
    """A file does not conform to its declared format."""

    category = "format"


class ConfigError(EverdexError):
    """Run or dataset configuration is invalid."""

    category = "config"
