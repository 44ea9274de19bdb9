"""Exception hierarchy. Every error carries a machine-parsable category used by the CLI."""


class ClardRecError(Exception):
    """Base class for all package errors."""

    category = "error"


class DimensionError(ClardRecError):
    """Input shapes do not conform to an operation's signature."""

    category = "dimension"


class NumericError(ClardRecError):
    """A computation produced non-finite values."""

    category = "numeric"


class ContractError(ClardRecError):
    """An operation was called outside its contract."""

    category = "contract"


class ConfigError(ClardRecError):
    """Invalid configuration value or combination."""

    category = "config"


class FormatError(ClardRecError):
    """Malformed input file."""

    category = "format"


class SamplingError(ClardRecError):
    """Negative sampling could not satisfy its pool requirements."""

    category = "sampling"


class GenerationError(ClardRecError):
    """Synthetic data generation produced a degenerate dataset."""

    category = "generation"


class ProbeError(ClardRecError):
    """Disentanglement probe preconditions not met."""

    category = "probe"


class UsageError(ClardRecError):
    """Bad command-line usage."""

    category = "usage"
