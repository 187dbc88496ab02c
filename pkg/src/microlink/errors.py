"""Exception hierarchy. CLI maps these onto exit codes (see cli.py)."""


class MicrolinkError(Exception):
    """Base class for all package errors."""


class ContractViolationError(MicrolinkError):
    """An internal invariant was broken. Signals a sampler/caller bug, not bad data."""


class ElicitationError(MicrolinkError):
    """Requested hyperparameter elicitation is degenerate or out of range."""


class IngestionError(MicrolinkError):
    """Malformed input file. Message carries row/column context."""


class ConfigError(MicrolinkError):
    """Invalid run configuration."""


class SamplingError(MicrolinkError):
    """A generative sampler could not produce a draw (e.g. rejection budget exhausted)."""
