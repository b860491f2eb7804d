from __future__ import annotations


class PolychronError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(PolychronError, ValueError):
    """Vector or table dimensions do not match."""


class InvalidAnchorError(PolychronError, ValueError):
    """Anchor indices are out of range or inconsistent with the hash mode."""


class CacheMismatchError(PolychronError, ValueError):
    """A cache does not belong to the transform or model it is used with."""


class RuleCacheMismatchError(CacheMismatchError):
    """The learning rule needs cache entries the forward pass did not keep."""


class StaleCacheError(CacheMismatchError):
    """Embeddings changed after the V-index cache was built."""


class ConfigError(PolychronError, ValueError):
    """Invalid experiment configuration."""


class CorpusError(PolychronError, ValueError):
    """Corpus file is missing, empty or too short for the window length."""


class DivergenceError(PolychronError, RuntimeError):
    """Training produced a non-finite loss."""


class CheckpointError(PolychronError, ValueError):
    """Checkpoint file cannot be read."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint ended before all declared data was read."""


class InvalidLatencyError(PolychronError, ValueError):
    """Latency vector contains NaN or infinite values."""
