from django.core.exceptions import ImproperlyConfigured


class QdgfnError(Exception):
    """Base class for every error raised by the vqa app."""


class DimensionError(QdgfnError, ValueError):
    """Operand shapes do not fit the operation."""


class NumericError(QdgfnError, ArithmeticError):
    """Non-finite input or a zero norm where a direction is required."""


class DegenerateInputError(QdgfnError, ValueError):
    """An input has nothing to average, normalise or attend over."""


class DegenerateSliceError(DegenerateInputError):
    """A masked softmax slice has no unmasked entry."""


class DegenerateSceneError(DegenerateInputError):
    """A scene with fewer than two objects cannot form a relation graph."""


class UsageError(QdgfnError, ValueError):
    """A caller broke an operation's preconditions."""


class ConfigError(QdgfnError, ImproperlyConfigured):
    """A ModelConfig, manifest or hyperparameter is invalid."""


class VocabularyError(QdgfnError, KeyError):
    """A word or label is not in its closed vocabulary."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


class DataError(QdgfnError, ValueError):
    """Data values outside their documented domain."""


class GeneratorError(QdgfnError, RuntimeError):
    """The synthetic generator could not produce a valid instance."""


class CorpusFormatError(QdgfnError, ValueError):
    """A corpus file is corrupt or has the wrong version."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class CheckpointError(QdgfnError, ValueError):
    """A checkpoint cannot be read or does not match its config or corpus."""
