"""Exception types shared across the pipeline."""


class PerfixError(Exception):
    """Base class for all pipeline errors."""


class ParseError(PerfixError):
    """Source text could not be parsed (lexical error or unbalanced delimiters)."""


class InsufficientCorpus(PerfixError):
    """Vocabulary build requires more distinct projects than the corpus provides."""


class RepoAccessError(PerfixError):
    """A git repository could not be read."""


class NoDifference(PerfixError):
    """Defensive: localization was asked for on an unchanged method pair."""


class EmptyChange(PerfixError):
    """Instruction derivation got two empty identifier sets."""


class KbIoError(PerfixError):
    """Knowledge-base file unreadable or truncated."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class VersionMismatch(PerfixError):
    """Knowledge-base file written by an incompatible format version."""


class PatternNotFound(PerfixError):
    """The abstracted buggy line has no entry in the knowledge-base."""


class CommentCollision(PerfixError):
    """Method text contains '*/' and cannot be embedded in a block comment."""


class NoHotspotIdentifier(PerfixError):
    """The buggy line contains no common identifier to name in a reasoning prompt."""


class BackendUnavailable(PerfixError):
    """All retry attempts against the completion backend failed."""


class TokenLimitExceeded(PerfixError):
    """A single sample was rejected by the backend for exceeding the token limit."""


class UnbalancedCompletion(PerfixError):
    """Brace depth never returned to zero inside the completion."""


class NoCommentClose(PerfixError):
    """Reasoning completion never closed the instruction comment."""


class NoMethodFound(PerfixError):
    """No method declaration found in a reasoning completion."""


class EmptySuggestionSet(PerfixError):
    """closest_match requires at least one suggestion."""
