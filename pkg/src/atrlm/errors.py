"""Exception hierarchy shared across the toolkit.

Two roots matter for the CLI exit-code mapping: UsageError (operator
mistake, exit 2) and DataError (malformed or inconsistent input, exit 1).
Everything raised by the library derives from one of them.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class UsageError(ToolkitError):
    """Caller asked for something unsupported (bad flag value, bad combination)."""


class DataError(ToolkitError):
    """Input data is malformed, inconsistent, or out of contract."""


# --- corpora and tokenization ------------------------------------------------

class EmptyCorpus(DataError):
    """An operation that needs at least one sequence received none."""


class VocabTooSmall(UsageError):
    """Subword vocab budget is below the number of base characters."""


# --- language model ----------------------------------------------------------

class OrderOutOfRange(UsageError):
    """Requested n-gram order is outside the supported 1..6 range."""


class DegenerateCounts(DataError):
    """Counts cannot support the requested smoothing (no real token occurrences)."""


class MalformedArpa(DataError):
    """An ARPA file violates the format contract."""


class OrderMismatch(MalformedArpa):
    """ARPA section sizes disagree with the declared header counts."""


# --- lexicon -----------------------------------------------------------------

class DuplicateUnit(DataError):
    """Lexicon defines the same unit twice with conflicting spellings."""


class MissingScore(DataError):
    """A lexicon unit has no unigram score to smear."""


# --- decoder -----------------------------------------------------------------

class ModeMismatch(DataError):
    """Operation requires a different emission mode (ctc vs s2s)."""


class VocabMismatch(DataError):
    """Emission vocabulary disagrees with what the operation needs."""


class MissingTrie(UsageError):
    """Subword- or word-level decoding needs a lexicon trie."""


class TrieWithoutLexiconLevel(UsageError):
    """A trie was supplied but the LM level is character (lexicon-free)."""


# --- emission / manifest io --------------------------------------------------

class BadMagic(DataError):
    """File does not start with a valid NPY v1.0 prelude."""


class UnsupportedDtype(DataError):
    """NPY payload is not little-endian float32 C-order."""


class ShapeMismatch(DataError):
    """Array or vocabulary shape disagrees with the (T, V) contract."""


class UnnormalizedRows(DataError):
    """At least one emission row is not a normalized log distribution."""

    def __init__(self, message: str, worst_row: int):
        super().__init__(message)
        self.worst_row = worst_row


class MalformedVocab(DataError):
    """Vocabulary sidecar is unreadable or lacks a mode sentinel."""


class MalformedManifest(DataError):
    """Dataset manifest line is not a valid JSON object."""


class MissingField(DataError):
    """Manifest entry lacks a required field."""


class DuplicateId(DataError):
    """Two manifest entries share an id."""


# --- simulation --------------------------------------------------------------

class UnknownCharacter(DataError):
    """Text to synthesize contains a character missing from the vocabulary."""
