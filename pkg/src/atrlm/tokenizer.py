"""Tokenization at character, subword, and word granularity.

All three levels share one surface convention: text is NFC-normalized on
ingestion and the space character is represented by the visible marker
U+2581 so that tokens never contain raw spaces and token streams can be
written one line per sequence, space-joined. The marker is reserved;
input text containing a literal U+2581 is out of contract.

Subword units come from a deterministic byte-pair-encoding trainer with two
space handling modes:

* ``separate-spaces``: the marker is always a standalone token and never
  participates in merges (it still counts toward the vocabulary budget).
* ``sentencepiece``: text is segmented immediately before every marker, so
  merges may absorb the marker into word-initial pieces.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyCorpus, UsageError, VocabTooSmall

SPACE_MARKER = "▁"

LEVEL_CHARACTER = "character"
LEVEL_SUBWORD = "subword"
LEVEL_WORD = "word"
LEVELS = (LEVEL_CHARACTER, LEVEL_SUBWORD, LEVEL_WORD)

SPACE_MODE_SEPARATE = "separate-spaces"
SPACE_MODE_SENTENCEPIECE = "sentencepiece"
SPACE_MODES = (SPACE_MODE_SEPARATE, SPACE_MODE_SENTENCEPIECE)

# A word token is a run of word characters, a run of anything that is neither
# a word character nor a space, or one literal space. The three classes cover
# every character, so word tokenization is total and reversible.
_WORD_RE = re.compile(r" |\w+|[^\w ]+")


def normalize(text: str) -> str:
    """Apply NFC normalization. No case folding is performed anywhere."""
    return unicodedata.normalize("NFC", text)


def tokenize_chars(text: str) -> list[str]:
    """One token per Unicode scalar, with spaces mapped to the marker."""
    return [SPACE_MARKER if ch == " " else ch for ch in normalize(text)]


def tokenize_words(text: str) -> list[str]:
    """Split into word runs, punctuation runs, and standalone space markers."""
    return [
        SPACE_MARKER if tok == " " else tok
        for tok in _WORD_RE.findall(normalize(text))
    ]


def detokenize(tokens: Iterable[str]) -> str:
    """Invert any of the tokenizers: concatenate and restore spaces."""
    return "".join(tokens).replace(SPACE_MARKER, " ")


@dataclass(frozen=True)
class SubwordModel:
    """A trained byte-pair-encoding model.

    ``merges`` is the ordered list of pair merges learned during training;
    applying them in order reproduces training-time segmentation exactly.
    ``vocab`` is the closed set of producible tokens (base characters plus
    merge products). ``vocab_size`` is the budget that was requested, which
    the trained vocabulary never exceeds.
    """

    vocab_size: int
    space_mode: str
    merges: tuple[tuple[str, str], ...]
    vocab: frozenset[str]


def _segments(text: str, space_mode: str) -> list[list[str]]:
    """Cut one line into merge domains according to the space mode.

    Merges never cross segment boundaries. In separate-spaces mode the
    marker forms a segment of its own; in sentencepiece mode a new segment
    starts at each marker and the marker stays inside it.
    """
    chars = tokenize_chars(text)
    if not chars:
        return []
    if space_mode == SPACE_MODE_SEPARATE:
        segs: list[list[str]] = []
        run: list[str] = []
        for ch in chars:
            if ch == SPACE_MARKER:
                if run:
                    segs.append(run)
                    run = []
                segs.append([ch])
            else:
                run.append(ch)
        if run:
            segs.append(run)
        return segs
    segs = []
    run = []
    for ch in chars:
        if ch == SPACE_MARKER and run:
            segs.append(run)
            run = []
        run.append(ch)
    if run:
        segs.append(run)
    return segs


def _mergeable(seg: list[str], space_mode: str) -> bool:
    # Standalone markers are frozen in separate-spaces mode.
    return not (space_mode == SPACE_MODE_SEPARATE and seg == [SPACE_MARKER])


def _pair_counts(segments: list[list[str]]) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = {}
    for seg in segments:
        for left, right in zip(seg, seg[1:]):
            pair = (left, right)
            counts[pair] = counts.get(pair, 0) + 1
    return counts


def _apply_merge(seg: list[str], left: str, right: str) -> list[str]:
    """Replace occurrences of the pair greedily left to right."""
    out: list[str] = []
    i = 0
    while i < len(seg):
        if i + 1 < len(seg) and seg[i] == left and seg[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(seg[i])
            i += 1
    return out


def train_subword(
    corpus: Iterable[str],
    vocab_size: int,
    space_mode: str = SPACE_MODE_SEPARATE,
) -> SubwordModel:
    """Learn merges from a line corpus until the budget or data is exhausted.

    Pair statistics count every adjacent occurrence (overlaps included);
    the best pair is the most frequent one, ties broken by the
    lexicographically smallest (left, right) tuple, so training is fully
    deterministic. Training stops when the vocabulary reaches the budget or
    when the best remaining pair occurs fewer than 2 times.
    """
    if space_mode not in SPACE_MODES:
        raise UsageError(f"unknown space mode: {space_mode!r}")
    if vocab_size < 1:
        raise VocabTooSmall("vocab budget must be at least 1")

    lines = list(corpus)
    if not lines:
        raise EmptyCorpus("subword training needs a non-empty corpus")
    work: list[list[str]] = []
    for line in lines:
        work.extend(_segments(line, space_mode))

    vocab: set[str] = set()
    for seg in work:
        vocab.update(seg)
    if len(vocab) > vocab_size:
        raise VocabTooSmall(
            f"budget {vocab_size} is below the {len(vocab)} base characters"
        )

    mergeable = [seg for seg in work if _mergeable(seg, space_mode)]
    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size:
        counts = _pair_counts(mergeable)
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        left, right = min(p for p, c in counts.items() if c == best_count)
        merges.append((left, right))
        vocab.add(left + right)
        mergeable = [_apply_merge(seg, left, right) for seg in mergeable]

    return SubwordModel(
        vocab_size=vocab_size,
        space_mode=space_mode,
        merges=tuple(merges),
        vocab=frozenset(vocab),
    )


def tokenize_subwords(model: SubwordModel, text: str) -> list[str]:
    """Segment text with a trained model.

    Characters never seen at training time pass through as singleton
    tokens, so the function is total; within the training character set the
    output uses only vocabulary tokens.
    """
    out: list[str] = []
    for seg in _segments(text, model.space_mode):
        if _mergeable(seg, model.space_mode):
            for left, right in model.merges:
                if len(seg) < 2:
                    break
                seg = _apply_merge(seg, left, right)
        out.extend(seg)
    return out


def tokenize(text: str, level: str, model: SubwordModel | None = None) -> list[str]:
    """Dispatch to the tokenizer for ``level``."""
    if level == LEVEL_CHARACTER:
        return tokenize_chars(text)
    if level == LEVEL_WORD:
        return tokenize_words(text)
    if level == LEVEL_SUBWORD:
        if model is None:
            raise UsageError("subword tokenization needs a trained model")
        return tokenize_subwords(model, text)
    raise UsageError(f"unknown tokenization level: {level!r}")


def save_subword_model(model: SubwordModel, path: str) -> None:
    """Write the model in its text format.

    Line 1 is ``bpe-v1 <vocab_size> <space_mode>``; then one merge per line
    as ``<left>\\t<right>`` in training order; then a blank line; then the
    vocabulary entries sorted lexicographically. The format round-trips
    byte-exactly.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"bpe-v1 {model.vocab_size} {model.space_mode}\n")
        for left, right in model.merges:
            fh.write(f"{left}\t{right}\n")
        fh.write("\n")
        for entry in sorted(model.vocab):
            fh.write(entry + "\n")


def load_subword_model(path: str) -> SubwordModel:
    from .errors import DataError

    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0].startswith("bpe-v1 "):
        raise DataError(f"{path}: not a bpe-v1 model file")
    head = lines[0].split(" ")
    if len(head) != 3 or head[2] not in SPACE_MODES:
        raise DataError(f"{path}: malformed model header: {lines[0]!r}")
    try:
        vocab_size = int(head[1])
    except ValueError:
        raise DataError(f"{path}: malformed vocab size in header") from None

    merges: list[tuple[str, str]] = []
    i = 1
    while i < len(lines) and lines[i] != "":
        parts = lines[i].split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}: malformed merge line {i + 1}: {lines[i]!r}")
        merges.append((parts[0], parts[1]))
        i += 1
    if i >= len(lines):
        raise DataError(f"{path}: missing blank separator before vocabulary")
    vocab = {ln for ln in lines[i + 1 :] if ln != ""}
    if not vocab:
        raise DataError(f"{path}: empty vocabulary section")
    return SubwordModel(
        vocab_size=vocab_size,
        space_mode=head[2],
        merges=tuple(merges),
        vocab=frozenset(vocab),
    )
