"""Spelling lexica and the character trie for constrained beam search.

When the language model operates on units larger than characters, the
decoder walks a trie over unit spellings so that it only ever emits
character sequences that segment into lexicon units. Each trie node
carries a smear score, the maximum unigram log10 probability over every
unit that completes in its subtree; the decoder uses it as an admissible
stand-in for the LM score while a unit is still in progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError, DuplicateUnit, EmptyCorpus, MissingScore, UsageError
from .tokenizer import LEVEL_SUBWORD, LEVEL_WORD

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Lexicon:
    """Map from LM unit to its character spelling (set semantics)."""

    entries: dict[str, tuple[str, ...]]


def build_lexicon(corpus: Iterable[Sequence[str]], level: str) -> Lexicon:
    """Collect one entry per distinct unit of a tokenized corpus.

    The spelling of a unit is its character decomposition; the space
    marker is a unit whose spelling is the marker itself.
    """
    if level not in (LEVEL_SUBWORD, LEVEL_WORD):
        raise UsageError("a lexicon is only meaningful for subword or word units")
    entries: dict[str, tuple[str, ...]] = {}
    for seq in corpus:
        for unit in seq:
            if unit and unit not in entries:
                entries[unit] = tuple(unit)
    if not entries:
        raise EmptyCorpus("cannot build a lexicon from an empty corpus")
    return Lexicon(entries=entries)


def save_lexicon(lexicon: Lexicon, path: str) -> None:
    """One entry per line: ``<unit>\\t<char> <char> ...``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for unit in sorted(lexicon.entries):
            fh.write(unit + "\t" + " ".join(lexicon.entries[unit]) + "\n")


def load_lexicon(path: str) -> Lexicon:
    entries: dict[str, tuple[str, ...]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise DataError(f"{path}:{lineno}: expected <unit>\\t<spelling>")
            unit, spelling_text = line.split("\t", 1)
            spelling = tuple(spelling_text.split(" "))
            if not unit or not spelling or any(len(c) != 1 for c in spelling):
                raise DataError(
                    f"{path}:{lineno}: spelling must be single characters"
                )
            if unit in entries and entries[unit] != spelling:
                raise DuplicateUnit(
                    f"{path}:{lineno}: unit {unit!r} already has a different spelling"
                )
            entries[unit] = spelling
    if not entries:
        raise EmptyCorpus(f"{path}: lexicon has no entries")
    return Lexicon(entries=entries)


class TrieNode:
    __slots__ = ("children", "units", "smear")

    def __init__(self) -> None:
        self.children: dict[str, TrieNode] = {}
        self.units: list[str] = []
        self.smear: float = NEG_INF


@dataclass
class LexiconTrie:
    """Character trie over unit spellings; immutable after build."""

    root: TrieNode
    size: int


def unit_scores_from_lm(lexicon: Lexicon, model) -> dict[str, float]:
    """Unigram log10 score of every lexicon unit under a model."""
    return {unit: model.conditional((), unit) for unit in lexicon.entries}


def build_trie(lexicon: Lexicon, unigram_scores: Mapping[str, float]) -> LexiconTrie:
    """Index spellings and smear unigram scores up the trie.

    Smearing takes the maximum over descendant completions, so a parent's
    smear is always at least each child's.
    """
    if not lexicon.entries:
        raise EmptyCorpus("cannot build a trie from an empty lexicon")
    missing = [u for u in lexicon.entries if u not in unigram_scores]
    if missing:
        raise MissingScore(f"no unigram score for unit {missing[0]!r}")
    root = TrieNode()
    for unit in sorted(lexicon.entries):
        node = root
        for ch in lexicon.entries[unit]:
            nxt = node.children.get(ch)
            if nxt is None:
                nxt = TrieNode()
                node.children[ch] = nxt
            node = nxt
        node.units.append(unit)

    def smear(node: TrieNode) -> float:
        best = max((unigram_scores[u] for u in node.units), default=NEG_INF)
        for child in node.children.values():
            sub = smear(child)
            if sub > best:
                best = sub
        node.smear = best
        return best

    smear(root)
    return LexiconTrie(root=root, size=len(lexicon.entries))
