"""Synthetic noisy-channel emissions: a desk-scale optical-model stand-in.

Real emission matrices come from trained neural recognizers, which this
toolkit deliberately does not include. The simulator produces emissions
with a controllable error rate instead: every frame draws Gumbel noise on
top of scaled target logits, which is equivalent to sampling the frame's
argmax from a softmax at temperature tau. Low tau means near-deterministic
frames; raising tau raises the greedy error rate monotonically in
expectation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import UnknownCharacter, UsageError
from .io import BLANK_SYMBOL, MODE_CTC, EmissionMatrix
from .tokenizer import SPACE_MARKER, normalize


@dataclass(frozen=True)
class NoiseModel:
    """Noisy-channel settings.

    ``tau`` is the confusion temperature (> 0). ``p_blank`` in [0, 1)
    biases content frames toward blank, creating deletions. One character
    yields ``frames_per_char`` content frames preceded by a separator
    blank frame each; a final blank frame closes non-empty sequences.
    ``confusion`` optionally maps a character to per-neighbor affinities
    in [0, 1] (1 = as attractive as the target); the default is a uniform
    neighborhood. Everything is deterministic given ``seed``.
    """

    tau: float = 0.25
    p_blank: float = 0.3
    frames_per_char: int = 1
    seed: int = 0
    confusion: Mapping[str, Mapping[str, float]] | None = None

    def __post_init__(self) -> None:
        if not self.tau > 0.0:
            raise UsageError("tau must be positive")
        if not 0.0 <= self.p_blank < 1.0:
            raise UsageError("p_blank must be in [0, 1)")
        if self.frames_per_char < 1:
            raise UsageError("frames_per_char must be at least 1")


def build_vocab(lines: Iterable[str]) -> tuple[str, ...]:
    """Distinct characters of a corpus (space as the marker), blank last."""
    chars: set[str] = set()
    for line in lines:
        chars.update(SPACE_MARKER if c == " " else c for c in normalize(line))
    return tuple(sorted(chars)) + (BLANK_SYMBOL,)


def synthesize(text: str, noise: NoiseModel, vocab: Sequence[str]) -> EmissionMatrix:
    """Turn reference text into a CTC emission matrix.

    Frame pattern per character: one blank separator then
    ``frames_per_char`` content frames; one trailing blank closes the
    sequence. Empty text gives a 0-row matrix. At tau near zero the greedy
    decode recovers the text exactly.
    """
    vocab = tuple(vocab)
    if BLANK_SYMBOL not in vocab:
        raise UsageError(f"vocabulary must include the blank symbol {BLANK_SYMBOL!r}")
    blank = vocab.index(BLANK_SYMBOL)
    index = {ch: i for i, ch in enumerate(vocab)}
    chars = [SPACE_MARKER if c == " " else c for c in normalize(text)]
    for ch in chars:
        if ch not in index:
            raise UnknownCharacter(f"character {ch!r} is not in the vocabulary")

    v = len(vocab)
    inv_tau = 1.0 / noise.tau
    rows = len(chars) * (1 + noise.frames_per_char) + (1 if chars else 0)
    logits = np.zeros((rows, v), dtype=np.float64)
    r = 0
    for ch in chars:
        logits[r, blank] = inv_tau
        r += 1
        for _ in range(noise.frames_per_char):
            logits[r, index[ch]] = inv_tau
            logits[r, blank] = noise.p_blank * inv_tau
            if noise.confusion is not None:
                for neighbor, affinity in noise.confusion.get(ch, {}).items():
                    if neighbor in index and neighbor != ch:
                        logits[r, index[neighbor]] = affinity * inv_tau
            r += 1
    if chars:
        logits[r, blank] = inv_tau

    rng = np.random.default_rng(noise.seed)
    noisy = logits + rng.gumbel(size=logits.shape)
    m = noisy.max(axis=1, keepdims=True) if rows else noisy
    if rows:
        noisy = noisy - (m + np.log(np.exp(noisy - m).sum(axis=1, keepdims=True)))

    matrix = EmissionMatrix(
        frames=noisy.astype(np.float32),
        vocab=vocab,
        mode=MODE_CTC,
        blank_index=blank,
    )
    matrix.validate()
    return matrix


def synthesize_corpus(
    lines: Sequence[str], noise: NoiseModel, vocab: Sequence[str] | None = None
) -> list[EmissionMatrix]:
    """Synthesize one matrix per line, seeding line i with seed + i.

    Per-line seeding keeps every item reproducible on its own and
    independent of corpus order.
    """
    if vocab is None:
        vocab = build_vocab(lines)
    return [
        synthesize(line, replace(noise, seed=noise.seed + i), vocab)
        for i, line in enumerate(lines)
    ]
