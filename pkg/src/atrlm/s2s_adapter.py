"""Seq2seq-to-CTC adaptation by interleaving artificial blank frames.

A seq2seq posterior matrix predicts one output symbol per frame, so the
CTC collapse rule would destroy legitimate repeats ("aa" becomes "a"). The
adapter inserts a blank-dominant frame before every content frame; the
blanks separate repeats and carry no other information. The EOS column is
dropped (after the EOS policy decides the effective length) and each row
is renormalized over the surviving symbols, so the per-frame argmax order
of real symbols is untouched and greedy decoding of the adapted matrix
reproduces the seq2seq greedy output exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModeMismatch, ShapeMismatch, UsageError
from .io import BLANK_SYMBOL, EOS_SYMBOL, MODE_CTC, MODE_S2S, EmissionMatrix

EOS_TRUNCATE = "truncate-at-eos"
EOS_KEEP_ALL = "keep-all"
EOS_POLICIES = (EOS_TRUNCATE, EOS_KEEP_ALL)

# Blank share of a content frame; small enough to never win an argmax,
# large enough to keep every log finite.
_CONTENT_EPS = 1e-7


@dataclass(frozen=True)
class AdapterConfig:
    """``blank_fill`` is the natural-log blank probability of inserted
    frames; the residual mass spreads uniformly over the real symbols.
    ``eos_policy`` picks the effective length: cut at the first greedy EOS
    frame, or keep every frame."""

    blank_fill: float = math.log1p(-1e-7)
    eos_policy: str = EOS_TRUNCATE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.blank_fill) and self.blank_fill < 0.0):
            raise UsageError("blank_fill must be a finite negative log probability")
        if self.eos_policy not in EOS_POLICIES:
            raise UsageError(f"unknown eos policy: {self.eos_policy!r}")


def adapt(emissions: EmissionMatrix, config: AdapterConfig | None = None) -> EmissionMatrix:
    """Convert a seq2seq matrix into a CTC matrix with 2T' rows.

    T' is the effective length after the EOS policy. Output rows alternate
    [inserted blank, content]; the vocabulary gains the blank column at
    the end and loses the EOS column. Row normalization is preserved.
    """
    emissions.validate()
    if emissions.mode != MODE_S2S:
        raise ModeMismatch("adapt expects a seq2seq matrix")
    config = config or AdapterConfig()

    frames = emissions.frames.astype(np.float64)
    eos = emissions.eos_index
    t_eff = frames.shape[0]
    if config.eos_policy == EOS_TRUNCATE and t_eff:
        hits = np.nonzero(frames.argmax(axis=1) == eos)[0]
        if hits.size:
            t_eff = int(hits[0])

    n_real = len(emissions.vocab) - 1
    vocab = tuple(v for v in emissions.vocab if v != EOS_SYMBOL) + (BLANK_SYMBOL,)
    blank = n_real
    if t_eff and n_real == 0:
        raise ShapeMismatch("cannot adapt a matrix whose only symbol is EOS")

    content = np.delete(frames[:t_eff], eos, axis=1)
    if t_eff:
        # Renormalize over the surviving columns; subtracting their own
        # log-sum-exp is the stable form of dividing by (1 - p_eos).
        m = content.max(axis=1)
        lse = m + np.log(np.exp(content - m[:, None]).sum(axis=1))
        bad = ~np.isfinite(lse)
        if bad.any():
            content[bad] = -math.log(n_real)
            lse[bad] = 0.0
        content = content - lse[:, None]

    out = np.empty((2 * t_eff, n_real + 1), dtype=np.float64)
    if t_eff:
        residual = -math.expm1(config.blank_fill)
        insert = np.full(n_real + 1, math.log(residual / n_real))
        insert[blank] = config.blank_fill
        out[0::2] = insert
        out[1::2, :n_real] = content + math.log1p(-_CONTENT_EPS)
        out[1::2, blank] = math.log(_CONTENT_EPS)

    adapted = EmissionMatrix(
        frames=out.astype(np.float32),
        vocab=vocab,
        mode=MODE_CTC,
        blank_index=blank,
    )
    adapted.validate()
    return adapted
