"""Greedy and prefix-beam-search decoding with n-gram shallow fusion.

Beam search follows the prefix formulation: hypotheses are labelings (the
collapsed output strings), each carrying separate natural-log acoustic
masses for alignments ending in blank and in the labeling's last symbol.
Equal states are merged by log-sum-exp, so with an exhaustive beam the
top hypothesis is the exact marginal over alignments.

Shallow fusion adds alpha * ln(10) * log10 P_LM at every unit boundary
(each character in character mode, each trie completion in lexicon mode)
plus a constant bonus beta per emitted unit; the sentence-end LM term is
added exactly once at finalization. Inside a word, lexicon mode prunes
with the node's smeared unigram score, replaced by the true conditional
when the unit completes. Everything runs on CPU with no device state.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    MissingTrie,
    ModeMismatch,
    ToolkitError,
    TrieWithoutLexiconLevel,
    UsageError,
    VocabMismatch,
)
from .io import MODE_CTC, MODE_S2S, EmissionMatrix, read_emissions
from .lexicon import LexiconTrie
from .lm import EOS, BOS, NGramModel
from .tokenizer import detokenize
from .tokenizer import LEVEL_CHARACTER, LEVEL_WORD, LEVELS

LN10 = math.log(10.0)
NEG_INF = float("-inf")

# Tuned fusion weights by unit granularity: 1.5 for character and subword
# models, 0.5 for word models.
DEFAULT_LM_WEIGHTS = {
    LEVEL_CHARACTER: 1.5,
    "subword": 1.5,
    LEVEL_WORD: 0.5,
}


@dataclass(frozen=True)
class DecodeConfig:
    """Beam search settings.

    ``lm_weight`` defaults by level when left as None. ``nbest`` may not
    exceed the beam size, since pruning makes deeper ranks meaningless.
    """

    lm_level: str = LEVEL_CHARACTER
    beam_size: int = 25
    lm_weight: float | None = None
    unit_insertion_score: float = 0.0
    nbest: int = 1

    def __post_init__(self) -> None:
        if self.lm_level not in LEVELS:
            raise UsageError(f"unknown lm level: {self.lm_level!r}")
        if self.beam_size < 1:
            raise UsageError("beam_size must be at least 1")
        if not 1 <= self.nbest <= self.beam_size:
            raise UsageError("nbest must satisfy 1 <= nbest <= beam_size")
        if self.lm_weight is None:
            object.__setattr__(self, "lm_weight", DEFAULT_LM_WEIGHTS[self.lm_level])
        if self.lm_weight < 0:
            raise UsageError("lm_weight must be non-negative")


@dataclass(frozen=True)
class BeamHypothesis:
    """A finalized decoding prefix.

    ``p_blank`` / ``p_nonblank`` are natural-log acoustic masses for
    alignments ending in blank / non-blank; ``lm_state`` is the unit
    context the LM would continue from; ``fused_score`` is the ranked
    total ln P_acoustic + alpha ln10 log10 P_LM + beta * units.
    """

    labeling: str
    p_blank: float
    p_nonblank: float
    lm_state: tuple[str, ...]
    fused_score: float

    @property
    def acoustic(self) -> float:
        return _logadd(self.p_blank, self.p_nonblank)


def _logadd(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def greedy_ctc(emissions: EmissionMatrix) -> str:
    """Per-frame argmax, collapse adjacent repeats, drop blanks."""
    emissions.validate()
    if emissions.mode != MODE_CTC:
        raise ModeMismatch("greedy_ctc needs a CTC matrix")
    if emissions.frames.shape[0] == 0:
        return ""
    out: list[str] = []
    prev = -1
    blank = emissions.blank_index
    for idx in emissions.frames.argmax(axis=1):
        if idx != prev and idx != blank:
            out.append(emissions.vocab[idx])
        prev = idx
    return "".join(out)


def greedy_s2s(emissions: EmissionMatrix) -> str:
    """Per-frame argmax truncated before the first EOS; no collapsing.

    A matrix that never predicts EOS returns all frames and flags a
    warning, since an unterminated output usually signals hallucination.
    """
    emissions.validate()
    if emissions.mode != MODE_S2S:
        raise ModeMismatch("greedy_s2s needs a seq2seq matrix")
    out: list[str] = []
    eos = emissions.eos_index
    for idx in emissions.frames.argmax(axis=1) if emissions.frames.shape[0] else []:
        if idx == eos:
            return "".join(out)
        out.append(emissions.vocab[idx])
    if out:
        warnings.warn(
            f"no EOS within {emissions.frames.shape[0]} frames;"
            " returning the untruncated sequence"
        )
    return "".join(out)


def _beam_char(
    frames,
    vocab: Sequence[str],
    blank: int,
    beam_size: int,
    lm: NGramModel | None,
    alpha: float,
    beta: float,
) -> list[BeamHypothesis]:
    """Character-mode prefix beam search over one matrix."""
    use_lm = lm is not None and alpha > 0.0
    awt = alpha * LN10
    cond = lm.conditional if use_lm else None
    ctx0: tuple[str, ...] = (BOS,) * (lm.order - 1) if use_lm else ()
    nonblank = [i for i in range(len(vocab)) if i != blank]
    logadd = _logadd

    # labeling -> [p_blank, p_nonblank, lm_log10, context, last char index]
    beam: dict[str, list] = {"": [0.0, NEG_INF, 0.0, ctx0, -1]}
    for t in range(frames.shape[0]):
        row = frames[t].tolist()
        row_blank = row[blank]
        nxt: dict[str, list] = {}
        for lab, (pb, pnb, lm10, ctx, last) in beam.items():
            total = logadd(pb, pnb)
            st = nxt.get(lab)
            if st is None:
                st = [NEG_INF, NEG_INF, lm10, ctx, last]
                nxt[lab] = st
            st[0] = logadd(st[0], total + row_blank)
            if last >= 0:
                st[1] = logadd(st[1], pnb + row[last])
            for idx in nonblank:
                lp = row[idx]
                if lp == NEG_INF:
                    continue
                mass = (pb if idx == last else total) + lp
                if mass == NEG_INF:
                    continue
                lab2 = lab + vocab[idx]
                st2 = nxt.get(lab2)
                if st2 is None:
                    if use_lm:
                        ch = vocab[idx]
                        lm2 = lm10 + cond(ctx, ch)
                        ctx2 = ctx[1:] + (ch,) if ctx else ()
                    else:
                        lm2, ctx2 = 0.0, ctx
                    nxt[lab2] = [NEG_INF, mass, lm2, ctx2, idx]
                else:
                    st2[1] = logadd(st2[1], mass)
        if len(nxt) > beam_size:
            scored = sorted(
                (
                    -(logadd(st[0], st[1]) + awt * st[2] + beta * len(lab)),
                    lab,
                )
                for lab, st in nxt.items()
            )
            beam = {lab: nxt[lab] for _, lab in scored[:beam_size]}
        else:
            beam = nxt

    final: list[BeamHypothesis] = []
    for lab, (pb, pnb, lm10, ctx, _last) in beam.items():
        fused = logadd(pb, pnb) + beta * len(lab)
        if use_lm:
            fused += awt * (lm10 + cond(ctx, EOS))
        final.append(
            BeamHypothesis(
                labeling=lab,
                p_blank=pb,
                p_nonblank=pnb,
                lm_state=ctx,
                fused_score=fused,
            )
        )
    final.sort(key=lambda h: (-h.fused_score, h.labeling))
    return final


def _beam_lexicon(
    frames,
    vocab: Sequence[str],
    blank: int,
    beam_size: int,
    lm: NGramModel | None,
    alpha: float,
    beta: float,
    trie: LexiconTrie,
) -> list[BeamHypothesis]:
    """Lexicon-constrained prefix beam search.

    States are keyed by (labeling, completed units, trie node) so merged
    hypotheses always share the same LM accumulation; a unit completion
    that can also continue to a longer unit forks into both futures.
    """
    use_lm = lm is not None and alpha > 0.0
    awt = alpha * LN10
    cond = lm.conditional if use_lm else None
    ctx0: tuple[str, ...] = (BOS,) * (lm.order - 1) if use_lm else ()
    nonblank = [i for i in range(len(vocab)) if i != blank]
    logadd = _logadd
    root = trie.root

    # key -> [p_blank, p_nonblank, lm_log10, context, units, node, last index]
    init_key = ("", (), id(root))
    beam: dict[tuple, list] = {init_key: [0.0, NEG_INF, 0.0, ctx0, (), root, -1]}
    for t in range(frames.shape[0]):
        row = frames[t].tolist()
        row_blank = row[blank]
        nxt: dict[tuple, list] = {}
        for key, (pb, pnb, lm10, ctx, units, node, last) in beam.items():
            total = logadd(pb, pnb)
            st = nxt.get(key)
            if st is None:
                st = [NEG_INF, NEG_INF, lm10, ctx, units, node, last]
                nxt[key] = st
            st[0] = logadd(st[0], total + row_blank)
            if last >= 0:
                st[1] = logadd(st[1], pnb + row[last])
            lab = key[0]
            for idx in nonblank:
                ch = vocab[idx]
                child = node.children.get(ch)
                if child is None:
                    continue
                lp = row[idx]
                if lp == NEG_INF:
                    continue
                mass = (pb if idx == last else total) + lp
                if mass == NEG_INF:
                    continue
                lab2 = lab + ch
                if child.children:
                    key2 = (lab2, units, id(child))
                    st2 = nxt.get(key2)
                    if st2 is None:
                        nxt[key2] = [NEG_INF, mass, lm10, ctx, units, child, idx]
                    else:
                        st2[1] = logadd(st2[1], mass)
                for unit in child.units:
                    if use_lm:
                        lm2 = lm10 + cond(ctx, unit)
                        ctx2 = ctx[1:] + (unit,) if ctx else ()
                    else:
                        lm2, ctx2 = 0.0, ctx
                    units2 = units + (unit,)
                    key2 = (lab2, units2, id(root))
                    st2 = nxt.get(key2)
                    if st2 is None:
                        nxt[key2] = [NEG_INF, mass, lm2, ctx2, units2, root, idx]
                    else:
                        st2[1] = logadd(st2[1], mass)
        if len(nxt) > beam_size:
            scored = []
            for key, st in nxt.items():
                est = st[2]
                if use_lm and st[5] is not root:
                    est += st[5].smear
                f = logadd(st[0], st[1]) + awt * est + beta * len(st[4])
                scored.append((-f, key[0], key[1]))
            scored.sort()
            keep = {(lab, units) for _, lab, units in scored[:beam_size]}
            beam = {
                key: st for key, st in nxt.items() if (key[0], key[1]) in keep
            }
        else:
            beam = nxt

    # Only fully segmented hypotheses (back at the root) are valid output;
    # among same-labeling segmentations keep the best fused score.
    best: dict[str, BeamHypothesis] = {}
    for key, (pb, pnb, lm10, ctx, units, node, _last) in sorted(
        beam.items(), key=lambda kv: (kv[0][0], kv[0][1])
    ):
        if node is not root:
            continue
        fused = logadd(pb, pnb) + beta * len(units)
        if use_lm:
            fused += awt * (lm10 + cond(ctx, EOS))
        lab = key[0]
        cur = best.get(lab)
        if cur is None or fused > cur.fused_score:
            best[lab] = BeamHypothesis(
                labeling=lab,
                p_blank=pb,
                p_nonblank=pnb,
                lm_state=ctx,
                fused_score=fused,
            )
    final = sorted(best.values(), key=lambda h: (-h.fused_score, h.labeling))
    return final


def beam_search(
    emissions: EmissionMatrix,
    config: DecodeConfig,
    lm: NGramModel | None = None,
    trie: LexiconTrie | None = None,
) -> list[BeamHypothesis]:
    """Run prefix beam search and return every finalized hypothesis.

    With ``lm`` absent or ``lm_weight`` zero the LM is never queried and
    scores are purely acoustic (plus the insertion bonus).
    """
    emissions.validate()
    if emissions.mode != MODE_CTC:
        raise ModeMismatch(
            "beam search needs a CTC matrix; adapt seq2seq matrices first"
        )
    if config.lm_level == LEVEL_CHARACTER:
        if trie is not None:
            raise TrieWithoutLexiconLevel(
                "character-level decoding is lexicon-free; drop the trie"
            )
        return _beam_char(
            emissions.frames,
            emissions.vocab,
            emissions.blank_index,
            config.beam_size,
            lm,
            config.lm_weight,
            config.unit_insertion_score,
        )
    if trie is None:
        raise MissingTrie(f"{config.lm_level}-level decoding needs a lexicon trie")
    return _beam_lexicon(
        emissions.frames,
        emissions.vocab,
        emissions.blank_index,
        config.beam_size,
        lm,
        config.lm_weight,
        config.unit_insertion_score,
        trie,
    )


def beam_decode(
    emissions: EmissionMatrix,
    config: DecodeConfig,
    lm: NGramModel | None = None,
    trie: LexiconTrie | None = None,
) -> list[tuple[str, float]]:
    """Top ``nbest`` (labeling, fused score) pairs, scores non-increasing."""
    hyps = beam_search(emissions, config, lm, trie)
    return [(h.labeling, h.fused_score) for h in hyps[: config.nbest]]


@dataclass
class DecodeResult:
    """Outcome of decoding one batch item."""

    id: str
    text: str
    score: float
    seconds: float
    nbest: tuple[tuple[str, float], ...] = ()
    error: str | None = None


def _greedy_score(emissions: EmissionMatrix) -> float:
    if emissions.frames.shape[0] == 0:
        return 0.0
    return float(emissions.frames.max(axis=1).sum())


def decode_batch(
    items: Sequence[tuple[str, str]],
    config: DecodeConfig,
    lm: NGramModel | None = None,
    trie: LexiconTrie | None = None,
    adapt_s2s: bool = False,
    greedy: bool | None = None,
) -> list[DecodeResult]:
    """Decode (id, emissions path) pairs independently.

    All matrices must share one vocabulary. Per-item failures are recorded
    on the result instead of aborting the batch. ``greedy`` defaults to
    decoding greedily exactly when no LM is supplied. Wall-clock seconds
    cover decoding (and adaptation), not file reading.
    """
    if greedy is None:
        greedy = lm is None
    results: list[DecodeResult] = []
    ref_vocab: tuple[str, ...] | None = None
    for item_id, path in items:
        try:
            em = read_emissions(path)
            start = time.perf_counter()
            if em.mode == MODE_S2S and adapt_s2s:
                from .s2s_adapter import adapt

                em = adapt(em)
            vocab_key = tuple(v for v in em.vocab if v not in ("<ctc>", "<eos>"))
            if ref_vocab is None:
                ref_vocab = vocab_key
            elif vocab_key != ref_vocab:
                raise VocabMismatch(
                    f"{path}: vocabulary differs from the batch's first item"
                )
            if greedy:
                if em.mode == MODE_CTC:
                    text = detokenize((greedy_ctc(em),))
                else:
                    text = detokenize((greedy_s2s(em),))
                score = _greedy_score(em)
                nbest: tuple[tuple[str, float], ...] = ((text, score),)
            else:
                ranked = beam_decode(em, config, lm, trie)
                if not ranked:
                    ranked = [("", NEG_INF)]
                nbest = tuple((detokenize((lab,)), sc) for lab, sc in ranked)
                text, score = nbest[0]
            seconds = time.perf_counter() - start
            results.append(
                DecodeResult(
                    id=item_id, text=text, score=score, seconds=seconds, nbest=nbest
                )
            )
        except ToolkitError as exc:
            results.append(
                DecodeResult(
                    id=item_id,
                    text="",
                    score=NEG_INF,
                    seconds=0.0,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return results
