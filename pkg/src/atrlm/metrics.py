"""Edit distance, CER/WER aggregation, and the decoding grid search.

Corpus metrics are distance sums over reference length sums, never means
of per-item ratios. CER counts Unicode scalars (via the character
tokenizer, so spaces participate like any symbol); WER splits raw text on
whitespace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .decoder import DecodeConfig, beam_decode
from .errors import DataError, EmptyCorpus, ToolkitError, UsageError
from .io import EmissionMatrix
from .lexicon import LexiconTrie
from .lm import NGramModel
from .tokenizer import tokenize_chars

OBJECTIVE_CER = "cer"
OBJECTIVE_WER = "wer"
OBJECTIVES = (OBJECTIVE_CER, OBJECTIVE_WER)


class EditCounts(NamedTuple):
    distance: int
    substitutions: int
    insertions: int
    deletions: int


def edit_distance(reference: Sequence, hypothesis: Sequence) -> EditCounts:
    """Unit-cost Levenshtein distance with an operation breakdown.

    Deletions remove reference tokens, insertions add hypothesis tokens.
    When several minimal paths exist the backtrace prefers substitutions,
    then deletions, then insertions.
    """
    a, b = list(reference), list(hypothesis)
    n, m = len(a), len(b)
    if m == 0:
        return EditCounts(n, 0, 0, n)
    if n == 0:
        return EditCounts(m, 0, m, 0)

    codes: dict = {}
    ca = np.array([codes.setdefault(t, len(codes)) for t in a], dtype=np.int64)
    cb = np.array([codes.setdefault(t, len(codes)) for t in b], dtype=np.int64)
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    d[0] = np.arange(m + 1)
    ar = np.arange(m + 1, dtype=np.int32)
    cand = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        prev = d[i - 1]
        cost = (cb != ca[i - 1]).astype(np.int32)
        cand[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + cost, out=cand[1:])
        # The insertion chain d[i][j] = min(cand[j], d[i][j-1]+1) unrolls
        # to a running minimum of cand[k] - k.
        d[i] = np.minimum.accumulate(cand - ar) + ar

    i, j = n, m
    subs = ins = dels = 0
    while i > 0 or j > 0:
        v = d[i, j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and v == d[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and v == d[i - 1, j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and v == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(int(d[n, m]), subs, ins, dels)


@dataclass(frozen=True)
class EvalItem:
    id: str
    reference: str
    hypothesis: str
    char_distance: int
    word_distance: int
    ref_chars: int
    ref_words: int
    seconds: float | None = None


@dataclass(frozen=True)
class EvalReport:
    """Corpus CER/WER with edit-operation counts and per-item details."""

    items: tuple[EvalItem, ...]
    char_counts: EditCounts
    word_counts: EditCounts
    ref_chars: int
    ref_words: int

    @staticmethod
    def _rate(distance: int, total: int) -> float:
        if total == 0:
            return 0.0 if distance == 0 else float("inf")
        return distance / total

    @property
    def cer(self) -> float:
        return self._rate(self.char_counts.distance, self.ref_chars)

    @property
    def wer(self) -> float:
        return self._rate(self.word_counts.distance, self.ref_words)

    @property
    def seconds(self) -> list[float]:
        return [it.seconds for it in self.items if it.seconds is not None]

    def to_dict(self) -> dict:
        out: dict = {
            "cer": self.cer,
            "wer": self.wer,
            "ref_chars": self.ref_chars,
            "ref_words": self.ref_words,
            "char_errors": self.char_counts._asdict(),
            "word_errors": self.word_counts._asdict(),
            "items": [
                {
                    "id": it.id,
                    "reference": it.reference,
                    "hypothesis": it.hypothesis,
                    "char_distance": it.char_distance,
                    "word_distance": it.word_distance,
                    "ref_chars": it.ref_chars,
                    "ref_words": it.ref_words,
                    **({"seconds": it.seconds} if it.seconds is not None else {}),
                }
                for it in self.items
            ],
        }
        secs = self.seconds
        if secs:
            out["timing"] = {
                "total_seconds": sum(secs),
                "mean_seconds": sum(secs) / len(secs),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def format_table(self) -> str:
        """Aligned text table with percentages to two decimals."""

        def pct(x: float) -> str:
            return "inf" if x == float("inf") else f"{100.0 * x:.2f}"

        rows = [("id", "cer%", "wer%", "seconds")]
        for it in self.items:
            rows.append(
                (
                    it.id,
                    pct(self._rate(it.char_distance, it.ref_chars)),
                    pct(self._rate(it.word_distance, it.ref_words)),
                    f"{it.seconds:.3f}" if it.seconds is not None else "-",
                )
            )
        secs = self.seconds
        rows.append(
            (
                "corpus",
                pct(self.cer),
                pct(self.wer),
                f"{sum(secs) / len(secs):.3f}" if secs else "-",
            )
        )
        widths = [max(len(r[c]) for r in rows) for c in range(4)]
        lines = []
        for idx, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
            if idx == 0 or idx == len(rows) - 2:
                lines.append("  ".join("-" * widths[c] for c in range(4)))
        return "\n".join(lines)


def evaluate(
    pairs: Sequence[tuple[str, str]],
    ids: Sequence[str] | None = None,
    seconds: Sequence[float | None] | None = None,
) -> EvalReport:
    """Score (reference, hypothesis) pairs into a corpus report."""
    items: list[EvalItem] = []
    csum = np.zeros(4, dtype=np.int64)
    wsum = np.zeros(4, dtype=np.int64)
    ref_chars = ref_words = 0
    for i, (ref, hyp) in enumerate(pairs):
        rc = tokenize_chars(ref)
        hc = tokenize_chars(hyp)
        rw = ref.split()
        hw = hyp.split()
        cdist = edit_distance(rc, hc)
        wdist = edit_distance(rw, hw)
        csum += np.array(cdist, dtype=np.int64)
        wsum += np.array(wdist, dtype=np.int64)
        ref_chars += len(rc)
        ref_words += len(rw)
        items.append(
            EvalItem(
                id=ids[i] if ids is not None else str(i),
                reference=ref,
                hypothesis=hyp,
                char_distance=cdist.distance,
                word_distance=wdist.distance,
                ref_chars=len(rc),
                ref_words=len(rw),
                seconds=seconds[i] if seconds is not None else None,
            )
        )
    return EvalReport(
        items=tuple(items),
        char_counts=EditCounts(*(int(x) for x in csum)),
        word_counts=EditCounts(*(int(x) for x in wsum)),
        ref_chars=ref_chars,
        ref_words=ref_words,
    )


@dataclass(frozen=True)
class TuneGrid:
    """Grid axes for the decoding hyperparameter search."""

    lm_weights: tuple[float, ...] = tuple(i * 0.5 for i in range(11))
    orders: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    objective: str = OBJECTIVE_WER

    def __post_init__(self) -> None:
        if not self.lm_weights or not self.orders:
            raise UsageError("grid axes must be non-empty")
        if any(w < 0 for w in self.lm_weights):
            raise UsageError("lm weights must be non-negative")
        if self.objective not in OBJECTIVES:
            raise UsageError(f"objective must be one of {OBJECTIVES}")


@dataclass(frozen=True)
class TunePoint:
    order: int
    lm_weight: float
    cer: float | None
    wer: float | None
    objective_value: float | None
    error: str | None = None


@dataclass(frozen=True)
class TuneResult:
    best_order: int
    best_weight: float
    objective: str
    points: tuple[TunePoint, ...]

    def to_dict(self) -> dict:
        return {
            "best_order": self.best_order,
            "best_weight": self.best_weight,
            "objective": self.objective,
            "points": [
                {
                    "order": p.order,
                    "lm_weight": p.lm_weight,
                    "cer": p.cer,
                    "wer": p.wer,
                    "objective_value": p.objective_value,
                    **({"error": p.error} if p.error else {}),
                }
                for p in self.points
            ],
        }


def tune(
    valset: Sequence[tuple[EmissionMatrix, str]],
    grid: TuneGrid,
    lm_family: Mapping[int, NGramModel],
    base_config: DecodeConfig,
    tries: Mapping[int, LexiconTrie] | LexiconTrie | None = None,
) -> TuneResult:
    """Decode the validation set at every grid point and pick the argmin.

    Ties prefer the smaller weight, then the smaller order. A grid point
    whose decode fails is kept in the surface, marked with the error. The
    weight-0 column never queries the LM, so it is exactly the LM-free
    baseline.
    """
    if not valset:
        raise EmptyCorpus("tuning needs a non-empty validation set")
    missing = [o for o in grid.orders if o not in lm_family]
    if missing:
        raise UsageError(f"lm family has no model of order {missing[0]}")

    points: list[TunePoint] = []
    best: tuple[float, float, int] | None = None
    for order in grid.orders:
        model = lm_family[order]
        trie = tries.get(order) if isinstance(tries, Mapping) else tries
        for weight in grid.lm_weights:
            config = replace(base_config, lm_weight=weight)
            try:
                pairs = []
                for em, ref in valset:
                    ranked = beam_decode(em, config, model, trie)
                    pairs.append((ref, ranked[0][0] if ranked else ""))
                report = evaluate(pairs)
                value = report.cer if grid.objective == OBJECTIVE_CER else report.wer
                points.append(
                    TunePoint(
                        order=order,
                        lm_weight=weight,
                        cer=report.cer,
                        wer=report.wer,
                        objective_value=value,
                    )
                )
                key = (value, weight, order)
                if best is None or key < best:
                    best = key
            except ToolkitError as exc:
                points.append(
                    TunePoint(
                        order=order,
                        lm_weight=weight,
                        cer=None,
                        wer=None,
                        objective_value=None,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
    if best is None:
        raise DataError("every grid point failed to decode")
    return TuneResult(
        best_order=best[2],
        best_weight=best[1],
        objective=grid.objective,
        points=tuple(points),
    )
