"""Backoff n-gram language models: counting, smoothing, querying, ARPA io.

Models live in the log10 domain. Three estimators are provided:

* ``none``: maximum likelihood. Contexts that were seen forbid unseen
  continuations (backoff multiplier zero); contexts never seen back off
  with multiplier one.
* ``kneser-ney``: interpolated Kneser-Ney with one discount per order,
  D_k = n1 / (n1 + 2 n2) computed from the count-of-count statistics of
  that order's effective counts, falling back to 0.75 when n1 or n2 is
  zero. Orders below the top use continuation counts (number of distinct
  single-token left extensions); grams beginning with the start sentinel
  keep raw counts since no left extension of ``<s>`` exists.
* ``witten-bell``: P(w|c) = (raw(c,w) + T(c) P_lower(w)) / (C(c) + T(c))
  with backoff weight T(c) / (C(c) + T(c)), where T counts distinct
  successor types and C sums raw successor counts.

Both smoothed recursions bottom out in the uniform distribution over the
predicted vocabulary: every observed token plus ``</s>`` and ``<unk>``,
minus ``<s>``. The start sentinel is context-only and scores -inf as a
prediction; the unknown token is always part of the vocabulary. Under this
construction the conditional distribution of every stored context sums to
one exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    DataError,
    DegenerateCounts,
    EmptyCorpus,
    MalformedArpa,
    OrderMismatch,
    OrderOutOfRange,
    UsageError,
)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MAX_ORDER = 6
NEG_INF = float("-inf")

SMOOTHING_NONE = "none"
SMOOTHING_KNESER_NEY = "kneser-ney"
SMOOTHING_WITTEN_BELL = "witten-bell"
SMOOTHINGS = (SMOOTHING_NONE, SMOOTHING_KNESER_NEY, SMOOTHING_WITTEN_BELL)

_SECTION_RE = re.compile(r"\\(\d+)-grams:$")


@dataclass(frozen=True)
class CountTable:
    """Raw and continuation-adjusted n-gram counts.

    ``raw[k-1]`` maps each k-gram to its occurrence count over the padded
    corpus. ``adjusted[k-1]`` holds the Kneser-Ney effective counts: the
    number of distinct single-token left extensions, except at the top
    order and for grams starting with ``<s>``, which keep raw counts.
    """

    order: int
    raw: tuple[dict[tuple[str, ...], int], ...]
    adjusted: tuple[dict[tuple[str, ...], int], ...]
    sequences: int


def count_ngrams(sequences: Iterable[Sequence[str]], order: int) -> CountTable:
    """Count every k-window, k = 1..order, of each padded sequence.

    Each sequence is padded with (order - 1) start sentinels and one end
    sentinel; counting all window lengths at once closes the tables under
    prefixes and suffixes, which backoff estimation relies on. Order 1 gets
    no start padding.
    """
    if not 1 <= order <= MAX_ORDER:
        raise OrderOutOfRange(f"order must be in 1..{MAX_ORDER}, got {order}")
    raw: list[dict[tuple[str, ...], int]] = [{} for _ in range(order)]
    nseq = 0
    for seq in sequences:
        toks = tuple(seq)
        if BOS in toks or EOS in toks or UNK in toks:
            raise DataError(
                "sequences must not contain the reserved sentinels "
                f"{BOS} / {EOS} / {UNK}"
            )
        nseq += 1
        padded = (BOS,) * (order - 1) + toks + (EOS,)
        for k in range(1, order + 1):
            table = raw[k - 1]
            for i in range(len(padded) - k + 1):
                g = padded[i : i + k]
                table[g] = table.get(g, 0) + 1
    if nseq == 0:
        raise EmptyCorpus("counting needs at least one sequence")

    adjusted: list[dict[tuple[str, ...], int]] = []
    for k in range(1, order + 1):
        if k == order:
            adjusted.append(dict(raw[k - 1]))
            continue
        cont: dict[tuple[str, ...], int] = {}
        for g in raw[k]:
            suf = g[1:]
            cont[suf] = cont.get(suf, 0) + 1
        level: dict[tuple[str, ...], int] = {}
        for g, c in raw[k - 1].items():
            # Every stored gram not starting with <s> is the suffix of some
            # longer window, so the continuation count is always positive.
            level[g] = c if g[0] == BOS else cont[g]
        adjusted.append(level)

    return CountTable(
        order=order, raw=tuple(raw), adjusted=tuple(adjusted), sequences=nseq
    )


@dataclass
class NGramModel:
    """A backoff model in log10 domain.

    ``tables[k-1]`` maps each stored k-gram to (log10 probability, log10
    backoff weight). Backoff 0.0 means multiplier one; -inf means the
    context forbids unseen continuations. The backoff slot of a top-order
    gram is never consulted. Queries are memoized; models are treated as
    immutable after construction.
    """

    order: int
    smoothing: str
    predicted: frozenset[str]
    tables: tuple[dict[tuple[str, ...], tuple[float, float]], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def conditional(self, context: Sequence[str], token: str) -> float:
        """log10 P(token | context) with recursive backoff.

        Only the last (order - 1) context tokens are consulted. Tokens
        outside the vocabulary are mapped to the unknown symbol, both as
        the prediction and inside the context. The start sentinel is never
        predicted.
        """
        if token == BOS:
            return NEG_INF
        w = token if token in self.predicted else UNK
        if self.order == 1:
            ctx: tuple[str, ...] = ()
        else:
            tail = tuple(context)[max(0, len(context) - self.order + 1) :]
            ctx = tuple(t if t == BOS or t in self.predicted else UNK for t in tail)
        key = (ctx, w)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        acc = 0.0
        g = ctx + (w,)
        while True:
            entry = self.tables[len(g) - 1].get(g)
            if entry is not None:
                val = acc + entry[0]
                break
            if len(g) == 1:
                val = NEG_INF
                break
            centry = self.tables[len(g) - 2].get(g[:-1])
            if centry is not None:
                acc += centry[1]
            g = g[1:]
        self._cache[key] = val
        return val


def score_sequence(model: NGramModel, tokens: Sequence[str]) -> float:
    """log10 probability of a token sequence, including the end transition."""
    ctx: tuple[str, ...] = (BOS,) * (model.order - 1)
    total = 0.0
    for t in tuple(tokens) + (EOS,):
        total += model.conditional(ctx, t)
        if model.order > 1:
            ctx = ctx[1:] + (t,)
    return total


def perplexity(model: NGramModel, corpus: Iterable[Sequence[str]]) -> float:
    """Per-token perplexity over a corpus, end transitions included."""
    total = 0.0
    events = 0
    for seq in corpus:
        seq = tuple(seq)
        total += score_sequence(model, seq)
        events += len(seq) + 1
    if events == 0:
        raise EmptyCorpus("perplexity of an empty corpus is undefined")
    if total == NEG_INF:
        return float("inf")
    return 10.0 ** (-total / events)


def estimate(counts: CountTable, smoothing: str | None = SMOOTHING_KNESER_NEY) -> NGramModel:
    """Turn a count table into a backoff model.

    ``smoothing`` is one of "none", "kneser-ney", "witten-bell"; ``None``
    is an alias for "none". Raises DegenerateCounts when the corpus is
    empty, or under Kneser-Ney when it contains no real token occurrence
    (there is no continuation mass to redistribute).
    """
    if smoothing is None:
        smoothing = SMOOTHING_NONE
    if smoothing not in SMOOTHINGS:
        raise UsageError(f"unknown smoothing: {smoothing!r}")
    n = counts.order
    raw = counts.raw
    if counts.sequences == 0 or not raw[0]:
        raise EmptyCorpus("cannot estimate a model from zero sequences")
    kn = smoothing == SMOOTHING_KNESER_NEY
    wb = smoothing == SMOOTHING_WITTEN_BELL
    eff = counts.adjusted if kn else counts.raw

    predicted = {g[0] for g in raw[0] if g[0] != BOS} | {EOS, UNK}
    if kn and not (predicted - {EOS, UNK}):
        raise DegenerateCounts(
            "Kneser-Ney needs at least one non-sentinel token occurrence"
        )
    uniform = 1.0 / len(predicted)

    # Per-level context aggregates over successors, excluding the start
    # sentinel as a successor: [sum of effective counts, sum of raw counts,
    # number of distinct successor types]. stats[k-1] is keyed by the
    # (k-1)-gram contexts of level k.
    stats: list[dict[tuple[str, ...], list[float]]] = []
    for k in range(1, n + 1):
        agg: dict[tuple[str, ...], list[float]] = {}
        e_tab, r_tab = eff[k - 1], raw[k - 1]
        for g, r in r_tab.items():
            if g[-1] == BOS:
                continue
            a = agg.get(g[:-1])
            if a is None:
                a = [0.0, 0.0, 0.0]
                agg[g[:-1]] = a
            a[0] += e_tab[g]
            a[1] += r
            a[2] += 1
        stats.append(agg)

    discounts = [0.0] * (n + 1)
    if kn:
        for k in range(1, n + 1):
            n1 = sum(1 for v in eff[k - 1].values() if v == 1)
            n2 = sum(1 for v in eff[k - 1].values() if v == 2)
            discounts[k] = n1 / (n1 + 2.0 * n2) if n1 > 0 and n2 > 0 else 0.75

    # Probabilities in the linear domain, bottom up so interpolation can
    # read the lower order directly.
    linear: list[dict[tuple[str, ...], float]] = []
    for k in range(1, n + 1):
        level: dict[tuple[str, ...], float] = {}
        agg = stats[k - 1]
        D = discounts[k]
        for g, r in raw[k - 1].items():
            if g[-1] == BOS:
                level[g] = 0.0
                continue
            A, C, T = agg[g[:-1]]
            low = uniform if k == 1 else linear[k - 2][g[1:]]
            if kn:
                a = eff[k - 1][g]
                level[g] = max(a - D, 0.0) / A + (D * T / A) * low
            elif wb:
                level[g] = (r + T * low) / (C + T)
            else:
                level[g] = r / C
        linear.append(level)

    # The unknown token always gets a unigram entry: the interpolation
    # share of a zero-count token under the smoothed estimators, nothing
    # under maximum likelihood.
    if (UNK,) not in linear[0]:
        A, C, T = stats[0][()]
        if kn:
            p_unk = (discounts[1] * T / A) * uniform
        elif wb:
            p_unk = (T / (C + T)) * uniform
        else:
            p_unk = 0.0
        linear[0][(UNK,)] = p_unk
    if (BOS,) not in linear[0]:
        linear[0][(BOS,)] = 0.0

    tables: list[dict[tuple[str, ...], tuple[float, float]]] = []
    for k in range(1, n + 1):
        nxt = stats[k] if k < n else None
        tab: dict[tuple[str, ...], tuple[float, float]] = {}
        for g, p in linear[k - 1].items():
            lp = math.log10(p) if p > 0.0 else NEG_INF
            bo = 0.0
            if nxt is not None:
                a = nxt.get(g)
                if a is not None:
                    A, C, T = a
                    if kn:
                        bo = math.log10(discounts[k + 1] * T / A)
                    elif wb:
                        bo = math.log10(T / (C + T))
                    else:
                        bo = NEG_INF
            tab[g] = (lp, bo)
        tables.append(tab)

    return NGramModel(
        order=n,
        smoothing=smoothing,
        predicted=frozenset(predicted),
        tables=tuple(tables),
    )


def _fmt(x: float) -> str:
    return "-inf" if x == NEG_INF else "%.7g" % x


def write_arpa(model: NGramModel, path: str) -> None:
    """Serialize a model in the ARPA text format.

    Finite values use %.7g precision; minus infinity is written literally
    as ``-inf``, which is what lets unsmoothed models round-trip. Backoff
    columns equal to exactly 0.0 are omitted, and top-order entries never
    carry one. Entries are sorted for reproducible output.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(model.tables[k - 1])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for g in sorted(model.tables[k - 1]):
                lp, bo = model.tables[k - 1][g]
                line = _fmt(lp) + "\t" + " ".join(g)
                if k < model.order and bo != 0.0:
                    line += "\t" + _fmt(bo)
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def read_arpa(path: str) -> NGramModel:
    """Parse an ARPA file, tolerating common dialect variation.

    Accepts arbitrary preamble before the ``\\data\\`` header, mixed tab and
    space separators, omitted zero backoffs, the ``-99`` placeholder
    convention (kept as the finite value written), and the literal
    ``-inf``. Declared section sizes must match the entries parsed, and a
    top-order entry carrying a backoff weight is rejected.
    """
    counts: dict[int, int] = {}
    tables: dict[int, dict[tuple[str, ...], tuple[float, float]]] = {}
    state = "preamble"
    cur = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, 1):
            line = rawline.strip()
            if state == "preamble":
                if line == "\\data\\":
                    state = "header"
                continue
            if not line or state == "done":
                continue
            if state == "header":
                if line.startswith("ngram "):
                    body = line[len("ngram ") :]
                    try:
                        kpart, npart = body.split("=")
                        k = int(kpart)
                        counts[k] = int(npart)
                    except ValueError:
                        raise MalformedArpa(
                            f"{path}:{lineno}: bad count line {line!r}"
                        ) from None
                    if k < 1:
                        raise MalformedArpa(f"{path}:{lineno}: bad order {k}")
                    continue
                state = "sections"
            if line == "\\end\\":
                state = "done"
                continue
            m = _SECTION_RE.match(line)
            if m:
                cur = int(m.group(1))
                if cur not in counts:
                    raise MalformedArpa(
                        f"{path}:{lineno}: section \\{cur}-grams: was not declared"
                    )
                tables[cur] = {}
                continue
            if cur == 0:
                raise MalformedArpa(f"{path}:{lineno}: entry outside any section")
            fields = line.split()
            if len(fields) < cur + 1 or len(fields) > cur + 2:
                raise MalformedArpa(
                    f"{path}:{lineno}: expected {cur} tokens with probability"
                    f" and optional backoff, got {len(fields)} fields"
                )
            try:
                lp = float(fields[0])
            except ValueError:
                raise MalformedArpa(
                    f"{path}:{lineno}: bad probability {fields[0]!r}"
                ) from None
            g = tuple(fields[1 : 1 + cur])
            bo = 0.0
            if len(fields) == cur + 2:
                if cur == max(counts):
                    raise MalformedArpa(
                        f"{path}:{lineno}: top-order entry carries a backoff weight"
                    )
                try:
                    bo = float(fields[1 + cur])
                except ValueError:
                    raise MalformedArpa(
                        f"{path}:{lineno}: bad backoff {fields[1 + cur]!r}"
                    ) from None
            if g in tables[cur]:
                raise MalformedArpa(f"{path}:{lineno}: duplicate {cur}-gram {g}")
            tables[cur][g] = (lp, bo)

    if state == "preamble":
        raise MalformedArpa(f"{path}: no \\data\\ header found")
    if state != "done":
        raise MalformedArpa(f"{path}: missing \\end\\ terminator")
    if not counts:
        raise MalformedArpa(f"{path}: header declares no orders")
    n = max(counts)
    if sorted(counts) != list(range(1, n + 1)):
        raise MalformedArpa(f"{path}: declared orders are not contiguous from 1")
    if n > MAX_ORDER:
        raise OrderOutOfRange(f"{path}: order {n} exceeds the supported maximum {MAX_ORDER}")
    for k in range(1, n + 1):
        got = len(tables.get(k, {}))
        if got != counts[k]:
            raise OrderMismatch(
                f"{path}: header declares {counts[k]} {k}-grams, file has {got}"
            )
    for k in range(2, n + 1):
        for g in tables[k]:
            if g[:-1] not in tables[k - 1]:
                raise MalformedArpa(
                    f"{path}: {k}-gram {g} has no stored context {g[:-1]}"
                )

    predicted = {g[0] for g in tables[1] if g[0] != BOS}
    return NGramModel(
        order=n,
        smoothing="arpa-file",
        predicted=frozenset(predicted),
        tables=tuple(tables[k] for k in range(1, n + 1)),
    )
