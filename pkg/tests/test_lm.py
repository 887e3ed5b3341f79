import math

import numpy as np
import pytest

from atrlm import (
    BOS,
    EOS,
    UNK,
    DegenerateCounts,
    EmptyCorpus,
    MalformedArpa,
    NGramModel,
    OrderMismatch,
    OrderOutOfRange,
    count_ngrams,
    estimate,
    perplexity,
    read_arpa,
    score_sequence,
    write_arpa,
)

from oracles import (
    oracle_for,
    oracle_sequence_score,
    predicted_vocab,
    random_corpus,
)

TOY = [["a", "b", "a", "c", "a", "b"]]


def all_contexts(model, extra=()):
    """Every stored context plus a few adversarial ones."""
    contexts = {()}
    for k in range(1, model.order):
        contexts.update(model.tables[k - 1])
    contexts.update(extra)
    return sorted(contexts)


def assert_matches_oracle(model, oracle, tol=1e-9):
    vocab = sorted(oracle.vocab)
    probes = list(all_contexts(model, extra=[("zz",), tuple("zz"), (BOS,) * model.order]))
    for ctx in probes:
        for w in vocab + ["zz"]:
            got = model.conditional(ctx, w)
            want = oracle.log_conditional(ctx, w)
            if want == float("-inf"):
                assert got == float("-inf"), (ctx, w)
            else:
                assert got == pytest.approx(want, abs=1e-9), (ctx, w, got, want)


# ---------------------------------------------------------------------------
# counting


def test_count_examples():
    table = count_ngrams([["a", "b"]], 2)
    assert table.raw[1] == {(BOS, "a"): 1, ("a", "b"): 1, ("b", EOS): 1}
    table1 = count_ngrams([["a"]], 1)
    assert table1.raw[0] == {("a",): 1, (EOS,): 1}


def test_count_empty_corpus():
    with pytest.raises(EmptyCorpus):
        count_ngrams([], 2)


def test_count_order_out_of_range():
    for order in (0, 7, -1):
        with pytest.raises(OrderOutOfRange):
            count_ngrams([["a"]], order)


def test_count_rejects_sentinel_tokens():
    from atrlm import DataError

    for bad in (BOS, EOS, UNK):
        with pytest.raises(DataError):
            count_ngrams([["a", bad]], 2)


def test_count_prefix_suffix_closure():
    table = count_ngrams([["a", "b", "c"]], 3)
    trigrams = table.raw[2]
    bigrams = table.raw[1]
    unigrams = table.raw[0]
    for g in trigrams:
        assert g[:-1] in bigrams
        assert g[1:] in bigrams
    for g in bigrams:
        assert (g[0],) in unigrams
        assert (g[1],) in unigrams


# ---------------------------------------------------------------------------
# estimation against the direct-formula oracles


def test_mle_single_token_corpus():
    model = estimate(count_ngrams([["a", "a", "a"]], 1), "none")
    assert 10 ** model.conditional((), "a") == pytest.approx(0.75)
    assert 10 ** model.conditional((), EOS) == pytest.approx(0.25)


def test_kneser_ney_toy_value():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    # direct formula: D2 = 5/7 (five singleton bigrams, one doubleton),
    # P(b|a) = (2 - D2)/3 + D2*2/3 * P_cont(b)
    p_cont_b = (1 - 0.75) / 6 + (0.75 * 4 / 6) * (1 / 5)
    want = (2 - 5 / 7) / 3 + ((5 / 7) * 2 / 3) * p_cont_b
    assert 10 ** model.conditional(("a",), "b") == pytest.approx(want, abs=1e-12)


def test_kneser_ney_toy_against_oracle():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    assert_matches_oracle(model, oracle_for("kneser-ney", TOY, 2))


def test_unseen_token_finite_under_kn():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    assert model.conditional(("a",), "zz") > float("-inf")
    assert model.conditional(("never", "seen"), "zz") > float("-inf")


def test_mle_assigns_neg_inf_exactly_to_unseen_under_seen_context():
    model = estimate(count_ngrams(TOY, 2), "none")
    assert model.conditional(("a",), EOS) == float("-inf")
    assert model.conditional(("a",), "b") > float("-inf")
    # unseen context backs off to the unigram table
    assert model.conditional(("zz",), "a") == pytest.approx(
        model.conditional((), "a")
    )


@pytest.mark.parametrize("smoothing", ["kneser-ney", "witten-bell", "none"])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_random_corpora_match_oracles(smoothing, order):
    rng = np.random.default_rng(order * 100 + len(smoothing))
    for _ in range(5):
        corpus = random_corpus(rng, vocab_size=int(rng.integers(1, 5)),
                               n_sequences=int(rng.integers(1, 7)), max_len=6)
        if smoothing == "kneser-ney" and not any(corpus):
            continue
        model = estimate(count_ngrams(corpus, order), smoothing)
        assert_matches_oracle(model, oracle_for(smoothing, corpus, order))


@pytest.mark.parametrize("smoothing", ["kneser-ney", "witten-bell"])
@pytest.mark.parametrize("order", [1, 2, 4, 6])
def test_normalization(smoothing, order):
    rng = np.random.default_rng(17 + order)
    for _ in range(3):
        corpus = random_corpus(rng, vocab_size=int(rng.integers(1, 7)),
                               n_sequences=int(rng.integers(1, 12)), max_len=7)
        if smoothing == "kneser-ney" and not any(corpus):
            continue
        model = estimate(count_ngrams(corpus, order), smoothing)
        vocab = sorted(model.predicted)
        for ctx in all_contexts(model):
            total = sum(10 ** model.conditional(ctx, w) for w in vocab)
            assert total == pytest.approx(1.0, abs=1e-6), (ctx, total)


def test_degenerate_counts_only_for_sentinel_only_kn():
    with pytest.raises(DegenerateCounts):
        estimate(count_ngrams([[]], 1), "kneser-ney")
    # the same counts are fine under the other smoothings
    estimate(count_ngrams([[]], 1), "witten-bell")
    estimate(count_ngrams([[]], 1), "none")
    # a single-type corpus works under KN thanks to the discount fallback
    estimate(count_ngrams([["a", "a", "a"]], 1), "kneser-ney")


def test_duplicated_corpus_leaves_mle_unchanged():
    corpus = [["a", "b"], ["b", "a", "a"]]
    m1 = estimate(count_ngrams(corpus, 2), "none")
    m2 = estimate(count_ngrams(corpus * 3, 2), "none")
    for ctx in all_contexts(m1):
        for w in sorted(m1.predicted):
            assert m1.conditional(ctx, w) == pytest.approx(
                m2.conditional(ctx, w), abs=1e-12
            )


def test_backoff_consistency():
    # for events absent from the top table, the conditional equals the
    # context's backoff weight plus the shortened-context conditional
    corpus = [["a", "b", "c"], ["b", "c", "a"], ["a", "b", "a"]]
    model = estimate(count_ngrams(corpus, 3), "kneser-ney")
    top = model.tables[2]
    for ctx in model.tables[1]:
        bo = model.tables[1][ctx][1]
        for w in sorted(model.predicted):
            if ctx + (w,) in top:
                continue
            assert model.conditional(ctx, w) == pytest.approx(
                bo + model.conditional(ctx[1:], w), abs=1e-12
            )


def test_bos_never_predicted():
    for smoothing in ("kneser-ney", "witten-bell", "none"):
        model = estimate(count_ngrams(TOY, 2), smoothing)
        assert model.conditional((), BOS) == float("-inf")
        assert model.conditional(("a",), BOS) == float("-inf")


# ---------------------------------------------------------------------------
# scoring


def test_score_sequence_empty():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    assert score_sequence(model, []) == pytest.approx(
        model.conditional((BOS,), EOS)
    )


def test_score_sequence_composes_conditionals():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    oracle = oracle_for("kneser-ney", TOY, 2)
    assert score_sequence(model, ["a", "b"]) == pytest.approx(
        oracle_sequence_score(oracle, ["a", "b"]), abs=1e-9
    )


def test_score_sequence_mle_unigram():
    model = estimate(count_ngrams([["a", "a", "a"]], 1), "none")
    want = 3 * math.log10(0.75) + math.log10(0.25)
    assert score_sequence(model, ["a", "a", "a"]) == pytest.approx(want)


def test_perplexity_uniform():
    third = math.log10(1.0 / 3.0)
    model = NGramModel(
        order=1,
        smoothing="none",
        predicted=frozenset({"a", "b", EOS}),
        tables=({("a",): (third, 0.0), ("b",): (third, 0.0), (EOS,): (third, 0.0)},),
    )
    assert perplexity(model, [["a", "b"], ["b", "a", "a"]]) == pytest.approx(3.0)


def test_perplexity_mle_beats_kn_on_training_data():
    corpus = [["a", "b", "a"], ["b", "a", "b", "b"]]
    counts = count_ngrams(corpus, 2)
    assert perplexity(estimate(counts, "none"), corpus) <= perplexity(
        estimate(counts, "kneser-ney"), corpus
    ) + 1e-9


def test_perplexity_empty_corpus():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    with pytest.raises(EmptyCorpus):
        perplexity(model, [])


def test_perplexity_toy_oracle_value():
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    oracle = oracle_for("kneser-ney", TOY, 2)
    total = sum(oracle_sequence_score(oracle, seq) for seq in TOY)
    events = sum(len(seq) + 1 for seq in TOY)
    assert perplexity(model, TOY) == pytest.approx(10 ** (-total / events))


# ---------------------------------------------------------------------------
# ARPA serialization


def test_arpa_round_trip_scores(tmp_path):
    rng = np.random.default_rng(5)
    for i, smoothing in enumerate(["kneser-ney", "witten-bell", "none"]):
        for order in (1, 2, 3, 5):
            corpus = random_corpus(rng, vocab_size=4, n_sequences=6, max_len=6)
            if not any(corpus):
                corpus[0] = ["a"]
            model = estimate(count_ngrams(corpus, order), smoothing)
            path = tmp_path / f"m{i}_{order}.arpa"
            write_arpa(model, path)
            loaded = read_arpa(path)
            for ctx in all_contexts(model, extra=[("zz",)]):
                for w in sorted(model.predicted):
                    a = model.conditional(ctx, w)
                    b = loaded.conditional(ctx, w)
                    if a == float("-inf"):
                        assert b == float("-inf"), (ctx, w)
                    else:
                        assert b == pytest.approx(a, abs=1e-4), (ctx, w)


def test_arpa_format_surface(tmp_path):
    model = estimate(count_ngrams(TOY, 2), "kneser-ney")
    path = tmp_path / "toy.arpa"
    write_arpa(model, path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    assert lines[0] == "\\data\\"
    assert "ngram 1=" in text and "ngram 2=" in text
    assert "\\1-grams:" in lines and "\\2-grams:" in lines
    assert lines[-1] == "\\end\\"
    in_top = False
    for line in lines:
        if line == "\\2-grams:":
            in_top = True
        elif line.startswith("\\"):
            in_top = False
        elif in_top and line:
            assert len(line.split("\t")) == 2  # no backoff column at top order


def test_arpa_header_count_mismatch(tmp_path):
    path = tmp_path / "bad.arpa"
    path.write_text(
        "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n-0.5\tb\n-0.5\tc\n\n\\end\\\n",
        encoding="utf-8",
    )
    with pytest.raises(MalformedArpa):
        read_arpa(path)
    with pytest.raises(OrderMismatch):
        read_arpa(path)


def test_arpa_reader_rejects_garbage(tmp_path):
    cases = {
        "empty": "",
        "no_data": "\\1-grams:\n-0.5\ta\n\\end\\\n",
        "no_end": "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n",
        "bad_prob": "\\data\\\nngram 1=1\n\n\\1-grams:\nxx\ta\n\n\\end\\\n",
        "dup": "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n-0.6\ta\n\n\\end\\\n",
        "orphan_context": (
            "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.3\ta\n\n"
            "\\2-grams:\n-0.3\tb a\n\n\\end\\\n"
        ),
    }
    for name, text in cases.items():
        path = tmp_path / f"{name}.arpa"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(MalformedArpa):
            read_arpa(path)


def test_arpa_reader_rejects_order_above_limit(tmp_path):
    header = "\\data\\\n" + "".join(f"ngram {k}=1\n" for k in range(1, 8))
    body = "\n\\1-grams:\n-0.5\ta\n\n\\end\\\n"
    path = tmp_path / "deep.arpa"
    path.write_text(header + body, encoding="utf-8")
    with pytest.raises(OrderOutOfRange):
        read_arpa(path)


def test_foreign_fixture_dialect(datadir):
    model = read_arpa(datadir / "foreign.arpa")
    # frozen expectations, hand-derived from the file contents
    expect = {
        ((BOS,), "a"): 0.5,
        ((BOS,), "b"): 5 / 6 * 0.3,
        ((BOS,), EOS): 5 / 6 * 0.2,
        ((BOS,), UNK): 5 / 6 * 0.1,
        (("a",), "a"): 0.3,
        (("a",), "b"): 0.25,
        (("a",), EOS): 0.2,
        (("a",), UNK): 2.5 * 0.1,
        (("b",), "a"): 0.5,
        (("b",), EOS): 0.3,
        (("b",), "b"): 0.5 * 0.3,
        (("b",), UNK): 0.5 * 0.1,
        ((), "a"): 0.4,
        (("zz",), "a"): 0.4,
        (("a", "b"), "b"): 0.15,
    }
    for (ctx, w), p in expect.items():
        assert 10 ** model.conditional(ctx, w) == pytest.approx(p, abs=1e-4), (ctx, w)
    for ctx in ((BOS,), ("a",), ("b",)):
        total = sum(10 ** model.conditional(ctx, w) for w in ("a", "b", EOS, UNK))
        assert total == pytest.approx(1.0, abs=1e-4)


def test_foreign_fixture_round_trips(tmp_path, datadir):
    model = read_arpa(datadir / "foreign.arpa")
    path = tmp_path / "rt.arpa"
    write_arpa(model, path)
    again = read_arpa(path)
    for ctx in ((), (BOS,), ("a",), ("b",)):
        for w in ("a", "b", EOS, UNK):
            assert again.conditional(ctx, w) == pytest.approx(
                model.conditional(ctx, w), abs=1e-6
            )


def test_order_six_estimable_and_queryable():
    corpus = [list("ababcba"), list("aabbcc"), list("cabab")]
    model = estimate(count_ngrams(corpus, 6), "kneser-ney")
    assert model.order == 6
    score = score_sequence(model, list("abab"))
    assert math.isfinite(score)
    vocab = sorted(model.predicted)
    for ctx in [(), ("a", "b", "a", "b", "c"), (BOS,) * 5]:
        total = sum(10 ** model.conditional(ctx, w) for w in vocab)
        assert total == pytest.approx(1.0, abs=1e-6)
