import math

import numpy as np
import pytest

from atrlm import (
    BLANK_SYMBOL,
    EOS_SYMBOL,
    DecodeConfig,
    EmissionMatrix,
    MissingTrie,
    ModeMismatch,
    TrieWithoutLexiconLevel,
    UsageError,
    beam_decode,
    beam_search,
    build_lexicon,
    build_trie,
    count_ngrams,
    decode_batch,
    estimate,
    greedy_ctc,
    greedy_s2s,
    unit_scores_from_lm,
    write_emissions,
)

from oracles import best_labeling, oracle_for, oracle_lm_log10, random_log_posteriors

LN10 = math.log(10.0)
CHAR_VOCAB = ("a", "b", BLANK_SYMBOL)


def ctc_from_rows(rows, vocab=CHAR_VOCAB):
    frames = np.log(np.asarray(rows, dtype=np.float64)).astype(np.float32)
    return EmissionMatrix(
        frames=frames,
        vocab=vocab,
        mode="ctc",
        blank_index=len(vocab) - 1,
        eos_index=None,
    )


def random_ctc(rng, T, vocab=CHAR_VOCAB):
    return EmissionMatrix(
        frames=random_log_posteriors(rng, T, len(vocab)),
        vocab=vocab,
        mode="ctc",
        blank_index=len(vocab) - 1,
        eos_index=None,
    )


def peaked(symbols, vocab=CHAR_VOCAB, peak=0.98):
    rows = []
    rest = (1.0 - peak) / (len(vocab) - 1)
    for sym in symbols:
        row = [rest] * len(vocab)
        row[vocab.index(sym)] = peak
        rows.append(row)
    return ctc_from_rows(rows, vocab)


# ---------------------------------------------------------------------------
# greedy decoding


def test_greedy_ctc_collapse():
    em = peaked(["a", "a", BLANK_SYMBOL, "a", "b"])
    assert greedy_ctc(em) == "aab"


def test_greedy_ctc_all_blank():
    em = peaked([BLANK_SYMBOL, BLANK_SYMBOL])
    assert greedy_ctc(em) == ""


def test_greedy_ctc_single_frame():
    em = peaked(["b"])
    assert greedy_ctc(em) == "b"


def test_greedy_ctc_mode_check():
    rng = np.random.default_rng(0)
    s2s = EmissionMatrix(
        frames=random_log_posteriors(rng, 2, 3),
        vocab=("a", "b", EOS_SYMBOL),
        mode="s2s",
        blank_index=None,
        eos_index=2,
    )
    with pytest.raises(ModeMismatch):
        greedy_ctc(s2s)
    with pytest.raises(ModeMismatch):
        greedy_s2s(peaked(["a"]))


def s2s_peaked(symbols, vocab=("h", "i", "x", EOS_SYMBOL)):
    rows = []
    for sym in symbols:
        row = [0.01] * len(vocab)
        row[vocab.index(sym)] = 1.0 - 0.01 * (len(vocab) - 1)
        rows.append(row)
    frames = np.log(np.asarray(rows, dtype=np.float64)).astype(np.float32)
    return EmissionMatrix(
        frames=frames, vocab=vocab, mode="s2s", blank_index=None,
        eos_index=len(vocab) - 1,
    )


def test_greedy_s2s_truncates_at_eos():
    assert greedy_s2s(s2s_peaked(["h", "i", EOS_SYMBOL, "x"])) == "hi"


def test_greedy_s2s_eos_first():
    assert greedy_s2s(s2s_peaked([EOS_SYMBOL, "h"])) == ""


def test_greedy_s2s_no_eos_warns_and_returns_all():
    with pytest.warns(UserWarning):
        assert greedy_s2s(s2s_peaked(["h", "i", "x"])) == "hix"


# ---------------------------------------------------------------------------
# beam search against the exhaustive oracle


def toy_lm(order=2):
    corpus = [list("abba"), list("baab"), list("ab"), list("aa")]
    return estimate(count_ngrams(corpus, order), "kneser-ney"), oracle_for(
        "kneser-ney", corpus, order
    )


@pytest.mark.parametrize("alpha", [0.0, 1.5])
def test_beam_matches_oracle_small_matrices(alpha):
    lm, lm_oracle = toy_lm()
    rng = np.random.default_rng(42)
    for trial in range(40):
        T = int(rng.integers(0, 5))
        em = random_ctc(rng, T)
        config = DecodeConfig(
            lm_level="character", beam_size=81, lm_weight=alpha,
            unit_insertion_score=float(rng.uniform(-0.5, 0.5)),
        )
        got_lab, got_score = beam_decode(
            em, config, lm if alpha > 0 else None
        )[0]
        want_lab, want_score = best_labeling(
            em.frames.astype(np.float64), em.vocab, em.blank_index,
            lm_oracle if alpha > 0 else None, alpha,
            config.unit_insertion_score,
        )
        assert got_lab == want_lab, (trial, got_lab, want_lab)
        assert got_score == pytest.approx(want_score, abs=1e-6)


def test_strong_lm_overrides_acoustics():
    # uniform emissions say nothing; an LM that loves "a" decides
    corpus = [["a"], ["a"], ["a", "a"], ["a"]]
    lm = estimate(count_ngrams(corpus, 2), "kneser-ney")
    lm_oracle = oracle_for("kneser-ney", corpus, 2)
    em = ctc_from_rows([[1 / 3] * 3] * 3)
    config = DecodeConfig(lm_level="character", beam_size=81, lm_weight=8.0)
    got_lab, got_score = beam_decode(em, config, lm)[0]
    want_lab, want_score = best_labeling(
        em.frames.astype(np.float64), em.vocab, em.blank_index, lm_oracle, 8.0, 0.0
    )
    assert got_lab == want_lab
    assert set(got_lab) <= {"a"}
    assert got_score == pytest.approx(want_score, abs=1e-6)


def test_beam_size_one_does_not_crash():
    rng = np.random.default_rng(7)
    em = random_ctc(rng, 4)
    config = DecodeConfig(lm_level="character", beam_size=1, lm_weight=0.0)
    (labeling, score), = beam_decode(em, config, None)
    assert isinstance(labeling, str)
    assert score > float("-inf")


def test_empty_matrix_decodes_to_empty():
    em = EmissionMatrix(
        frames=np.zeros((0, 3), dtype=np.float32), vocab=CHAR_VOCAB,
        mode="ctc", blank_index=2, eos_index=None,
    )
    config = DecodeConfig(lm_level="character", beam_size=4, lm_weight=0.0)
    assert beam_decode(em, config, None)[0][0] == ""


def test_lm_free_and_zero_weight_agree_exactly():
    lm, _ = toy_lm()
    rng = np.random.default_rng(11)
    for _ in range(10):
        em = random_ctc(rng, 4)
        cfg0 = DecodeConfig(lm_level="character", beam_size=8, lm_weight=0.0)
        without = beam_decode(em, cfg0, None)
        with_lm = beam_decode(em, cfg0, lm)
        assert without == with_lm


def test_fused_score_is_affine_in_alpha():
    lm, lm_oracle = toy_lm()
    em = peaked(["a", BLANK_SYMBOL, "b"])
    scores = {}
    for alpha in (0.5, 1.0, 2.0):
        config = DecodeConfig(lm_level="character", beam_size=81, lm_weight=alpha)
        for lab, sc in beam_decode(
            em, config, lm, None
        ) if False else [beam_decode(em, config, lm)[0]]:
            if lab == "ab":
                scores[alpha] = sc
    assert set(scores) == {0.5, 1.0, 2.0}
    slope_expected = LN10 * oracle_lm_log10(lm_oracle, ("a", "b"))
    slope1 = (scores[1.0] - scores[0.5]) / 0.5
    slope2 = (scores[2.0] - scores[1.0]) / 1.0
    assert slope1 == pytest.approx(slope_expected, abs=1e-6)
    assert slope2 == pytest.approx(slope_expected, abs=1e-6)


def test_mass_conservation_with_exhaustive_beam():
    rng = np.random.default_rng(13)
    for _ in range(10):
        em = random_ctc(rng, 3)
        config = DecodeConfig(lm_level="character", beam_size=64, lm_weight=0.0)
        hyps = beam_search(em, config, None)
        total = sum(math.exp(h.acoustic) for h in hyps)
        assert total <= 1.0 + 1e-6
        assert total == pytest.approx(1.0, abs=1e-5)


def test_nbest_ordering_and_contents():
    lm, lm_oracle = toy_lm()
    rng = np.random.default_rng(19)
    em = random_ctc(rng, 3)
    config = DecodeConfig(
        lm_level="character", beam_size=81, lm_weight=1.5, nbest=5
    )
    ranked = beam_decode(em, config, lm)
    assert len(ranked) == 5
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)
    from oracles import ranked_labelings

    want = ranked_labelings(
        em.frames.astype(np.float64), em.vocab, em.blank_index, lm_oracle, 1.5, 0.0
    )[:5]
    for (glab, gsc), (wlab, wsc) in zip(ranked, want):
        assert glab == wlab
        assert gsc == pytest.approx(wsc, abs=1e-6)


def test_deterministic_tie_break_prefers_lexicographic():
    # two symbols with identical emissions everywhere: "a…" ties "b…"
    em = ctc_from_rows([[0.45, 0.45, 0.10]])
    config = DecodeConfig(lm_level="character", beam_size=16, lm_weight=0.0, nbest=2)
    ranked = beam_decode(em, config, None)
    assert ranked[0][0] == "a"
    assert ranked[1][0] == "b"
    assert ranked[0][1] == pytest.approx(ranked[1][1])


def test_config_validation():
    with pytest.raises(UsageError):
        DecodeConfig(beam_size=0)
    with pytest.raises(UsageError):
        DecodeConfig(nbest=9, beam_size=4)
    with pytest.raises(UsageError):
        DecodeConfig(lm_weight=-0.5)
    with pytest.raises(UsageError):
        DecodeConfig(lm_level="sentence")


def test_default_weights_by_level():
    assert DecodeConfig(lm_level="character").lm_weight == pytest.approx(1.5)
    assert DecodeConfig(lm_level="subword").lm_weight == pytest.approx(1.5)
    assert DecodeConfig(lm_level="word").lm_weight == pytest.approx(0.5)


def test_trie_level_consistency_checks():
    lm, _ = toy_lm()
    rng = np.random.default_rng(3)
    em = random_ctc(rng, 2)
    lex = build_lexicon([["a"], ["ab"]], "word")
    trie = build_trie(lex, unit_scores_from_lm(lex, lm))
    with pytest.raises(TrieWithoutLexiconLevel):
        beam_search(em, DecodeConfig(lm_level="character"), lm, trie)
    with pytest.raises(MissingTrie):
        beam_search(em, DecodeConfig(lm_level="word"), lm, None)


def test_beam_rejects_s2s_matrices():
    rng = np.random.default_rng(1)
    s2s = EmissionMatrix(
        frames=random_log_posteriors(rng, 2, 3),
        vocab=("a", "b", EOS_SYMBOL),
        mode="s2s",
        blank_index=None,
        eos_index=2,
    )
    with pytest.raises(ModeMismatch):
        beam_search(s2s, DecodeConfig(lm_level="character"), None)


# ---------------------------------------------------------------------------
# lexicon-constrained decoding


def word_setup(corpus_lines, order=2):
    from atrlm import tokenize_words

    seqs = [tokenize_words(line) for line in corpus_lines]
    lm = estimate(count_ngrams(seqs, order), "kneser-ney")
    lex = build_lexicon(seqs, "word")
    trie = build_trie(lex, unit_scores_from_lm(lex, lm))
    return lm, lex, trie


def test_lexicon_soundness():
    lm, lex, trie = word_setup(["ab ba", "ba ab", "aa"])
    vocab = ("a", "b", "▁", BLANK_SYMBOL)
    rng = np.random.default_rng(23)
    spellings = {"".join(sp) for sp in lex.entries.values()}
    for _ in range(25):
        em = EmissionMatrix(
            frames=random_log_posteriors(rng, int(rng.integers(1, 7)), 4),
            vocab=vocab, mode="ctc", blank_index=3, eos_index=None,
        )
        config = DecodeConfig(lm_level="word", beam_size=12, lm_weight=0.6, nbest=3)
        for labeling, _score in beam_decode(em, config, lm, trie):
            rest = labeling
            while rest:
                for unit in sorted(spellings, key=len, reverse=True):
                    if rest.startswith(unit):
                        rest = rest[len(unit):]
                        break
                else:
                    raise AssertionError(
                        f"labeling {labeling!r} does not segment into units"
                    )


def test_lexicon_mode_matches_restricted_oracle():
    # single-character units make the lexicon constraint vacuous, so the
    # lexicon decoder must agree with the exhaustive unconstrained oracle
    corpus = [["a"], ["b"], ["a", "b"], ["b", "a"]]
    lm = estimate(count_ngrams(corpus, 2), "kneser-ney")
    lm_oracle = oracle_for("kneser-ney", corpus, 2)
    lex = build_lexicon(corpus, "word")
    trie = build_trie(lex, unit_scores_from_lm(lex, lm))
    rng = np.random.default_rng(31)
    for _ in range(25):
        em = random_ctc(rng, int(rng.integers(0, 4)))
        config = DecodeConfig(lm_level="word", beam_size=100, lm_weight=1.5)
        got_lab, got_score = beam_decode(em, config, lm, trie)[0]
        want_lab, want_score = best_labeling(
            em.frames.astype(np.float64), em.vocab, em.blank_index,
            lm_oracle, 1.5, 0.0,
        )
        assert got_lab == want_lab
        assert got_score == pytest.approx(want_score, abs=1e-6)


def test_lexicon_decode_clean_signal_recovers_text():
    lm, lex, trie = word_setup(["the cat sat", "the mat sat", "a cat"])
    text = "the cat sat"
    chars = sorted(set(text.replace(" ", "▁")))
    vocab = tuple(chars) + (BLANK_SYMBOL,)
    em = peaked(list(text.replace(" ", "▁")), vocab, peak=0.995)
    config = DecodeConfig(lm_level="word", beam_size=20, lm_weight=0.5)
    labeling, _ = beam_decode(em, config, lm, trie)[0]
    assert labeling == text.replace(" ", "▁")


def test_lexicon_prunes_out_of_vocabulary_strings():
    lm, lex, trie = word_setup(["ab", "ba"])
    vocab = ("a", "b", "c", BLANK_SYMBOL)
    em = peaked(["c", "c"], vocab, peak=0.97)
    config = DecodeConfig(lm_level="word", beam_size=16, lm_weight=0.5, nbest=4)
    for labeling, _ in beam_decode(em, config, lm, trie):
        assert "c" not in labeling


# ---------------------------------------------------------------------------
# batch decoding


def test_decode_batch_empty():
    config = DecodeConfig(lm_level="character")
    assert decode_batch([], config) == []


def test_decode_batch_single_and_errors(tmp_path):
    rng = np.random.default_rng(5)
    good = random_ctc(rng, 3)
    write_emissions(good, tmp_path / "good.npy")
    (tmp_path / "bad.npy").write_bytes(b"junk")
    (tmp_path / "bad.npy.vocab").write_text("a\nb\n<ctc>\n", encoding="utf-8")
    config = DecodeConfig(lm_level="character", beam_size=8)
    results = decode_batch(
        [("g", str(tmp_path / "good.npy")), ("b", str(tmp_path / "bad.npy"))],
        config,
    )
    assert len(results) == 2
    assert results[0].error is None
    assert results[0].text == greedy_ctc(good)
    assert results[0].seconds >= 0.0
    assert results[1].error is not None


def test_decode_batch_vocab_mismatch(tmp_path):
    rng = np.random.default_rng(6)
    write_emissions(random_ctc(rng, 2), tmp_path / "a.npy")
    other = EmissionMatrix(
        frames=random_log_posteriors(rng, 2, 4),
        vocab=("x", "y", "z", BLANK_SYMBOL),
        mode="ctc", blank_index=3, eos_index=None,
    )
    write_emissions(other, tmp_path / "b.npy")
    config = DecodeConfig(lm_level="character")
    results = decode_batch(
        [("0", str(tmp_path / "a.npy")), ("1", str(tmp_path / "b.npy"))], config
    )
    assert results[0].error is None
    assert results[1].error is not None and "vocab" in results[1].error.lower()


def test_decode_batch_beam_slower_than_greedy(tmp_path):
    lm, _ = toy_lm(order=3)
    rng = np.random.default_rng(8)
    items = []
    for i in range(6):
        em = random_ctc(rng, 40)
        path = tmp_path / f"{i}.npy"
        write_emissions(em, path)
        items.append((str(i), str(path)))
    config = DecodeConfig(lm_level="character", beam_size=16, lm_weight=1.5)
    greedy = decode_batch(items, config, None)
    fused = decode_batch(items, config, lm)
    mean_greedy = sum(r.seconds for r in greedy) / len(greedy)
    mean_fused = sum(r.seconds for r in fused) / len(fused)
    assert mean_fused > mean_greedy
