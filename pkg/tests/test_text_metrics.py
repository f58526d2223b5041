from __future__ import annotations

import math
import random

import numpy as np
import pytest

from hemeval.core import CaptionPair
from hemeval.text_metrics import (
    FileProvider,
    HashedRandomProvider,
    MetricsError,
    OneHotProvider,
    bert_score,
    bleu,
    corpus_scores,
    provider_from_spec,
    rouge_l,
    tokenize,
)
from hemeval.jsonlio import write_jsonl

from oracles import bleu_oracle, lcs_by_enumeration, lcs_full_table, max_cosine_oracle

VOCAB = ["cell", "large", "small", "coarse", "chromatin", "nucleus", "with", "scant"]


def random_tokens(rng: random.Random, max_len: int = 12) -> list[str]:
    return [rng.choice(VOCAB) for _ in range(rng.randrange(0, max_len + 1))]


# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------


def test_tokenize_examples():
    assert tokenize("Large cell with coarse chromatin.") == [
        "large",
        "cell",
        "with",
        "coarse",
        "chromatin",
    ]
    assert tokenize("") == []
    assert tokenize("CLL, CLL") == ["cll", "cll"]


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------


def test_bleu_identity_is_one():
    tokens = ["a", "b", "c", "d", "e"]
    assert bleu(tokens, tokens, max_n=4, smoothing="none") == pytest.approx(1.0)


def test_bleu_disjoint_is_zero():
    # Zero shared unigrams is a zero score even under epsilon smoothing.
    assert bleu(["a", "b"], ["c", "d"], smoothing="none") == 0.0
    assert bleu(["a", "b"], ["c", "d"], smoothing="epsilon") == 0.0


def test_bleu_anchor_value():
    # candidate [large, cell, coarse, chromatin] vs reference
    # [large, cell, with, coarse, chromatin]: p1 = 4/4, p2 = 2/3,
    # BP = exp(1 - 5/4); hand-derived from the n-gram counts.
    candidate = ["large", "cell", "coarse", "chromatin"]
    reference = ["large", "cell", "with", "coarse", "chromatin"]
    expected = math.exp(1.0 - 5.0 / 4.0) * math.sqrt(1.0 * 2.0 / 3.0)
    got = bleu(candidate, reference, max_n=2, smoothing="none")
    assert got == pytest.approx(expected, abs=1e-12)
    assert round(got, 4) == 0.6359


def test_bleu_empty_candidate_is_zero():
    assert bleu([], ["a"], smoothing="epsilon") == 0.0
    assert bleu(["a"], [], smoothing="epsilon") == 0.0


def test_bleu_short_candidate_skips_missing_orders():
    assert bleu(["a"], ["a"], max_n=4, smoothing="none") == pytest.approx(1.0)


def test_bleu_epsilon_smoothing_formula():
    # p1 = clipped 2/4 (each of a, b appears once in the reference);
    # 3 candidate bigrams, none shared: p2 -> 1/(2*3).
    candidate = ["a", "b", "a", "b"]
    reference = ["a", "x", "b", "y"]
    p1 = 2 / 4
    p2 = 1 / 6
    expected = math.exp(min(0.0, 1.0 - 4 / 4)) * math.sqrt(p1 * p2)
    assert bleu(candidate, reference, max_n=2, smoothing="epsilon") == pytest.approx(expected)


def test_bleu_matches_oracle_on_random_instances():
    rng = random.Random(1234)
    checked = 0
    for _ in range(250):
        cand, ref = random_tokens(rng), random_tokens(rng)
        max_n = rng.choice([1, 2, 3, 4])
        smoothing = rng.choice(["none", "epsilon"])
        expected = bleu_oracle(cand, ref, max_n, smoothing)
        got = bleu(cand, ref, max_n=max_n, smoothing=smoothing)
        assert got == pytest.approx(expected, abs=1e-9), (cand, ref, max_n, smoothing)
        checked += 1
    assert checked == 250


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------


def test_rouge_identity():
    tokens = ["a", "b", "c"]
    assert rouge_l(tokens, tokens) == (1.0, 1.0, 1.0)


def test_rouge_anchor_value():
    # LCS([large, blast, cell], [large, leukemic, blast, cell]) = 3.
    p, r, f = rouge_l(["large", "blast", "cell"], ["large", "leukemic", "blast", "cell"])
    assert p == pytest.approx(1.0)
    assert r == pytest.approx(0.75)
    assert f == pytest.approx(6.0 / 7.0, abs=1e-12)


def test_rouge_disjoint_and_empty():
    assert rouge_l(["a"], ["b"]) == (0.0, 0.0, 0.0)
    assert rouge_l([], ["b"]) == (0.0, 0.0, 0.0)
    assert rouge_l(["a"], []) == (0.0, 0.0, 0.0)


def test_rouge_matches_enumeration_oracle():
    rng = random.Random(99)
    for _ in range(250):
        cand, ref = random_tokens(rng, 10), random_tokens(rng, 10)
        lcs = lcs_by_enumeration(cand, ref)
        assert lcs == lcs_full_table(cand, ref)
        p, r, f = rouge_l(cand, ref)
        if not cand or not ref:
            assert (p, r, f) == (0.0, 0.0, 0.0)
            continue
        assert p == pytest.approx(lcs / len(cand), abs=1e-9)
        assert r == pytest.approx(lcs / len(ref), abs=1e-9)


def test_rouge_symmetry_swaps_precision_recall():
    rng = random.Random(5)
    for _ in range(50):
        a, b = random_tokens(rng), random_tokens(rng)
        pa, ra, fa = rouge_l(a, b)
        pb, rb, fb = rouge_l(b, a)
        assert pa == pytest.approx(rb) and ra == pytest.approx(pb)
        assert fa == pytest.approx(fb)


def test_rouge_deleting_matched_token_never_raises_recall():
    rng = random.Random(6)
    for _ in range(80):
        ref = random_tokens(rng, 8)
        cand = random_tokens(rng, 8)
        if not cand or not ref:
            continue
        _, recall, _ = rouge_l(cand, ref)
        for i in range(len(cand)):
            shorter = cand[:i] + cand[i + 1 :]
            _, recall2, _ = rouge_l(shorter, ref)
            assert recall2 <= recall + 1e-12


# ---------------------------------------------------------------------------
# BERTScore
# ---------------------------------------------------------------------------


def test_bert_score_identity_with_any_provider():
    tokens = ["coarse", "chromatin", "cell"]
    for provider in (OneHotProvider(tokens), HashedRandomProvider(3, 16)):
        p, r, f = bert_score(tokens, tokens, provider)
        assert p == pytest.approx(1.0, abs=1e-6)
        assert r == pytest.approx(1.0, abs=1e-6)
        assert f == pytest.approx(1.0, abs=1e-6)


def test_bert_score_one_hot_reduces_to_overlap():
    provider = OneHotProvider(["a", "b", "c"])
    p, r, f = bert_score(["a", "b"], ["a", "c"], provider)
    assert (p, r, f) == (0.5, 0.5, 0.5)


def test_bert_score_empty_raises():
    provider = OneHotProvider(["a"])
    with pytest.raises(MetricsError):
        bert_score([], ["a"], provider)
    with pytest.raises(MetricsError):
        bert_score(["a"], [], provider)


def test_bert_score_matches_double_loop_oracle():
    provider = HashedRandomProvider(77, 24)
    cand = ["large", "cell", "with", "scant", "cytoplasm"]
    ref = ["small", "cell", "and", "scant", "cytoplasm", "here"]
    expected = max_cosine_oracle(
        [list(map(float, v)) for v in provider.embed(cand)],
        [list(map(float, v)) for v in provider.embed(ref)],
    )
    got = bert_score(cand, ref, provider)
    for g, e in zip(got, expected):
        assert g == pytest.approx(e, abs=1e-9)


def test_bert_score_symmetry():
    provider = HashedRandomProvider(11, 16)
    a = ["a", "b", "c"]
    b = ["b", "d"]
    pa, ra, fa = bert_score(a, b, provider)
    pb, rb, fb = bert_score(b, a, provider)
    assert pa == pytest.approx(rb) and ra == pytest.approx(pb)
    assert fa == pytest.approx(fb)


def test_one_hot_provider_unknown_token_rejected():
    provider = OneHotProvider(["a"])
    with pytest.raises(MetricsError, match="not in one_hot vocabulary"):
        provider.embed(["b"])


def test_hashed_provider_unit_norm_and_deterministic():
    provider = HashedRandomProvider(5, 32)
    first = provider.embed(["alpha", "beta"])
    second = provider.embed(["alpha", "beta"])
    assert np.array_equal(first, second)
    assert np.allclose(np.linalg.norm(first, axis=1), 1.0, atol=1e-6)


def test_file_provider_roundtrip_and_unk(tmp_path):
    path = tmp_path / "tokens.jsonl"
    vec = [1.0, 0.0]
    write_jsonl(
        path,
        [
            {"token": "cell", "vector": vec},
            {"token": "<unk>", "vector": [0.0, 1.0]},
        ],
    )
    provider = FileProvider.from_path(path)
    out = provider.embed(["cell", "mystery"])
    assert np.allclose(out[0], [1.0, 0.0])
    assert np.allclose(out[1], [0.0, 1.0])


def test_file_provider_rejects_non_unit_vectors(tmp_path):
    path = tmp_path / "tokens.jsonl"
    write_jsonl(path, [{"token": "cell", "vector": [2.0, 0.0]}])
    with pytest.raises(MetricsError, match="unit"):
        FileProvider.from_path(path)


def test_provider_from_spec():
    assert provider_from_spec("hashed:9").name == "hashed:9"
    assert provider_from_spec("one_hot", ["a"]).name == "one_hot"
    with pytest.raises(MetricsError):
        provider_from_spec("bert-large")


# ---------------------------------------------------------------------------
# corpus scoring
# ---------------------------------------------------------------------------


def _pairs(*texts: tuple[str, str]) -> list[CaptionPair]:
    return [
        CaptionPair(image_id=f"c{i}", reference=ref, candidate=cand)
        for i, (ref, cand) in enumerate(texts)
    ]


def test_corpus_single_pair_aggregate_equals_pair():
    pairs = _pairs(("a small cell", "a small cell"))
    report = corpus_scores(pairs, provider=HashedRandomProvider(1, 8))
    assert report.aggregates["bleu"] == report.per_pair[0].bleu
    assert report.aggregates["rouge_l_f1"] == report.per_pair[0].rouge_l_f1


def test_corpus_mean_of_two_pairs():
    pairs = _pairs(("a b c d", "a b c d"), ("a b c d", "x y z w"))
    report = corpus_scores(pairs, metrics=("bleu",), smoothing="none")
    assert report.per_pair[0].bleu == pytest.approx(1.0)
    assert report.per_pair[1].bleu == 0.0
    assert report.aggregates["bleu"] == pytest.approx(0.5)


def test_corpus_aggregates_match_recomputation():
    rng = random.Random(31)
    pairs = _pairs(
        *[
            (" ".join(random_tokens(rng, 9) or ["x"]), " ".join(random_tokens(rng, 9) or ["y"]))
            for _ in range(20)
        ]
    )
    report = corpus_scores(pairs, provider=HashedRandomProvider(2, 8))
    for field in ("bleu", "rouge_l_f1", "bertscore_f1"):
        values = [getattr(p, field) for p in report.per_pair if getattr(p, field) is not None]
        assert report.aggregates[field] == pytest.approx(sum(values) / len(values), abs=1e-12)


def test_corpus_bert_nulls_excluded():
    pairs = _pairs(("a b", "a b"), (", , ,", "a b"))  # second reference tokenizes to nothing
    report = corpus_scores(pairs, provider=OneHotProvider(["a", "b"]))
    assert report.per_pair[1].bertscore_f1 is None
    assert report.aggregates["bertscore_skipped"] == 1
    assert report.aggregates["bertscore_f1"] == report.per_pair[0].bertscore_f1
    assert report.per_pair[1].bleu is not None


def test_scores_are_bounded():
    rng = random.Random(8)
    for _ in range(60):
        cand, ref = random_tokens(rng), random_tokens(rng)
        assert 0.0 <= bleu(cand, ref) <= 1.0
        for value in rouge_l(cand, ref):
            assert 0.0 <= value <= 1.0
        if cand and ref:
            provider = OneHotProvider(sorted(set(cand) | set(ref)))
            for value in bert_score(cand, ref, provider):
                assert 0.0 <= value <= 1.0
