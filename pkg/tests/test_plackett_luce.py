import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pldisagree.plackett_luce import (
    BannerTooLargeError,
    RankDistribution,
    ScoredCandidateSet,
    banner_log_prob,
    brute_force_rank_probs,
    conditional_rank_probs,
    first_k_set_probs,
    rank_probs_batch,
    sample_banner,
    sample_rank_product,
)

ABCD = ScoredCandidateSet({"A": 1, "B": 2, "C": 3, "D": 4})


def exact_rank_probs(scores, total, r):
    """Rational-arithmetic enumeration of every ordering, used as an exact reference."""
    scores = [Fraction(s) for s in scores]
    total = Fraction(total)
    weights = [Fraction(0)] * len(scores)
    for perm in itertools.permutations(range(len(scores))):
        w, left = Fraction(1), total
        for j in perm:
            w *= scores[j] / left
            left -= scores[j]
        weights[perm[r - 1]] += w
    z = sum(weights)
    return [w / z for w in weights]


def test_exact_reference_hand_value():
    # P(A,B) = 1/10 * 2/9 = 1/45, P(B,A) = 2/10 * 1/8 = 1/40
    assert exact_rank_probs([1, 2], 10, 1) == [Fraction(8, 17), Fraction(9, 17)]


# -- sampling -------------------------------------------------------------


def test_sample_banner_single_candidate():
    cands = ScoredCandidateSet({"A": 1.0})
    rng = np.random.default_rng(0)
    assert all(sample_banner(cands, 1, rng) == [0] for _ in range(50))


def test_sample_banner_equal_scores_uniform_orderings():
    cands = ScoredCandidateSet({"A": 1, "B": 1, "C": 1})
    rng = np.random.default_rng(1)
    n_draws = 60_000
    counts = {}
    for _ in range(n_draws):
        key = tuple(sample_banner(cands, 3, rng))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    p = 1 / 6
    sigma = math.sqrt(n_draws * p * (1 - p))
    for c in counts.values():
        assert abs(c - n_draws * p) <= 3 * sigma


def test_sample_banner_first_draw_frequency():
    rng = np.random.default_rng(2)
    n_draws = 40_000
    hits = sum(sample_banner(ABCD, 2, rng)[0] == 3 for _ in range(n_draws))
    sigma = math.sqrt(n_draws * 0.4 * 0.6)
    assert abs(hits - 0.4 * n_draws) <= 3 * sigma


def test_sample_banner_distinct_and_reproducible():
    a = sample_banner(ABCD, 4, np.random.default_rng(5))
    b = sample_banner(ABCD, 4, np.random.default_rng(5))
    assert a == b
    assert sorted(a) == [0, 1, 2, 3]


def test_sample_banner_errors():
    with pytest.raises(ValueError):
        sample_banner(ABCD, 5, 0)
    with pytest.raises(ValueError):
        ScoredCandidateSet({"A": 1.0, "B": 0.0})
    with pytest.raises(ValueError):
        ScoredCandidateSet({"A": 1.0, "B": -2.0})


# -- banner probabilities -------------------------------------------------


def test_banner_log_prob_examples():
    assert banner_log_prob(ScoredCandidateSet({"A": 1.0}), ["A"]) == 0.0
    assert banner_log_prob(ABCD, ["A", "B"]) == pytest.approx(math.log(1 / 45), abs=1e-14)


def test_banner_log_prob_normalizes_over_ordered_pairs():
    pairs = list(itertools.permutations("ABCD", 2))
    assert len(pairs) == 12
    total = sum(math.exp(banner_log_prob(ABCD, list(p))) for p in pairs)
    assert abs(total - 1) <= 1e-12


def test_banner_log_prob_errors():
    with pytest.raises(ValueError):
        banner_log_prob(ABCD, ["A", "A"])
    with pytest.raises(KeyError):
        banner_log_prob(ABCD, ["A", "Z"])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6),
    st.integers(1, 6),
)
def test_banner_probs_normalize_for_every_size(scores, n):
    n = min(n, len(scores))
    cands = ScoredCandidateSet(list(range(len(scores))), scores)
    total = sum(
        math.exp(banner_log_prob(cands, list(p)))
        for p in itertools.permutations(range(len(scores)), n)
    )
    assert abs(total - 1) <= 1e-12


# -- conditional rank probabilities ---------------------------------------


def test_two_product_example_matches_hand_computation():
    for fn in (conditional_rank_probs, brute_force_rank_probs):
        dist = fn(ABCD, [0, 1], 1)
        assert dist.probs == pytest.approx([8 / 17, 9 / 17], abs=1e-15)


def test_uniform_scores_give_uniform_rank_probs():
    cands = ScoredCandidateSet(list(range(7)), np.full(7, 2.5))
    for displayed in ([0, 1, 2], [6, 3, 1]):
        for r in (1, 2, 3):
            np.testing.assert_allclose(conditional_rank_probs(cands, displayed, r).probs, 1 / 3, atol=1e-12)
    four = ScoredCandidateSet(list(range(4)), np.ones(4))
    for r in range(1, 5):
        np.testing.assert_allclose(brute_force_rank_probs(four, range(4), r).probs, 0.25, atol=1e-12)


def test_single_product():
    cands = ScoredCandidateSet({"A": 3.0, "B": 1.0})
    assert brute_force_rank_probs(cands, [0], 1).probs.tolist() == [1.0]
    assert conditional_rank_probs(cands, [1], 1).probs.tolist() == [1.0]


def test_matches_exact_rational_reference():
    rng = np.random.default_rng(3)
    for n in range(1, 6):
        scores = np.round(np.exp(rng.uniform(-3, 3, n + 2)), 3) + 0.001
        cands = ScoredCandidateSet(list(range(n + 2)), scores)
        displayed = list(rng.permutation(n + 2)[:n])
        for r in range(1, n + 1):
            ref = exact_rank_probs(scores[displayed].tolist(), cands.total_score, r)
            got = conditional_rank_probs(cands, displayed, r).probs
            np.testing.assert_allclose(got, [float(x) for x in ref], rtol=0, atol=1e-13)


log_scores = st.floats(math.log(1e-3), math.log(1e3))


@st.composite
def instances(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    hidden = draw(st.integers(0, 3))
    logs = draw(st.lists(log_scores, min_size=n + hidden, max_size=n + hidden))
    r = draw(st.integers(1, n))
    cands = ScoredCandidateSet(list(range(n + hidden)), np.exp(logs))
    return cands, list(range(n)), r


@settings(max_examples=150, deadline=None)
@given(instances())
def test_dp_matches_brute_force(inst):
    cands, displayed, r = inst
    dp = conditional_rank_probs(cands, displayed, r).probs
    bf = brute_force_rank_probs(cands, displayed, r).probs
    assert np.abs(dp - bf).max() <= 1e-10


@settings(max_examples=60, deadline=None)
@given(instances(max_n=12), st.floats(1e-3, 1e3))
def test_normalization_and_scale_invariance(inst, factor):
    cands, displayed, r = inst
    probs = conditional_rank_probs(cands, displayed, r).probs
    assert abs(probs.sum() - 1) <= 1e-9
    scaled = ScoredCandidateSet(cands.products, cands.scores * factor, cands.total_score * factor)
    np.testing.assert_allclose(conditional_rank_probs(scaled, displayed, r).probs, probs, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(log_scores, min_size=1, max_size=8))
def test_first_k_sets_normalize_when_whole_pool_is_displayed(logs):
    scores = np.exp(logs)
    n = len(scores)
    table = first_k_set_probs(scores, scores.sum())
    for k in range(n + 1):
        layer = sum(table[sum(1 << j for j in c)] for c in itertools.combinations(range(n), k))
        assert abs(layer - 1) <= 1e-10


def test_batch_matches_single_banner_calls():
    rng = np.random.default_rng(4)
    scores = np.exp(rng.uniform(0, 4, (25, 5)))
    totals = scores.sum(axis=1) + rng.uniform(0, 30, 25)
    batch = rank_probs_batch(scores, totals, 3)
    for b in range(25):
        cands = ScoredCandidateSet(list(range(5)), scores[b], totals[b])
        np.testing.assert_allclose(batch[b], conditional_rank_probs(cands, range(5), 3).probs, atol=1e-15)


def test_rank_probs_errors():
    big = ScoredCandidateSet(list(range(17)), np.ones(17))
    with pytest.raises(BannerTooLargeError):
        conditional_rank_probs(big, range(17), 1)
    with pytest.raises(ValueError):
        conditional_rank_probs(ABCD, [0, 1], 3)
    with pytest.raises(ValueError):
        conditional_rank_probs(ABCD, [0, 1], 0)
    nine = ScoredCandidateSet(list(range(9)), np.ones(9))
    with pytest.raises(ValueError):
        brute_force_rank_probs(nine, range(9), 1)


def test_sixteen_products_is_fast_enough():
    rng = np.random.default_rng(0)
    cands = ScoredCandidateSet(list(range(16)), np.exp(rng.uniform(0, 5, 16)))
    conditional_rank_probs(cands, range(16), 1)
    start = time.perf_counter()
    dist = conditional_rank_probs(cands, range(16), 1)
    assert time.perf_counter() - start < 0.1
    assert abs(dist.probs.sum() - 1) <= 1e-9


# -- rank-product sampling ------------------------------------------------


def test_sample_rank_product_degenerate():
    dist = RankDistribution(1, [1.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    assert {sample_rank_product(dist, rng) for _ in range(200)} == {0}


def test_sample_rank_product_binomial():
    dist = RankDistribution(1, [8 / 17, 9 / 17])
    rng = np.random.default_rng(7)
    n = 100_000
    hits = sum(sample_rank_product(dist, rng) == 0 for _ in range(n))
    p = 8 / 17
    assert abs(hits - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_sample_rank_product_chi_square_uniform():
    dist = RankDistribution(2, [0.25] * 4)
    rng = np.random.default_rng(8)
    draws = [sample_rank_product(dist, rng) for _ in range(100_000)]
    counts = np.bincount(draws, minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001


def test_rank_distribution_validation():
    with pytest.raises(ValueError):
        RankDistribution(1, [0.5, 0.4])
    with pytest.raises(ValueError):
        RankDistribution(3, [0.5, 0.5])
    with pytest.raises(ValueError):
        RankDistribution(1, [1.5, -0.5])
