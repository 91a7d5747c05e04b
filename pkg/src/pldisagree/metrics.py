"""Per-banner disagreement samples and the dataset-level entry point.

Both metrics compare the clicked product ``P+`` of a banner with one
"negative" product ``P-`` and report 1 when the evaluated model scores the
clicked product strictly lower.  Pairwise disagreement draws ``P-``
uniformly among the non-clicked products of the banner; counterfactual
disagreement takes the product that a fresh draw of the logging policy puts
at the clicked rank, which removes the advantage products get merely from
being displayed at well-clicked positions.
"""
from __future__ import annotations

import enum

import numpy as np

from .estimators import DisagreementEstimator, normalize_metric
from .plackett_luce import (
    RankDistribution,
    ScoredCandidateSet,
    _as_rng,
    conditional_rank_probs,
    sample_rank_product,
)
from .records import BannerRecord, MetricEstimate, ScoringModel


class Rejected(enum.Enum):
    NO_PAIR = "no_pair"
    SAME_PRODUCT = "same_product"
    TIED_SCORE = "tied_score"


def _model_scores(record: BannerRecord, model: ScoringModel) -> np.ndarray:
    missing = model.missing(record.products)
    if missing:
        raise KeyError(f"model {model.name!r} has no score for {missing}")
    return np.array([model[p] for p in record.products], dtype=float)


def rank_distribution(record: BannerRecord, rank: int | None = None) -> RankDistribution:
    """Conditional distribution of the product at ``rank`` (default: the clicked rank)."""
    if rank is None:
        if record.clicked_rank is None:
            raise ValueError("record has no click; pass an explicit rank")
        rank = record.clicked_rank
    candidates = ScoredCandidateSet(record.products, record.scores, record.total_score)
    return conditional_rank_probs(candidates, range(record.n), rank)


def _compare(s_plus: float, s_minus: float):
    if s_plus == s_minus:
        return Rejected.TIED_SCORE
    return int(s_plus < s_minus)


def pd_sample(record: BannerRecord, model: ScoringModel, rng):
    """One pairwise-disagreement draw: 0, 1, or a :class:`Rejected` reason."""
    rng = _as_rng(rng)
    scores = _model_scores(record, model)
    if record.clicked_rank is None or record.n < 2:
        return Rejected.NO_PAIR
    c = record.clicked_rank - 1
    others = [j for j in range(record.n) if j != c]
    j = others[int(rng.integers(len(others)))]
    return _compare(scores[c], scores[j])


def _check_rank_dist(record: BannerRecord, rank_dist: RankDistribution):
    if len(rank_dist) != record.n:
        raise ValueError(f"rank distribution has {len(rank_dist)} entries for a banner of {record.n}")
    if rank_dist.rank != record.clicked_rank:
        raise ValueError(
            f"rank distribution is for rank {rank_dist.rank}, click is at {record.clicked_rank}"
        )


def cd_sample(record: BannerRecord, model: ScoringModel, rank_dist: RankDistribution, rng):
    """One counterfactual-disagreement draw: 0, 1, or a :class:`Rejected` reason.

    ``rank_dist`` must be the conditional distribution at the clicked rank
    (see :func:`rank_distribution`).
    """
    rng = _as_rng(rng)
    scores = _model_scores(record, model)
    if record.clicked_rank is None or record.n < 2:
        return Rejected.NO_PAIR
    _check_rank_dist(record, rank_dist)
    c = record.clicked_rank - 1
    j = sample_rank_product(rank_dist, rng)
    if j == c:
        return Rejected.SAME_PRODUCT
    return _compare(scores[c], scores[j])


def cd_exact_contribution(
    record: BannerRecord, model: ScoringModel, rank_dist: RankDistribution
) -> tuple[float, float]:
    """Expected (disagreement, acceptance) mass of one counterfactual draw.

    Summing both parts over banners and taking the ratio gives the same
    conditional expectation that :func:`cd_sample` estimates.
    """
    scores = _model_scores(record, model)
    if record.clicked_rank is None:
        raise ValueError("record has no click")
    _check_rank_dist(record, rank_dist)
    s_plus = scores[record.clicked_rank - 1]
    differs = scores != s_plus
    num = float(np.sum(rank_dist.probs[differs & (s_plus < scores)]))
    mass = float(np.sum(rank_dist.probs[differs]))
    return num, mass


def estimate_metric(
    records, model: ScoringModel, kind: str = "cd", resamples_per_banner: int = 1, seed: int = 0,
    subset: str = "all",
) -> MetricEstimate:
    """Aggregate disagreement over a log.

    Returns a :class:`MetricEstimate` whose ``value`` is ``None`` when every
    sample was rejected.
    """
    est = DisagreementEstimator(
        metric=normalize_metric(kind),
        subset=subset,
        resamples=resamples_per_banner,
        random_state=seed,
    )
    return est.fit(records).estimate(model)
