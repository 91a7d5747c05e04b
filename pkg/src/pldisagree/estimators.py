"""Vectorized disagreement estimators with a scikit-learn style interface.

``DisagreementEstimator.fit`` turns a banner log into padded arrays and
caches, for every clicked banner, the exact distribution of the product
placed at the clicked rank by a fresh draw of the logging policy.  Those
distributions do not depend on the evaluated model, so one fitted
estimator scores any number of models cheaply.

Random draws use common random numbers: the uniforms consumed by banner
``i`` depend only on ``(random_state, metric, i)``, so every model and every
subset filter sees the same draw for the same banner, and a single model
re-evaluated alone reproduces its row of a sweep exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .plackett_luce import inverse_cdf, rank_probs_batch
from .records import BannerRecord, MetricEstimate, ScoringModel, validate_record

METRICS = ("pd", "cd", "cd_exact")
SUBSETS = ("all", "shuffled", "non-shuffled")
_STREAM_TAGS = {"pd": 1, "cd": 2}


def normalize_metric(metric: str) -> str:
    metric = metric.replace("-", "_").lower()
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def normalize_subset(subset: str) -> str:
    subset = subset.replace("_", "-").lower()
    if subset not in SUBSETS:
        raise ValueError(f"unknown subset {subset!r}; expected one of {SUBSETS}")
    return subset


def check_records(records) -> list:
    """Materialize ``records`` and validate each one."""
    records = list(records)
    for rec in records:
        if not isinstance(rec, BannerRecord):
            raise TypeError(f"expected BannerRecord, got {type(rec).__name__}")
        validate_record(rec)
    return records


@dataclass
class LogArrays:
    """Banner log in padded columnar form (``width`` = largest banner size)."""

    vocab: list
    product_idx: np.ndarray  # (N, width) int, -1 padding
    logging_scores: np.ndarray  # (N, width), 0 padding
    sizes: np.ndarray  # (N,)
    totals: np.ndarray  # (N,)
    clicked: np.ndarray  # (N,) 0-based clicked rank, -1 for no click
    shuffled: np.ndarray  # (N,) bool

    @property
    def n_banners(self) -> int:
        return len(self.sizes)

    @classmethod
    def from_records(cls, records: Sequence[BannerRecord]) -> "LogArrays":
        n = len(records)
        width = max((r.n for r in records), default=1)
        index = {}
        product_idx = np.full((n, width), -1, dtype=np.int64)
        logging_scores = np.zeros((n, width))
        sizes = np.empty(n, dtype=np.int64)
        totals = np.empty(n)
        clicked = np.full(n, -1, dtype=np.int64)
        shuffled = np.zeros(n, dtype=bool)
        for i, rec in enumerate(records):
            k = rec.n
            sizes[i] = k
            product_idx[i, :k] = [index.setdefault(p, len(index)) for p in rec.products]
            logging_scores[i, :k] = rec.scores
            totals[i] = rec.total_score
            if rec.clicked_rank is not None:
                clicked[i] = rec.clicked_rank - 1
            shuffled[i] = rec.shuffled
        return cls(list(index), product_idx, logging_scores, sizes, totals, clicked, shuffled)

    def subset_mask(self, subset: str) -> np.ndarray:
        subset = normalize_subset(subset)
        if subset == "shuffled":
            return self.shuffled.copy()
        if subset == "non-shuffled":
            return ~self.shuffled
        return np.ones(self.n_banners, dtype=bool)

    def clicked_rank_probs(self) -> np.ndarray:
        """``out[i, j] = P(product j at banner i's clicked rank | displayed set)``; 0 rows without click."""
        out = np.zeros(self.logging_scores.shape)
        has_click = self.clicked >= 0
        keys = np.stack([self.sizes, self.clicked], axis=1)[has_click]
        rows = np.flatnonzero(has_click)
        for size, rank0 in np.unique(keys, axis=0):
            sel = rows[(keys[:, 0] == size) & (keys[:, 1] == rank0)]
            out[sel, :size] = rank_probs_batch(
                self.logging_scores[sel, :size], self.totals[sel], int(rank0) + 1
            )
        return out

    def model_scores(self, model: ScoringModel, rows: np.ndarray) -> np.ndarray:
        """Model scores laid out like ``product_idx`` (NaN padding)."""
        table = np.array([model.scores.get(p, np.nan) for p in self.vocab], dtype=float)
        table = np.append(table, np.nan)  # index -1 maps to the NaN sentinel
        scores = table[self.product_idx]
        used = self.product_idx[rows]
        missing = np.isnan(scores[rows]) & (used >= 0)
        if missing.any():
            names = sorted({str(self.vocab[j]) for j in np.unique(used[missing])})
            shown = ", ".join(names[:5]) + (" ..." if len(names) > 5 else "")
            raise KeyError(f"model {model.name!r} has no score for {len(names)} products: {shown}")
        return scores


class ConditionalRankTransformer(TransformerMixin, BaseEstimator):
    """Map banners to the conditional distribution of the product at a rank.

    Parameters
    ----------
    rank : "clicked" or int, default="clicked"
        1-based rank to marginalize.  ``"clicked"`` uses each banner's clicked
        rank and yields a row of NaN for banners without a click.

    ``transform`` returns an array of shape ``(n_banners, max_size)``;
    entries past a banner's size are 0.
    """

    def __init__(self, rank="clicked"):
        self.rank = rank

    def fit(self, records=None, y=None):
        return self

    def transform(self, records):
        arrays = LogArrays.from_records(check_records(records))
        if self.rank == "clicked":
            out = arrays.clicked_rank_probs()
            out[arrays.clicked < 0] = np.nan
            return out
        rank = int(self.rank)
        if rank < 1 or np.any(arrays.sizes < rank):
            raise ValueError(f"rank {rank} outside the range of some banner")
        out = np.zeros(arrays.logging_scores.shape)
        for size in np.unique(arrays.sizes):
            sel = np.flatnonzero(arrays.sizes == size)
            out[sel, :size] = rank_probs_batch(
                arrays.logging_scores[sel, :size], arrays.totals[sel], rank
            )
        return out


class DisagreementEstimator(BaseEstimator):
    """Estimate pairwise or counterfactual disagreement of scoring models on a log.

    Parameters
    ----------
    metric : {"pd", "cd", "cd_exact"}, default="cd"
        ``pd`` compares the clicked product with a uniformly drawn
        non-clicked product of the same banner.  ``cd`` compares it with the
        product a fresh logging-policy draw puts at the clicked rank.
        ``cd_exact`` marginalizes that draw analytically (no randomness).
    subset : {"all", "shuffled", "non-shuffled"}, default="all"
        Which banners of the fitted log enter the estimate.
    resamples : int, default=1
        Monte-Carlo draws per banner.  With more than one draw the standard
        error is clustered by banner.
    random_state : int, default=0
        Master seed of the per-metric uniform streams.

    Attributes
    ----------
    arrays_ : LogArrays
    rank_probs_ : ndarray of shape (n_banners, max_size)
        Available once a counterfactual metric has been estimated.
    """

    def __init__(self, metric="cd", subset="all", resamples=1, random_state=0):
        self.metric = metric
        self.subset = subset
        self.resamples = resamples
        self.random_state = random_state

    def fit(self, records, y=None):
        self.arrays_ = LogArrays.from_records(check_records(records))
        self.n_banners_ = self.arrays_.n_banners
        self._rank_probs = None
        self._uniforms = {}
        return self

    @property
    def rank_probs_(self):
        check_is_fitted(self, "arrays_")
        if self._rank_probs is None:
            self._rank_probs = self.arrays_.clicked_rank_probs()
        return self._rank_probs

    def _draws(self, metric: str, resamples: int) -> np.ndarray:
        key = (metric, resamples, self.random_state)
        if key not in self._uniforms:
            seq = np.random.SeedSequence([int(self.random_state), _STREAM_TAGS[metric]])
            rng = np.random.Generator(np.random.PCG64(seq))
            self._uniforms[key] = rng.random((self.n_banners_, resamples))
        return self._uniforms[key]

    def estimate(self, model: ScoringModel) -> MetricEstimate:
        if not hasattr(self, "arrays_"):
            raise NotFittedError("DisagreementEstimator is not fitted; call fit(records) first")
        metric = normalize_metric(self.metric)
        resamples = int(self.resamples)
        if resamples < 1:
            raise ValueError("resamples must be a positive integer")
        a = self.arrays_
        rows = np.flatnonzero(a.subset_mask(self.subset))
        scores = a.model_scores(model, rows)
        if metric == "cd_exact":
            return self._cd_exact(scores, rows)
        return self._monte_carlo(metric, scores, rows, resamples)

    def score(self, model: ScoringModel) -> float:
        """Negated disagreement, so that greater is better."""
        est = self.estimate(model)
        if not est.defined:
            raise ValueError("metric undefined: no accepted sample")
        return -est.value

    def _monte_carlo(self, metric, scores, rows, resamples) -> MetricEstimate:
        a = self.arrays_
        u = self._draws(metric, resamples)[rows]
        sizes = a.sizes[rows]
        clicked = a.clicked[rows]
        eligible = (clicked >= 0) & (sizes >= 2)
        er = rows[eligible]
        u = u[eligible]
        c = clicked[eligible][:, None]
        if metric == "pd":
            # uniform index among the size-1 non-clicked positions, skipping the click
            j = np.minimum((u * (sizes[eligible, None] - 1)).astype(np.int64), sizes[eligible, None] - 2)
            j = j + (j >= c)
            same = np.zeros(j.shape, dtype=bool)
        else:
            probs = self.rank_probs_[er]
            j = np.stack(
                [inverse_cdf(probs, u[:, m]) for m in range(resamples)], axis=1
            ) if len(er) else np.zeros((0, resamples), dtype=np.int64)
            same = j == c
        s_plus = scores[er, clicked[eligible]][:, None]
        s_minus = np.take_along_axis(scores[er], j, axis=1)
        tied = ~same & (s_plus == s_minus)
        ok = ~same & ~tied
        hits = ok & (s_plus < s_minus)
        accepted = int(ok.sum())
        value = se = None
        if accepted:
            value = float(hits.sum() / accepted)
            if resamples == 1:
                se = float(np.sqrt(value * (1 - value) / accepted))
            else:
                # ratio estimator clustered by banner
                resid = hits.sum(axis=1) - value * ok.sum(axis=1)
                se = float(np.sqrt(np.sum(resid**2)) / accepted)
        return MetricEstimate(
            kind=metric,
            value=value,
            std_error=se,
            accepted=accepted,
            rejected_no_pair=int((~eligible).sum()) * resamples,
            rejected_same_product=int(same.sum()),
            rejected_tied_score=int(tied.sum()),
            n_banners=len(rows),
        )

    def _cd_exact(self, scores, rows) -> MetricEstimate:
        a = self.arrays_
        sizes = a.sizes[rows]
        clicked = a.clicked[rows]
        eligible = (clicked >= 0) & (sizes >= 2)
        er = rows[eligible]
        probs = self.rank_probs_[er]
        s_plus = scores[er, clicked[eligible]][:, None]
        s = scores[er]
        # NaN padding compares false on both tests, and padding carries zero probability
        differs = (s != s_plus) & ~np.isnan(s)
        num = np.sum(np.where(differs & (s_plus < s), probs, 0.0), axis=1)
        mass = np.sum(np.where(differs, probs, 0.0), axis=1)
        total_mass = float(mass.sum())
        accepted = int((mass > 0).sum())
        value = se = None
        if total_mass > 0:
            value = float(num.sum() / total_mass)
            se = float(np.sqrt(np.sum((num - value * mass) ** 2)) / total_mass)
        return MetricEstimate(
            kind="cd_exact",
            value=value,
            std_error=se,
            accepted=accepted,
            rejected_no_pair=int((~eligible).sum()),
            rejected_same_product=0,
            rejected_tied_score=int((mass == 0).sum()),
            n_banners=len(rows),
            acceptance_mass=total_mass,
        )
