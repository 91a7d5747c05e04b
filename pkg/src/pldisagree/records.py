"""Logged banners, scoring models and metric estimates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .plackett_luce import MAX_BANNER_SIZE, MAX_SCORE_RATIO

# ingestion rejection reasons
MULTIPLE_CLICKS = "multiple clicks"
BANNER_TOO_LARGE = "banner too large"
EMPTY_BANNER = "empty banner"
DUPLICATE_PRODUCT = "duplicate product"
NON_POSITIVE_SCORE = "non-positive score"
SCORE_RANGE = "score range"
CLICK_OUT_OF_RANGE = "clicked rank out of range"
TOTAL_BELOW_SUM = "total score below displayed sum"
MALFORMED = "malformed"


class InvalidRecordError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class BannerRecord:
    """One logged impression: displayed products in rank order and the click, if any.

    ``clicked_rank`` is 1-based; ``None`` means no click.  ``total_score`` is
    the logging-score mass of the whole candidate pool the banner was drawn
    from.
    """

    banner_id: str
    products: tuple
    scores: tuple
    total_score: float
    clicked_rank: Optional[int] = None
    shuffled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "products", tuple(self.products))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))

    @property
    def n(self) -> int:
        return len(self.products)

    @property
    def clicked_product(self):
        if self.clicked_rank is None:
            return None
        return self.products[self.clicked_rank - 1]


def validate_record(record: BannerRecord) -> BannerRecord:
    """Raise :class:`InvalidRecordError` with a reason code if ``record`` is unusable."""
    n = record.n
    if n == 0:
        raise InvalidRecordError(EMPTY_BANNER)
    if n != len(record.scores):
        raise InvalidRecordError(MALFORMED, "products and scores differ in length")
    if n > MAX_BANNER_SIZE:
        raise InvalidRecordError(BANNER_TOO_LARGE, f"{n} > {MAX_BANNER_SIZE}")
    if len(set(record.products)) != n:
        raise InvalidRecordError(DUPLICATE_PRODUCT)
    scores = np.asarray(record.scores, dtype=float)
    if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
        raise InvalidRecordError(NON_POSITIVE_SCORE)
    if scores.max() / scores.min() > MAX_SCORE_RATIO:
        raise InvalidRecordError(SCORE_RANGE)
    total = record.total_score
    if not (isinstance(total, (int, float)) and math.isfinite(total)):
        raise InvalidRecordError(MALFORMED, "total_score is not a finite number")
    # relative slack absorbs summation-order rounding when the pool is fully displayed
    if total < scores.sum() * (1 - 1e-12):
        raise InvalidRecordError(TOTAL_BELOW_SUM, f"{total!r} < {scores.sum()!r}")
    rank = record.clicked_rank
    if rank is not None and not (
        isinstance(rank, (int, np.integer)) and not isinstance(rank, bool) and 1 <= rank <= n
    ):
        raise InvalidRecordError(CLICK_OUT_OF_RANGE, f"{rank!r} not in 1..{n}")
    return record


@dataclass
class ScoringModel:
    """A scoring function given as an explicit product-id -> score table."""

    name: str
    scores: Mapping
    meta: dict = field(default_factory=dict)

    def __getitem__(self, product):
        return self.scores[product]

    def __contains__(self, product):
        return product in self.scores

    def __len__(self):
        return len(self.scores)

    def missing(self, products: Iterable) -> list:
        return [p for p in products if p not in self.scores]


@dataclass
class MetricEstimate:
    """A disagreement estimate (lower is better) with rejection accounting.

    ``value`` is ``None`` when no sample was accepted: the metric is then
    undefined rather than zero.  For the exact counterfactual estimator the
    counters count banners, and ``acceptance_mass`` holds the summed
    probability of a non-rejected draw.
    """

    kind: str
    value: Optional[float]
    std_error: Optional[float]
    accepted: int
    rejected_no_pair: int
    rejected_same_product: int
    rejected_tied_score: int
    n_banners: int
    acceptance_mass: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.value is not None

    @property
    def rejected(self) -> int:
        return self.rejected_no_pair + self.rejected_same_product + self.rejected_tied_score

    @property
    def comparison_rejection_rate(self) -> float:
        """Fraction of draws with a usable click that were still rejected."""
        with_pair = self.accepted + self.rejected_same_product + self.rejected_tied_score
        if with_pair == 0:
            return float("nan")
        return (self.rejected_same_product + self.rejected_tied_score) / with_pair

    def as_dict(self) -> dict:
        d = asdict(self)
        d["defined"] = self.defined
        return d
