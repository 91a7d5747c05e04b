"""Synthetic banner traffic with known ground truth.

Each banner draws a candidate pool from a product catalog, assigns the pool
logging scores, samples the displayed products and their order from the
Plackett-Luce logging policy, optionally shuffles the order uniformly, and
draws at most one click from a position-based model where the click
probability of product ``p`` at rank ``r`` is ``examination[r] *
relevance[p]``.

Logging scores are log-uniform marginally.  A Gaussian copula couples
them to each product's relevance and to a persistent product-level
"policy affinity" that is unrelated to relevance, so the logging policy
can systematically favour products for the wrong reasons.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .records import BannerRecord, ScoringModel

CHUNK = 20_000


@dataclass
class ClickModel:
    """Position-based click model: ``P(click at r) = examination[r-1] * relevance[product]``."""

    examination: list
    relevance: dict

    def __post_init__(self):
        exam = np.asarray(self.examination, dtype=float)
        if np.any(exam < 0) or np.any(exam > 1):
            raise ValueError("examination probabilities must lie in [0, 1]")
        rel = np.fromiter(self.relevance.values(), dtype=float, count=len(self.relevance))
        if np.any(rel < 0) or np.any(rel > 1):
            raise ValueError("relevance must lie in [0, 1]")

    def click_probs(self, products) -> np.ndarray:
        exam = np.asarray(self.examination, dtype=float)
        if len(products) > len(exam):
            raise ValueError(f"banner of {len(products)} exceeds examination curve length")
        return exam[: len(products)] * np.array([self.relevance[p] for p in products])

    def max_click_mass(self, size: int) -> float:
        """Largest total click probability over any banner of ``size`` products."""
        exam = np.sort(np.asarray(self.examination[:size], dtype=float))[::-1]
        rel = np.sort(np.fromiter(self.relevance.values(), dtype=float))[::-1][:size]
        # rearrangement inequality: pair the largest factors
        return float(np.dot(exam[: len(rel)], rel))


@dataclass
class SimConfig:
    """Simulator settings; every field is plain data so configs round-trip through JSON."""

    seed: int = 0
    num_banners: int = 200_000
    catalog_size: int = 1000
    candidate_pool_size: int = 8
    # banner size -> weight; a fixed size is {size: 1}
    banner_sizes: dict = field(default_factory=lambda: {6: 1.0})
    # natural-log range of logging scores (log-uniform marginal)
    log_score_range: tuple = (0.0, 10.0)
    uniform_logging: bool = False
    # copula loadings of logging scores on relevance and on policy affinity
    relevance_correlation: float = 0.4
    affinity_loading: float = 0.8
    # relevance ~ relevance_max * Beta(a, b)
    relevance_max: float = 0.4
    relevance_beta: tuple = (2.0, 2.0)
    # explicit per-rank examination curve, or rank ** -examination_decay
    examination: Optional[list] = None
    examination_decay: float = 2.0
    shuffle_fraction: float = 0.05
    zoo_size: int = 40
    zoo_noise_levels: Optional[list] = None
    zoo_bias_models: int = 12

    def __post_init__(self):
        self.banner_sizes = {int(k): float(v) for k, v in dict(self.banner_sizes).items()}
        self.log_score_range = tuple(float(x) for x in self.log_score_range)
        self.relevance_beta = tuple(float(x) for x in self.relevance_beta)

    @property
    def max_banner_size(self) -> int:
        return max(self.banner_sizes)

    def examination_curve(self) -> list:
        if self.examination is not None:
            return [float(x) for x in self.examination]
        ranks = np.arange(1, self.max_banner_size + 1)
        return [float(x) for x in ranks ** -float(self.examination_decay)]

    def validate(self):
        if self.num_banners < 0:
            raise ValueError("num_banners must be non-negative")
        if not 0 <= self.shuffle_fraction <= 1:
            raise ValueError("shuffle_fraction must lie in [0, 1]")
        if any(k < 1 for k in self.banner_sizes) or any(w < 0 for w in self.banner_sizes.values()):
            raise ValueError("banner sizes must be positive with non-negative weights")
        if sum(self.banner_sizes.values()) <= 0:
            raise ValueError("banner size weights must not all be zero")
        if self.max_banner_size > self.candidate_pool_size:
            raise ValueError("banner size exceeds candidate pool size")
        if self.candidate_pool_size > self.catalog_size:
            raise ValueError("candidate pool exceeds catalog")
        if self.max_banner_size > 16:
            raise ValueError("banner sizes above 16 are not supported")
        lo, hi = self.log_score_range
        if not lo <= hi or hi - lo > math.log(1e9):
            raise ValueError("log_score_range must be increasing and span at most 1e9")
        c, b = self.relevance_correlation, self.affinity_loading
        if c * c + b * b > 1:
            raise ValueError("relevance_correlation**2 + affinity_loading**2 must not exceed 1")
        if len(self.examination_curve()) < self.max_banner_size:
            raise ValueError("examination curve shorter than the largest banner")
        if not 0 < self.relevance_max <= 1:
            raise ValueError("relevance_max must lie in (0, 1]")
        if self.zoo_size < 2:
            raise ValueError("zoo_size must be at least 2")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["banner_sizes"] = {str(k): v for k, v in self.banner_sizes.items()}
        d["log_score_range"] = list(self.log_score_range)
        d["relevance_beta"] = list(self.relevance_beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class GroundTruth:
    click_model: ClickModel
    # persistent product-level component of the logging scores, unrelated to relevance
    policy_affinity: dict

    def to_dict(self) -> dict:
        return {
            "examination": list(self.click_model.examination),
            "relevance": dict(self.click_model.relevance),
            "policy_affinity": dict(self.policy_affinity),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(ClickModel(d["examination"], d["relevance"]), d["policy_affinity"])


def _normal_scores(x: np.ndarray) -> np.ndarray:
    """Rank-based transform of ``x`` to standard-normal quantiles."""
    ranks = stats.rankdata(x)
    return stats.norm.ppf(ranks / (len(x) + 1))


def _sample_pools(rng, n: int, catalog: int, pool: int) -> np.ndarray:
    out = np.empty((n, pool), dtype=np.int64)
    for start in range(0, n, CHUNK):
        keys = rng.random((min(CHUNK, n - start), catalog))
        out[start : start + len(keys)] = np.argpartition(keys, pool - 1, axis=1)[:, :pool]
    return out


def plackett_luce_draws(rng, scores: np.ndarray, n: int) -> np.ndarray:
    """Sequential Plackett-Luce draws of ``n`` positions for each row of ``scores``."""
    b = scores.shape[0]
    remaining = scores.copy()
    rows = np.arange(b)
    out = np.empty((b, n), dtype=np.int64)
    for i in range(n):
        cum = np.cumsum(remaining, axis=1)
        u = rng.random(b) * cum[:, -1]
        j = (cum <= u[:, None]).sum(axis=1)
        j = np.minimum(j, scores.shape[1] - 1)
        out[:, i] = j
        remaining[rows, j] = 0.0
    return out


def draw_clicks(rng, click_probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row: 0-based clicked rank, or -1 for no click."""
    cum = np.cumsum(click_probs, axis=1)
    u = rng.random(len(click_probs))
    j = (cum <= u[:, None]).sum(axis=1)
    return np.where(j < click_probs.shape[1], j, -1)


def make_catalog(config: SimConfig, rng) -> tuple[list, np.ndarray, np.ndarray]:
    """Product ids, relevance and policy affinity for the catalog."""
    width = len(str(config.catalog_size - 1))
    ids = [f"p{i:0{width}d}" for i in range(config.catalog_size)]
    a, b = config.relevance_beta
    relevance = config.relevance_max * rng.beta(a, b, config.catalog_size)
    affinity = rng.standard_normal(config.catalog_size)
    return ids, relevance, affinity


def simulate_logs(config: SimConfig) -> tuple[list, GroundTruth]:
    """Generate ``config.num_banners`` banner records and the ground truth behind them."""
    config.validate()
    root = np.random.SeedSequence(config.seed)
    catalog_seq, sizes_seq, banner_seq, shuffle_seq = root.spawn(4)
    ids, relevance, affinity = make_catalog(config, np.random.default_rng(catalog_seq))
    exam = np.asarray(config.examination_curve())
    click_model = ClickModel(list(exam), dict(zip(ids, relevance.tolist())))
    for size in config.banner_sizes:
        if config.banner_sizes[size] > 0 and click_model.max_click_mass(size) > 1:
            raise ValueError(
                f"click probabilities can sum above 1 for banners of size {size}: "
                f"{click_model.max_click_mass(size):.3f}"
            )
    truth = GroundTruth(click_model, dict(zip(ids, affinity.tolist())))

    n = config.num_banners
    size_values = np.array(sorted(config.banner_sizes))
    weights = np.array([config.banner_sizes[k] for k in size_values])
    sizes = np.random.default_rng(sizes_seq).choice(size_values, size=n, p=weights / weights.sum())
    shuffled = np.zeros(n, dtype=bool)
    n_shuffled = int(round(config.shuffle_fraction * n))
    shuffled[np.random.default_rng(shuffle_seq).permutation(n)[:n_shuffled]] = True

    rng = np.random.default_rng(banner_seq)
    rel_z = _normal_scores(relevance)
    c, b = config.relevance_correlation, config.affinity_loading
    lo, hi = config.log_score_range
    records: list = [None] * n
    for size in size_values:
        idx = np.flatnonzero(sizes == size)
        for start in range(0, len(idx), CHUNK):
            rows = idx[start : start + CHUNK]
            m = len(rows)
            pools = _sample_pools(rng, m, config.catalog_size, config.candidate_pool_size)
            if config.uniform_logging:
                pool_scores = np.ones(pools.shape)
            else:
                eps = rng.standard_normal(pools.shape)
                z = c * rel_z[pools] + b * affinity[pools] + math.sqrt(1 - c * c - b * b) * eps
                pool_scores = np.exp(lo + (hi - lo) * stats.norm.cdf(z))
            totals = pool_scores.sum(axis=1)
            picks = plackett_luce_draws(rng, pool_scores, int(size))
            perm_keys = rng.random((m, int(size)))
            shuffle_rows = shuffled[rows]
            order = np.argsort(perm_keys, axis=1)
            picks[shuffle_rows] = np.take_along_axis(picks[shuffle_rows], order[shuffle_rows], axis=1)
            shown = np.take_along_axis(pools, picks, axis=1)
            shown_scores = np.take_along_axis(pool_scores, picks, axis=1)
            clicks = draw_clicks(rng, exam[: int(size)] * relevance[shown])
            for k, i in enumerate(rows):
                records[i] = BannerRecord(
                    banner_id=f"b{i}",
                    products=tuple(ids[j] for j in shown[k]),
                    scores=tuple(shown_scores[k].tolist()),
                    total_score=float(totals[k]),
                    clicked_rank=int(clicks[k]) + 1 if clicks[k] >= 0 else None,
                    shuffled=bool(shuffle_rows[k]),
                )
    return records, truth


def default_noise_levels(count: int) -> list:
    return [float(x) for x in np.round(np.geomspace(0.2, 30.0, count), 4)]


def generate_model_zoo(
    relevance: dict,
    count: int,
    noise_levels=None,
    rng=None,
    policy_affinity: Optional[dict] = None,
    bias_models: int = 0,
) -> list:
    """Scoring models of graded quality.

    The zoo holds the oracle (scores = relevance), a pure-noise model, models
    that add Gaussian noise of increasing scale to standardized relevance,
    and, when ``policy_affinity`` is given, ``bias_models`` models that lean
    towards what the logging policy favours instead of relevance.  Every
    model records its construction in ``meta``.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    rng = np.random.default_rng(rng)
    ids = list(relevance)
    rel = np.array([relevance[p] for p in ids])
    rel_z = _normal_scores(rel)

    def model(name, values, **meta):
        return ScoringModel(name, dict(zip(ids, np.asarray(values, dtype=float).tolist())), meta)

    n_bias = min(bias_models, count - 2) if policy_affinity is not None else 0
    n_ladder = count - 2 - n_bias
    if noise_levels is None:
        noise_levels = default_noise_levels(n_ladder)
    noise_levels = list(noise_levels)[:n_ladder]
    zoo = [model("oracle", rel, family="ladder", noise_level=0.0)]
    for lvl in noise_levels:
        values = rel_z + lvl * rng.standard_normal(len(ids))
        zoo.append(model(f"noisy-{lvl:g}", values, family="ladder", noise_level=float(lvl)))
    zoo.append(model("noise", rng.standard_normal(len(ids)), family="ladder", noise_level=math.inf))
    if n_bias:
        aff = np.array([policy_affinity[p] for p in ids])
        for k, w in enumerate(np.linspace(0.3, 1.0, n_bias)):
            # mix of relevance and policy affinity: weight w on affinity
            values = (1 - w) * rel_z + w * aff + 0.3 * rng.standard_normal(len(ids))
            zoo.append(model(f"bias-{w:.2f}", values, family="bias", affinity_weight=float(w)))
    return zoo


def ctr_by_rank(records) -> list:
    """Impressions, clicks and CTR per (banner size, rank), sorted by size then rank."""
    impressions: dict = {}
    clicks: dict = {}
    for rec in records:
        for r in range(1, rec.n + 1):
            impressions[(rec.n, r)] = impressions.get((rec.n, r), 0) + 1
        if rec.clicked_rank is not None:
            key = (rec.n, rec.clicked_rank)
            clicks[key] = clicks.get(key, 0) + 1
    rows = []
    for key in sorted(impressions):
        imp = impressions[key]
        clk = clicks.get(key, 0)
        rows.append({"banner_size": key[0], "rank": key[1], "impressions": imp,
                     "clicks": clk, "ctr": clk / imp})
    return rows
