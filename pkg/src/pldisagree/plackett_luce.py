"""Plackett-Luce sampling, banner probabilities and conditional rank placement.

A Plackett-Luce logging policy draws the displayed products one by one,
without replacement, from a candidate set, each draw proportional to the
product's logging score.  Once a banner has been logged we know the
displayed *set*; the distribution over its *orderings* conditional on that
set has no known efficient sampler, but the marginal probability that a
given product lands at a given rank can be computed exactly with a subset
dynamic program in ``O(n^2 * 2^n)``.

Subsets of the ``n`` displayed products are encoded as integer bitmasks
(bit ``j`` set means displayed product ``j`` is in the subset).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Sequence

import numpy as np

MAX_BANNER_SIZE = 16
MAX_ORACLE_SIZE = 8
# scores spanning more than this ratio inside one banner are rejected
MAX_SCORE_RATIO = 1e9

# upper bound on the number of doubles held by one batched DP table
_DP_BUDGET = 1 << 22
# undisplayed mass this close to zero (relative to the total) is summation rounding
_HIDDEN_RTOL = 16 * np.finfo(float).eps


class BannerTooLargeError(ValueError):
    """Raised when a banner exceeds the exact-DP size cap."""


@dataclass(frozen=True)
class ScoredCandidateSet:
    """Candidate products with their logging scores.

    ``total_score`` is the score mass of the whole candidate pool, which may
    include products that are not listed here (e.g. candidates that were
    never displayed).  It defaults to the sum of the listed scores.
    """

    products: tuple
    scores: np.ndarray
    total_score: float

    def __init__(self, products, scores=None, total_score=None):
        if scores is None:
            # mapping form: {product_id: score}
            items = list(dict(products).items())
            products = [p for p, _ in items]
            scores = [s for _, s in items]
        products = tuple(products)
        scores = np.asarray(scores, dtype=float)
        if scores.ndim != 1 or len(scores) != len(products):
            raise ValueError("products and scores must have the same length")
        if len(set(products)) != len(products):
            raise ValueError("duplicate product id in candidate set")
        check_scores(scores)
        listed = float(scores.sum())
        if total_score is None:
            total_score = listed
        total_score = float(total_score)
        if not total_score >= listed * (1 - 1e-12):
            raise ValueError(
                f"total_score={total_score!r} is below the listed score mass {listed!r}"
            )
        object.__setattr__(self, "products", products)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "total_score", total_score)

    def __len__(self):
        return len(self.products)

    def index_of(self, product: Hashable) -> int:
        try:
            return self.products.index(product)
        except ValueError:
            raise KeyError(f"unknown product {product!r}") from None


@dataclass(frozen=True)
class RankDistribution:
    """``probs[j] = P(product j sits at ``rank`` | displayed set)``; rank is 1-based."""

    rank: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or len(probs) == 0:
            raise ValueError("probs must be a non-empty 1d array")
        if not 1 <= self.rank <= len(probs):
            raise ValueError(f"rank {self.rank} outside 1..{len(probs)}")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")

    def __len__(self):
        return len(self.probs)


def check_scores(scores) -> np.ndarray:
    """Validate strictly positive, finite scores within the allowed ratio."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return scores
    if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
        raise ValueError("scores must be finite and strictly positive")
    if scores.max() / scores.min() > MAX_SCORE_RATIO:
        raise ValueError(
            f"score ratio {scores.max() / scores.min():.3g} exceeds {MAX_SCORE_RATIO:g}"
        )
    return scores


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_banner(candidates: ScoredCandidateSet, n: int, rng) -> list[int]:
    """Draw an ordered banner of ``n`` candidate indices without replacement.

    Each draw picks a remaining product with probability proportional to its
    score, the denominator being the total pool mass minus what was already
    drawn.  When ``total_score`` exceeds the listed mass, the unlisted
    remainder can never be drawn here, so it is treated as listed products
    only; use a candidate set that lists the full pool for faithful draws.
    """
    rng = _as_rng(rng)
    if n > len(candidates):
        raise ValueError(f"cannot draw {n} products from {len(candidates)} candidates")
    if n < 0:
        raise ValueError("n must be non-negative")
    remaining = candidates.scores.copy()
    banner = []
    for _ in range(n):
        cum = np.cumsum(remaining)
        u = rng.random() * cum[-1]
        j = int(np.searchsorted(cum, u, side="right"))
        j = min(j, len(cum) - 1)
        banner.append(j)
        remaining[j] = 0.0
    return banner


def banner_log_prob(candidates: ScoredCandidateSet, banner: Sequence[Hashable]) -> float:
    """Log probability of displaying ``banner`` (product ids, in rank order)."""
    if len(set(banner)) != len(banner):
        raise ValueError("duplicate product in banner")
    idx = [candidates.index_of(p) for p in banner]
    unlisted = float(_hidden_mass(candidates.total_score, candidates.scores.sum()))
    left = np.ones(len(candidates), dtype=bool)
    log_p = 0.0
    for j in idx:
        log_p += np.log(candidates.scores[j]) - np.log(unlisted + candidates.scores[left].sum())
        left[j] = False
    return float(log_p)


@lru_cache(maxsize=None)
def _subset_layers(n: int):
    """Index tables of the subsets of ``n`` products, grouped by size.

    Layer k holds ``(masks, members, prev_masks, prev_pos)``: the size-k
    masks in increasing order, their k member indices (shape ``(C, k)``),
    the masks with each member removed, and the position of those masks
    inside layer k-1.
    """
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    popcount = bits.sum(axis=1)
    pos = np.empty(1 << n, dtype=np.int64)
    layers = []
    for k in range(n + 1):
        in_layer = np.flatnonzero(popcount == k)
        pos[in_layer] = np.arange(len(in_layer))
        if k == 0:
            layers.append((in_layer, None, None, None))
            continue
        members = np.nonzero(bits[in_layer])[1].reshape(len(in_layer), k)
        prev = in_layer[:, None] ^ (1 << members)
        layers.append((in_layer, members, prev, pos[prev]))
    return layers


def _subset_sums(scores: np.ndarray) -> np.ndarray:
    """``out[mask, b]`` = sum of ``scores[b, j]`` over bits j of mask."""
    b, n = scores.shape
    out = np.zeros((1 << n, b))
    for j in range(n):
        out[1 << j : 2 << j] = out[: 1 << j] + scores[:, j]
    return out


def _hidden_mass(totals, displayed_sums):
    hidden = np.asarray(totals - displayed_sums, dtype=float)
    return np.where(hidden > _HIDDEN_RTOL * np.asarray(totals), hidden, 0.0)


def _inverse_remaining(scores: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """``out[mask, b]`` = 1 / (score mass still undrawn once the products of mask are drawn)."""
    # undisplayed mass + displayed mass outside the mask; summing the
    # complement directly avoids cancellation in total - sum(mask)
    sums = _subset_sums(scores)
    hidden = _hidden_mass(totals, sums[-1])
    with np.errstate(divide="ignore"):
        return 1.0 / (hidden + sums[::-1])


def _step_weights(layer, inv_remaining, scores_t):
    """``w[c, j, b]``: probability that member j of subset c is drawn right after the rest of c."""
    _, members, prev, _ = layer
    return inv_remaining[prev] * scores_t[members]


def first_k_set_probs(scores, total_score: float) -> np.ndarray:
    """Probability, for every subset S of the listed products, that the first |S| draws are S.

    Returned as an array indexed by bitmask.
    """
    scores = check_scores(scores)[None, :]
    n = scores.shape[1]
    if n > MAX_BANNER_SIZE:
        raise BannerTooLargeError(f"banner size {n} > {MAX_BANNER_SIZE}")
    out = np.ones(1 << n)
    if n == 0:
        return out
    layers = _subset_layers(n)
    inv = _inverse_remaining(scores, np.array([float(total_score)]))
    F = np.ones((1, 1))
    for k in range(1, n + 1):
        F = np.sum(F[layers[k][3]] * _step_weights(layers[k], inv, scores.T), axis=1)
        out[layers[k][0]] = F[:, 0]
    return out


def _rank_probs_chunk(scores: np.ndarray, totals: np.ndarray, rank: int) -> np.ndarray:
    b, n = scores.shape
    layers = _subset_layers(n)
    inv = _inverse_remaining(scores, totals)
    scores_t = scores.T
    # F[c, b]    = P(the first k draws are subset c of layer k)
    # G[c, p, b] = P(the first k draws are subset c and p is drawn at ``rank``), k >= rank
    F = np.ones((1, b))
    G = None
    for k in range(1, n + 1):
        layer = layers[k]
        members, prev_pos = layer[1], layer[3]
        w = _step_weights(layer, inv, scores_t)
        reach = F[prev_pos] * w
        if k == rank:
            G = np.zeros((len(members), n, b))
            G[np.arange(len(members))[:, None], members] = reach
        elif k > rank:
            # G of the smaller subset is zero at p because p is not in it
            G = np.einsum("cjpb,cjb->cpb", G[prev_pos], w)
        F = reach.sum(axis=1)
    return (G[0] / F[0]).T


def rank_probs_batch(scores, totals, rank: int) -> np.ndarray:
    """Conditional rank-placement probabilities for a batch of same-size banners.

    Parameters
    ----------
    scores : array-like, shape (n_banners, n)
        Logging scores of the displayed products of each banner.
    totals : array-like, shape (n_banners,)
        Total candidate score mass of each banner.
    rank : int
        1-based rank.

    Returns
    -------
    probs : ndarray, shape (n_banners, n)
        ``probs[b, j] = P(P_rank = product j | displayed set of banner b)``.
    """
    scores = np.asarray(scores, dtype=float)
    totals = np.asarray(totals, dtype=float)
    if scores.ndim != 2:
        raise ValueError("scores must be 2d (n_banners, n)")
    b, n = scores.shape
    if n > MAX_BANNER_SIZE:
        raise BannerTooLargeError(f"banner size {n} > {MAX_BANNER_SIZE}")
    if not 1 <= rank <= n:
        raise ValueError(f"rank {rank} outside 1..{n}")
    if totals.shape != (b,):
        raise ValueError("totals must have shape (n_banners,)")
    if b == 0:
        return np.zeros((0, n))
    # the widest layer gather holds about n * 2**n * n / 4 doubles per banner
    chunk = max(1, _DP_BUDGET // ((1 << n) * n * max(1, n // 4)))
    out = np.empty((b, n))
    for start in range(0, b, chunk):
        stop = start + chunk
        out[start:stop] = _rank_probs_chunk(scores[start:stop], totals[start:stop], rank)
    return out


def _resolve_displayed(candidates: ScoredCandidateSet, displayed) -> list[int]:
    displayed = list(displayed)
    if len(set(displayed)) != len(displayed):
        raise ValueError("duplicate product in displayed set")
    for j in displayed:
        if not (isinstance(j, (int, np.integer)) and 0 <= j < len(candidates)):
            raise ValueError(f"displayed index {j!r} is not a candidate index")
    return [int(j) for j in displayed]


def conditional_rank_probs(
    candidates: ScoredCandidateSet, displayed: Sequence[int], r: int
) -> RankDistribution:
    """Exact ``P(P_r = p | D = displayed)`` for each displayed product via the subset DP.

    ``displayed`` holds candidate indices; the returned probabilities follow
    the order of ``displayed``.
    """
    displayed = _resolve_displayed(candidates, displayed)
    n = len(displayed)
    if n > MAX_BANNER_SIZE:
        raise BannerTooLargeError(f"banner size {n} > {MAX_BANNER_SIZE}")
    if not 1 <= r <= n:
        raise ValueError(f"rank {r} outside 1..{n}")
    scores = candidates.scores[displayed][None, :]
    probs = rank_probs_batch(scores, np.array([candidates.total_score]), r)[0]
    return RankDistribution(rank=r, probs=probs)


@lru_cache(maxsize=MAX_ORACLE_SIZE)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def brute_force_rank_matrix(scores, total_score: float) -> np.ndarray:
    """``out[r-1, j] = P(P_r = product j | displayed set)`` for every rank, by enumerating orderings.

    Each of the n! orderings is weighted by its sequential-draw probability
    and the weights are renormalized over the displayed set.
    """
    scores = check_scores(scores)
    n = len(scores)
    if n > MAX_ORACLE_SIZE:
        raise ValueError(f"brute force oracle limited to n <= {MAX_ORACLE_SIZE}, got {n}")
    perms = _permutations(n)
    drawn = scores[perms]
    hidden = float(_hidden_mass(total_score, scores.sum()))
    # mass still available before each draw: hidden pool + products not drawn yet
    remaining = hidden + np.cumsum(drawn[:, ::-1], axis=1)[:, ::-1]
    weights = np.prod(drawn / remaining, axis=1)
    weights /= weights.sum()
    out = np.zeros((n, n))
    for r in range(n):
        out[r] = np.bincount(perms[:, r], weights=weights, minlength=n)
    return out


def brute_force_rank_probs(
    candidates: ScoredCandidateSet, displayed: Sequence[int], r: int
) -> RankDistribution:
    """Same quantity as :func:`conditional_rank_probs`, by enumerating all n! orderings."""
    displayed = _resolve_displayed(candidates, displayed)
    n = len(displayed)
    if n > MAX_ORACLE_SIZE:
        raise ValueError(f"brute force oracle limited to n <= {MAX_ORACLE_SIZE}, got {n}")
    if not 1 <= r <= n:
        raise ValueError(f"rank {r} outside 1..{n}")
    matrix = brute_force_rank_matrix(candidates.scores[displayed], candidates.total_score)
    return RankDistribution(rank=r, probs=matrix[r - 1])


def sample_rank_product(dist: RankDistribution, rng) -> int:
    """Categorical draw of a displayed-product index from ``dist``."""
    rng = _as_rng(rng)
    return int(inverse_cdf(dist.probs[None, :], np.array([rng.random()]))[0])


def inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise categorical draws: smallest j with cumsum(probs[b])[j] > u[b]."""
    cum = np.cumsum(probs, axis=1)
    # rescale so rounding in the last cumulative entry cannot push u past it
    cum /= cum[:, -1:]
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)
