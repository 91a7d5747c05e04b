"""Randomized self-check of the rank-placement DP against exhaustive enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .plackett_luce import (
    MAX_ORACLE_SIZE,
    brute_force_rank_matrix,
    first_k_set_probs,
    rank_probs_batch,
)

DEFAULT_TOLERANCE = 1e-10


@dataclass
class OracleReport:
    max_n: int
    trials: int
    seed: int
    tolerance: float
    worst_dp_vs_brute: float = 0.0
    worst_normalization: float = 0.0
    worst_prefix_normalization: float = 0.0
    worst_case: dict = field(default_factory=dict)

    @property
    def worst_deviation(self) -> float:
        return max(self.worst_dp_vs_brute, self.worst_normalization, self.worst_prefix_normalization)

    @property
    def passed(self) -> bool:
        return bool(self.worst_deviation <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "max_n": self.max_n,
            "trials": self.trials,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "worst_dp_vs_brute": float(self.worst_dp_vs_brute),
            "worst_normalization": float(self.worst_normalization),
            "worst_prefix_normalization": float(self.worst_prefix_normalization),
            "worst_deviation": float(self.worst_deviation),
            "worst_case": self.worst_case,
            "passed": bool(self.passed),
        }


def _trial_scores(rng, n: int, adversarial: bool):
    """Displayed scores plus the total mass of a pool with 0-3 hidden extra candidates."""
    if adversarial:
        # one banner spanning a 1e6 score ratio
        scores = np.exp(rng.uniform(0, np.log(1e6), n))
        scores[rng.integers(n)] = 1.0
        scores[rng.integers(n)] = 1e6
    else:
        scores = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    hidden = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), rng.integers(0, 4)))
    return scores, float(scores.sum() + hidden.sum())


def run_oracle(max_n: int, trials: int, seed: int = 0, tolerance: float = DEFAULT_TOLERANCE) -> OracleReport:
    """Compare DP and brute force on ``trials`` random banners with sizes in ``1..max_n``.

    Every rank of every banner is checked.  Odd trials use adversarial
    scores.  Each trial also checks that the DP output sums to one and that
    the first-k set probabilities sum to one over all k-subsets when the
    banner shows its whole candidate pool.
    """
    if not 1 <= max_n <= MAX_ORACLE_SIZE:
        raise ValueError(f"max_n must lie in 1..{MAX_ORACLE_SIZE}")
    rng = np.random.default_rng(seed)
    report = OracleReport(max_n=max_n, trials=trials, seed=seed, tolerance=tolerance)
    for t in range(trials):
        n = int(rng.integers(1, max_n + 1))
        scores, total = _trial_scores(rng, n, adversarial=bool(t % 2))
        brute = brute_force_rank_matrix(scores, total)
        for r in range(1, n + 1):
            dp = rank_probs_batch(scores[None, :], np.array([total]), r)[0]
            dev = float(np.abs(dp - brute[r - 1]).max())
            if dev > report.worst_dp_vs_brute:
                report.worst_dp_vs_brute = dev
                report.worst_case = {"trial": t, "n": n, "rank": r, "deviation": dev}
            report.worst_normalization = max(report.worst_normalization, abs(dp.sum() - 1.0))
        prefix = first_k_set_probs(scores, scores.sum())
        for k in range(n + 1):
            layer = sum(prefix[sum(1 << j for j in c)] for c in itertools.combinations(range(n), k))
            report.worst_prefix_normalization = max(report.worst_prefix_normalization, abs(layer - 1.0))
    return report
