"""Evaluate a set of models over metric kinds and log subsets, and correlate the results."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from .estimators import DisagreementEstimator, normalize_metric, normalize_subset
from .records import ScoringModel

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    model: str
    metric: str
    subset: str
    value: Optional[float]
    std_error: Optional[float]
    accepted: int
    rejected_no_pair: int
    rejected_same_product: int
    rejected_tied_score: int
    n_banners: int
    error: str = ""


COLUMNS = [f.name for f in fields(SweepRow)]


def run_sweep(records, models: Iterable, metrics, subsets, seed: int = 0, resamples: int = 1) -> list:
    """One :class:`SweepRow` per (model, metric, subset); failures become rows with ``error`` set.

    ``models`` may hold :class:`ScoringModel` objects or zero-argument
    callables returning one (so unreadable model files fail per model).
    """
    metrics = [normalize_metric(m) for m in metrics]
    subsets = [normalize_subset(s) for s in subsets]
    estimators = {}
    rows = []
    for item in models:
        try:
            model = item() if callable(item) else item
            name = model.name
        except Exception as exc:  # noqa: BLE001 - reported in the row, sweep continues
            name = getattr(item, "name", str(item))
            log.error("cannot load model %s: %s", name, exc)
            for metric in metrics:
                for subset in subsets:
                    rows.append(SweepRow(name, metric, subset, None, None, 0, 0, 0, 0, 0, str(exc)))
            continue
        for metric in metrics:
            if metric not in estimators:
                estimators[metric] = DisagreementEstimator(
                    metric=metric, resamples=resamples, random_state=seed
                ).fit(records)
            est = estimators[metric]
            for subset in subsets:
                est.set_params(subset=subset)
                try:
                    r = est.estimate(model)
                except KeyError as exc:
                    log.error("model %s failed on %s/%s: %s", name, metric, subset, exc)
                    rows.append(SweepRow(name, metric, subset, None, None, 0, 0, 0, 0, 0, str(exc)))
                    continue
                rows.append(SweepRow(
                    name, metric, subset, r.value, r.std_error, r.accepted, r.rejected_no_pair,
                    r.rejected_same_product, r.rejected_tied_score, r.n_banners,
                    "" if r.defined else "metric undefined",
                ))
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_sweep_csv(rows, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in asdict(row).items()})


def read_sweep_csv(fh) -> list:
    rows = []
    for raw in csv.DictReader(fh):
        def num(key, cast):
            return cast(raw[key]) if raw.get(key, "") != "" else None
        rows.append(SweepRow(
            model=raw["model"], metric=raw["metric"], subset=raw["subset"],
            value=num("value", float), std_error=num("std_error", float),
            accepted=int(raw["accepted"]), rejected_no_pair=int(raw["rejected_no_pair"]),
            rejected_same_product=int(raw["rejected_same_product"]),
            rejected_tied_score=int(raw["rejected_tied_score"]),
            n_banners=int(raw["n_banners"]), error=raw.get("error", ""),
        ))
    return rows


def parse_column(spec: str) -> tuple[str, str]:
    """``"pd:shuffled"`` -> ``("pd", "shuffled")``."""
    metric, sep, subset = spec.partition(":")
    if not sep:
        raise ValueError(f"column spec {spec!r} must look like '<metric>:<subset>'")
    return normalize_metric(metric), normalize_subset(subset)


def pivot(rows, spec: str) -> dict:
    metric, subset = parse_column(spec)
    return {
        r.model: r.value for r in rows
        if r.metric == metric and r.subset == subset and r.value is not None
    }


@dataclass
class Comparison:
    x: str
    y: str
    pairs: list  # (model, x value, y value)
    pearson: Optional[float]
    spearman: Optional[float]
    note: str = ""

    @property
    def defined(self) -> bool:
        return self.pearson is not None and self.spearman is not None

    def as_dict(self) -> dict:
        return {
            "x": self.x, "y": self.y, "n": len(self.pairs),
            "pearson_r": self.pearson, "spearman_rho": self.spearman,
            "note": self.note,
            "pairs": [{"model": m, "x": a, "y": b} for m, a, b in self.pairs],
        }


def correlate(x: dict, y: dict, x_name: str = "x", y_name: str = "y") -> Comparison:
    """Pearson and Spearman correlation over the models present in both columns."""
    models = sorted(set(x) & set(y))
    pairs = [(m, x[m], y[m]) for m in models]
    if len(pairs) < 3:
        return Comparison(x_name, y_name, pairs, None, None, f"need >= 3 paired rows, got {len(pairs)}")
    a = np.array([p[1] for p in pairs])
    b = np.array([p[2] for p in pairs])
    if np.all(a == a[0]) or np.all(b == b[0]):
        return Comparison(x_name, y_name, pairs, None, None, "constant column: correlation undefined")
    pearson = float(stats.pearsonr(a, b)[0])
    spearman = float(stats.spearmanr(a, b)[0])
    if math.isnan(pearson) or math.isnan(spearman):
        return Comparison(x_name, y_name, pairs, None, None, "correlation undefined")
    return Comparison(x_name, y_name, pairs, pearson, spearman)


def compare(rows, x_spec: str, y_spec: str) -> Comparison:
    return correlate(pivot(rows, x_spec), pivot(rows, y_spec), x_spec, y_spec)
