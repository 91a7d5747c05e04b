"""Line-delimited banner logs and plain-text scoring-model files.

Log files are JSON Lines.  The first line is a header object::

    {"format": "pldisagree-log", "version": 1, "seed": 0, "generator": {...}}

and every following line is one banner::

    {"id": "b0", "products": [["p017", 3.2], ["p004", 1.5]],
     "total_score": 20.7, "clicks": [1], "shuffled": false}

``products`` lists (product id, logging score) pairs in display order,
``clicks`` holds the 1-based clicked ranks (empty for no click; more than
one click makes the record invalid).  Floats are written with ``repr`` so
they read back bit-identical.

Model files are UTF-8 text: a ``# model: <name>`` header line, then one
``<product-id>\\t<score>`` pair per line.
"""
from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .records import (
    MALFORMED,
    MULTIPLE_CLICKS,
    BannerRecord,
    InvalidRecordError,
    ScoringModel,
    validate_record,
)

LOG_FORMAT = "pldisagree-log"
LOG_VERSION = 1
MODEL_HEADER = "# model:"


class LogFormatError(ValueError):
    """The file cannot be read at all (bad header, unsupported version)."""


@dataclass
class IngestionReport:
    header: dict = field(default_factory=dict)
    accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    # (line number, reason) for the first rejected lines
    examples: list = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return sum(self.rejected.values())

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": dict(self.rejected)}


def record_to_json(rec: BannerRecord) -> dict:
    return {
        "id": rec.banner_id,
        "products": [[p, s] for p, s in zip(rec.products, rec.scores)],
        "total_score": rec.total_score,
        "clicks": [] if rec.clicked_rank is None else [rec.clicked_rank],
        "shuffled": rec.shuffled,
    }


def record_from_json(obj: dict) -> BannerRecord:
    """Parse and validate one banner object; raises :class:`InvalidRecordError`."""
    try:
        pairs = obj["products"]
        products = tuple(p for p, _ in pairs)
        scores = tuple(float(s) for _, s in pairs)
        clicks = obj.get("clicks", [])
        if isinstance(clicks, int):
            clicks = [clicks]
        clicks = list(clicks)
        total = obj["total_score"]
        if isinstance(total, bool) or not isinstance(total, (int, float)):
            raise TypeError("total_score must be a number")
        shuffled = obj.get("shuffled", False)
        if not isinstance(shuffled, bool):
            raise TypeError("shuffled must be a boolean")
        banner_id = obj.get("id")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidRecordError(MALFORMED, str(exc)) from None
    if len(clicks) > 1:
        raise InvalidRecordError(MULTIPLE_CLICKS, str(clicks))
    rec = BannerRecord(
        banner_id=banner_id,
        products=products,
        scores=scores,
        total_score=float(total),
        clicked_rank=clicks[0] if clicks else None,
        shuffled=shuffled,
    )
    return validate_record(rec)


def write_logs(records: Iterable[BannerRecord], path, header: dict | None = None) -> int:
    """Write ``records`` after a header line; returns the number of records written."""
    head = {"format": LOG_FORMAT, "version": LOG_VERSION}
    head.update(header or {})
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for rec in records:
            try:
                fh.write(json.dumps(record_to_json(rec)) + "\n")
            except (TypeError, ValueError) as exc:
                raise OSError(f"{path}: cannot write record {count + 1}: {exc}") from exc
            count += 1
    return count


def _read_header(fh, path) -> dict:
    line = fh.readline()
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"{path}:1: unreadable header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != LOG_FORMAT:
        raise LogFormatError(f"{path}:1: not a {LOG_FORMAT} file")
    if header.get("version") != LOG_VERSION:
        raise LogFormatError(
            f"{path}:1: unsupported version {header.get('version')!r} (expected {LOG_VERSION})"
        )
    return header


def iter_logs(path, report: IngestionReport | None = None) -> Iterator[BannerRecord]:
    """Stream valid records from ``path`` in file order, tallying rejects into ``report``."""
    report = report if report is not None else IngestionReport()
    with open(path, encoding="utf-8") as fh:
        report.header = _read_header(fh, path)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise InvalidRecordError(MALFORMED, "record is not an object")
                rec = record_from_json(obj)
            except json.JSONDecodeError as exc:
                reason = MALFORMED
                detail = str(exc)
            except InvalidRecordError as exc:
                reason = exc.reason
                detail = str(exc)
            else:
                report.accepted += 1
                yield rec
                continue
            report.rejected[reason] += 1
            if len(report.examples) < 20:
                report.examples.append((lineno, detail))


def read_logs(path) -> tuple[list, IngestionReport]:
    """Read every valid record of ``path``; returns ``(records, report)``."""
    report = IngestionReport()
    records = list(iter_logs(path, report))
    return records, report


def write_model(model: ScoringModel, path) -> None:
    name = str(model.name)
    if "\n" in name:
        raise ValueError("model name must be a single line")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MODEL_HEADER} {name}\n")
        for product, score in model.scores.items():
            product = str(product)
            if "\t" in product or "\n" in product:
                raise ValueError(f"product id {product!r} contains a tab or newline")
            fh.write(f"{product}\t{float(score)!r}\n")


def read_model(path) -> ScoringModel:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(MODEL_HEADER):
            raise LogFormatError(f"{path}:1: missing '{MODEL_HEADER} <name>' header")
        name = first[len(MODEL_HEADER):].strip()
        scores = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                product, value = line.split("\t")
                value = float(value)
            except ValueError:
                raise LogFormatError(f"{path}:{lineno}: expected '<product>\\t<score>'") from None
            if product in scores:
                raise LogFormatError(f"{path}:{lineno}: duplicate product {product!r}")
            scores[product] = value
    return ScoringModel(name, scores)


def list_model_files(path) -> list:
    """Paths of the ``*.model`` files in a directory, sorted by file name."""
    names = sorted(f for f in os.listdir(path) if f.endswith(".model"))
    return [(os.path.join(path, f)) for f in names]
