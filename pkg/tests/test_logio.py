import json

import pytest

from pldisagree.logio import (
    LogFormatError,
    list_model_files,
    read_logs,
    read_model,
    write_logs,
    write_model,
)
from pldisagree.records import BannerRecord, ScoringModel
from pldisagree.sim import SimConfig, simulate_logs


def write_lines(path, objs, header=None):
    header = header or {"format": "pldisagree-log", "version": 1}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for o in objs:
            fh.write((o if isinstance(o, str) else json.dumps(o)) + "\n")


def good(**kw):
    obj = {"id": "b", "products": [["A", 1.0], ["B", 2.0]], "total_score": 5.0, "clicks": [], "shuffled": False}
    obj.update(kw)
    return obj


def test_empty_stream_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    assert write_logs([], path) == 0
    records, report = read_logs(path)
    assert records == [] and report.n_rejected == 0
    assert len(path.read_text().splitlines()) == 1


def test_simulated_stream_round_trip(tmp_path):
    records, _ = simulate_logs(SimConfig(seed=2, num_banners=1000, banner_sizes={2: 1, 6: 1}))
    path = tmp_path / "log.jsonl"
    write_logs(records, path, header={"seed": 2})
    back, report = read_logs(path)
    assert back == records
    assert report.accepted == 1000 and report.n_rejected == 0
    assert report.header["seed"] == 2


def test_boundary_click_and_awkward_floats_preserved(tmp_path):
    rec = BannerRecord("x", ["A", "B", "C"], [0.1 + 0.2, 1e-300 * 1e295, 7.0], 1e3 / 3, clicked_rank=3, shuffled=True)
    path = tmp_path / "one.jsonl"
    write_logs([rec], path)
    assert read_logs(path)[0] == [rec]


@pytest.mark.parametrize(
    "obj, reason",
    [
        (good(clicks=[1, 2]), "multiple clicks"),
        (good(products=[[f"p{i}", 1.0] for i in range(17)], total_score=20.0), "banner too large"),
        (good(products=[]), "empty banner"),
        (good(products=[["A", 1.0], ["A", 2.0]]), "duplicate product"),
        (good(products=[["A", 0.0], ["B", 2.0]]), "non-positive score"),
        (good(products=[["A", -1.0], ["B", 2.0]]), "non-positive score"),
        (good(products=[["A", 1e-6], ["B", 1e6]], total_score=2e6), "score range"),
        (good(clicks=[3]), "clicked rank out of range"),
        (good(clicks=[0]), "clicked rank out of range"),
        (good(total_score=2.5), "total score below displayed sum"),
        (good(total_score="5"), "malformed"),
        ({"id": "b"}, "malformed"),
        ("{not json", "malformed"),
        ("[1, 2]", "malformed"),
    ],
)
def test_invalid_records_rejected_with_reason(tmp_path, obj, reason):
    path = tmp_path / "bad.jsonl"
    write_lines(path, [good(id="ok1"), obj, good(id="ok2")])
    records, report = read_logs(path)
    assert [r.banner_id for r in records] == ["ok1", "ok2"]
    assert dict(report.rejected) == {reason: 1}
    assert report.examples[0][0] == 3


def test_rejections_are_counted_per_reason(tmp_path):
    path = tmp_path / "mixed.jsonl"
    write_lines(path, [good(clicks=[1, 2]), good(clicks=[1, 2]), good(clicks=[9]), good(clicks=[2])])
    records, report = read_logs(path)
    assert len(records) == 1 and records[0].clicked_rank == 2
    assert report.as_dict() == {
        "accepted": 1, "rejected": {"multiple clicks": 2, "clicked rank out of range": 1},
    }


def test_fully_displayed_pool_total_equal_to_sum(tmp_path):
    scores = [0.1, 0.2, 0.3]
    path = tmp_path / "full.jsonl"
    write_lines(path, [good(products=[["A", 0.1], ["B", 0.2], ["C", 0.3]], total_score=sum(reversed(scores)))])
    assert read_logs(path)[1].n_rejected == 0


@pytest.mark.parametrize(
    "header",
    ["not json", json.dumps({"format": "other", "version": 1}), json.dumps({"format": "pldisagree-log", "version": 2}), ""],
)
def test_bad_header_is_fatal(tmp_path, header):
    path = tmp_path / "h.jsonl"
    path.write_text(header + "\n" + json.dumps(good()) + "\n")
    with pytest.raises(LogFormatError):
        read_logs(path)


def test_model_round_trip(tmp_path):
    model = ScoringModel("my model", {"p1": 0.1 + 0.2, "p2": -3.5e-200, "p 3": 1e300})
    path = tmp_path / "m.model"
    write_model(model, path)
    back = read_model(path)
    assert back.name == "my model" and back.scores == model.scores
    assert path.read_text().splitlines()[0] == "# model: my model"


@pytest.mark.parametrize(
    "text",
    ["p1\t1.0\n", "# model: m\np1 1.0\n", "# model: m\np1\tabc\n", "# model: m\np1\t1\np1\t2\n"],
)
def test_bad_model_files(tmp_path, text):
    path = tmp_path / "bad.model"
    path.write_text(text)
    with pytest.raises(LogFormatError):
        read_model(path)


def test_model_writer_rejects_tabs(tmp_path):
    with pytest.raises(ValueError):
        write_model(ScoringModel("m", {"a\tb": 1.0}), tmp_path / "x.model")


def test_list_model_files(tmp_path):
    for name in ("b.model", "a.model", "notes.txt"):
        (tmp_path / name).write_text("")
    assert [p.rsplit("/", 1)[1] for p in list_model_files(tmp_path)] == ["a.model", "b.model"]
