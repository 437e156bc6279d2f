from __future__ import annotations

import json
import math

import numpy as np

from avgctl.report import build_report, canonical_json, content_hash, to_plain, write_csv, write_json


def test_to_plain_converts_numpy_and_non_finite():
    out = to_plain({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": math.inf, 1: (np.int64(2),)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": "inf", "1": [2]}
    json.dumps(out)


def test_hash_is_order_independent():
    assert content_hash({"a": 1, "b": [1.0, 2.0]}) == content_hash({"b": [1.0, 2.0], "a": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})
    assert canonical_json({"b": 1, "a": 0.1}) == '{"a":0.1,"b":1}'


def test_report_envelope(tmp_path):
    rep = build_report("shoot", {"system": "s"}, 3, {"T0": np.float64(1.0)}, True)
    assert rep["schema"] == "avgctl-report-1" and rep["passed"] is True
    assert rep["input_hash"] == build_report("shoot", {"system": "s"}, 3, {"T0": 2.0}, False)["input_hash"]
    path = write_json(tmp_path / "r.json", rep)
    assert json.loads(path.read_text()) == rep
    assert path.read_text().endswith("\n")


def test_csv_round_trip_floats(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, -2.5]
    path = write_csv(tmp_path / "t.csv", ["name", "value"], [["x,y", v] for v in vals])
    raw = path.read_bytes().decode()
    assert raw.startswith("# schema: avgctl-table-1\n")
    assert "\r\n" in raw and '"x,y"' in raw
    import csv

    rows = list(csv.reader(raw.splitlines()[1:]))
    assert rows[0] == ["name", "value"]
    assert [float(r[1]) for r in rows[1:]] == vals
