#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json

import numpy as np
import pytest

from numerics.resonances import EmbeddedCandidate, ResonanceRecord, Trajectory
from utils.export import (
    format_csv_value,
    plot_resonances,
    plot_sigma_scan,
    plot_trajectories,
    provenance,
    write_csv,
    write_json,
)


@pytest.mark.parametrize("value,text", [
    (4.532360141827194, "4.53236"),
    (np.float64(1e-9), "1e-09"),
    (3, "3"),
    (np.int64(7), "7"),
    (True, "True"),
    (None, ""),
    (0.25 + 7.067362571j, "0.25+7.06736j"),
    ("critical-line", "critical-line"),
])
def test_csv_values_use_six_significant_digits(value, text):
    assert format_csv_value(value) == text


def test_write_csv_with_header(tmp_path):
    header = provenance("abc123", {"task": "resonance-scan"})
    rows = [{"re_s": 0.0, "im_s": 4.532360141827194, "extra": "ignored"}]
    path = write_csv(tmp_path / "nested" / "r.csv", rows, ["re_s", "im_s"], header)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config_hash: abc123"
    comments = [line for line in lines if line.startswith("#")]
    assert any(line.startswith("# versions: {") for line in comments)
    assert lines[len(comments):] == ["re_s,im_s", "0,4.53236"]


def test_write_json_keeps_full_precision(tmp_path):
    payload = {"s": 0.25 + 7.067362571j, "values": np.array([1 / 3, 2.0]), "n": np.int64(4), "bad": float("nan")}
    path = write_json(tmp_path / "r.json", payload, {"config_hash": "h"})
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["provenance"] == {"config_hash": "h"}
    assert document["data"]["s"] == [0.25, 7.067362571]
    assert document["data"]["values"][0] == 1 / 3
    assert document["data"]["n"] == 4
    assert document["data"]["bad"] == "nan"


def test_plots_are_svg(tmp_path):
    records = [ResonanceRecord(s=0.25 + 7.0674j, residual=1e-10), ResonanceRecord(s=4.5324j, residual=1e-10),
               ResonanceRecord(s=-0.3 + 2.0j, residual=1e-10)]
    path = plot_resonances(tmp_path / "res.svg", records, title="A0")
    assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")

    trajectory = Trajectory()
    for x in (0.7, 0.75, 0.8):
        trajectory.append(ResonanceRecord(s=complex(-0.1 * x, 4.5 + x), residual=0.0, parameter=x))
    frames = plot_trajectories(tmp_path / "frames", [trajectory])
    assert [f.name for f in frames] == ["frame_0000.svg", "frame_0001.svg", "frame_0002.svg"]

    t = np.linspace(1.0, 2.0, 11)
    sigma = np.abs(t - 1.5) + 1e-6
    candidates = [EmbeddedCandidate(t=1.5, sigma_min=1e-6, multiplicity=1, gap=1e5)]
    assert plot_sigma_scan(tmp_path / "sigma.svg", t, sigma, candidates).exists()
