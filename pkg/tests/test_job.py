#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json

import pytest
from pydantic import ValidationError

from config.job import JobConfig, SurfaceRef, complex_to_text, load_job, to_complex
from config.settings import ENV_PREFIX, Settings


def make_job(**overrides):
    payload = {"surface": {"name": "A0"}, "task": "spectral-data", "mesh": {"n_boundary": 64}, "fem": {"J": 8}}
    payload.update(overrides)
    return JobConfig.model_validate(payload)


@pytest.mark.parametrize("value,expected", [
    ("0.5+6j", 0.5 + 6j),
    ("0.25 - 7.0674i", 0.25 - 7.0674j),
    ([0.1, -2.0], 0.1 - 2.0j),
    (3, 3 + 0j),
    (1 + 1j, 1 + 1j),
])
def test_to_complex(value, expected):
    assert to_complex(value) == expected


def test_to_complex_rejects_garbage():
    with pytest.raises(ValueError):
        to_complex({"re": 1})
    with pytest.raises(ValueError):
        to_complex("abc")


def test_complex_text_is_exact():
    value = 0.1 + 1 / 3 * 1j
    assert to_complex(complex_to_text(value)) == value


def test_surface_reference_needs_exactly_one_source():
    with pytest.raises(ValidationError):
        SurfaceRef()
    with pytest.raises(ValidationError):
        SurfaceRef(name="A0", family="A")
    assert SurfaceRef(family="B", parameters={"r": 0.8}).parameters == {"r": 0.8}


def test_default_blocks_are_created():
    assert make_job(task="resonance-scan").scan.window == [-0.2, 0.45, 0.5, 20.0]
    assert make_job(task="odd-spectrum", surface={"name": "A0_odd"}).odd.n == 10


def test_missing_task_block():
    with pytest.raises(ValidationError, match="find"):
        make_job(task="resonance-find")
    job = make_job(task="resonance-find", find={"seeds": ["0.25+7j", [0.0, 4.5]]})
    assert job.find.seeds == [0.25 + 7j, 4.5j]


def test_truncation_limited_by_boundary_resolution():
    with pytest.raises(ValidationError):
        make_job(fem={"J": 17})


def test_track_needs_family_surface():
    track = {"seeds": ["0+4.5j"], "parameter": "r", "grid": [0.7, 0.8]}
    with pytest.raises(ValidationError):
        make_job(task="resonance-track", track=track)
    job = make_job(task="resonance-track", track=track, surface={"family": "B", "parameters": {"r": 0.7}})
    assert job.track.predictor_order == 3


def test_odd_spectrum_needs_odd_reduction():
    with pytest.raises(ValidationError):
        make_job(task="odd-spectrum", surface={"family": "A", "parameters": {"a": 6.0}})
    make_job(task="odd-spectrum", surface={"family": "A", "parameters": {"a": 6.0}, "reduction": "odd"})


def test_embedded_window_ordering():
    with pytest.raises(ValidationError):
        make_job(task="embedded-scan", embedded={"t_min": 5.0, "t_max": 4.0, "t_step": 0.1})


def test_scatter_block_needs_points():
    with pytest.raises(ValidationError):
        make_job(task="scatter-eval", scatter={})


def test_config_hash_is_stable():
    first = make_job(task="scatter-eval", scatter={"s_values": ["0.5+2j"]})
    second = make_job(task="scatter-eval", scatter={"s_values": [[0.5, 2.0]]})
    assert first.config_hash() == second.config_hash()
    assert len(first.config_hash()) == 64
    different = make_job(task="scatter-eval", scatter={"s_values": ["0.5+3j"]})
    assert different.config_hash() != first.config_hash()
    assert json.loads(first.canonical_json())["scatter"]["s_values"] == ["0.5+2j"]


def test_load_job(tmp_path):
    path = tmp_path / "job.json"
    path.write_text(json.dumps({"surface": {"name": "B_sqrt2"}, "task": "resonance-count",
                                "mesh": {"n_boundary": 64}, "fem": {"J": 4},
                                "count": {"rectangle": [-0.1, 0.1, 4.0, 5.0]}}), encoding="utf-8")
    job = load_job(path)
    assert job.count.n_points == 400
    path.write_text("{\"task\": \"resonance-count\"}", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_job(path)


def test_element_order_from_environment(monkeypatch):
    for name in ("ELEMENT_ORDER", "MESH_H"):
        monkeypatch.delenv(ENV_PREFIX + name, raising=False)
    settings = Settings()
    assert settings.fem_config["element_order"] == 1
    assert settings.mesh_config["h"] <= 0.02
    monkeypatch.setenv(ENV_PREFIX + "ELEMENT_ORDER", "2")
    assert Settings().fem_config["element_order"] == 2
