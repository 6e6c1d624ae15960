#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json

import pytest

from config.job import JobConfig
from numerics.errors import NeumannPoleError, StageError
from stages.base_stage import BaseStage, output_path
from utils.orchestrator import TASK_PIPELINES, Orchestrator


class WritingStage(BaseStage):
    """写出一个文件并在 context 中留下标记"""

    def __init__(self, role):
        super().__init__(name=f"测试 {role}", role=role)

    def _process(self, context):
        path = output_path(context, f"{self.role}.txt")
        path.write_text(self.role, encoding="utf-8")
        context[self.role] = True
        return {"outputs": [str(path)], "summary": {"role": self.role}}


class FailingStage(BaseStage):
    def __init__(self, role, error):
        super().__init__(name=f"失败 {role}", role=role)
        self.error = error

    def _process(self, context):
        raise self.error


class Unimplemented(BaseStage):
    pass


def make_job(tmp_path, task="spectral-data"):
    return JobConfig.model_validate({
        "surface": {"name": "A0"}, "task": task, "mesh": {"n_boundary": 32}, "fem": {"J": 4},
        "output": {"directory": str(tmp_path / "out"), "prefix": "t", "plot": False},
    })


@pytest.fixture
def orchestrator(tmp_path):
    orch = Orchestrator(cache=None, log_dir=tmp_path / "logs")
    for role in orch.stages:
        orch.stages[role] = WritingStage(role)
    return orch


def test_runs_pipeline_in_order(orchestrator, tmp_path):
    result = orchestrator.run_job(make_job(tmp_path), run_id="run_ok")
    assert list(result["stages"]) == TASK_PIPELINES["spectral-data"]
    assert all(r["status"] == "success" for r in result["stages"].values())
    assert [p.rsplit("_", 1)[-1] for p in result["outputs"]] == ["surface.txt", "mesh.txt", "spectral.txt"]
    assert result["context"]["spectral"] is True


def test_interaction_log_is_written(orchestrator, tmp_path):
    orchestrator.run_job(make_job(tmp_path), run_id="run_log")
    events = json.loads((tmp_path / "logs" / "interaction_log_run_log.json").read_text(encoding="utf-8"))
    assert events[0]["source"] == "User"
    assert events[-1]["target"] == "User"
    assert {"timestamp", "source", "target", "action", "details", "human_readable"} <= set(events[1])
    assert "mesh" in {e["target"] for e in events}


def test_stage_error_carries_attribution_and_cleans_up(orchestrator, tmp_path):
    orchestrator.stages["spectral"] = FailingStage("spectral", NeumannPoleError("太近", eigenvalue=9.25, index=3))
    with pytest.raises(StageError) as info:
        orchestrator.run_job(make_job(tmp_path), run_id="run_fail")
    assert info.value.stage == "spectral"
    assert "太近" in str(info.value)
    assert not (tmp_path / "out" / "t_surface.txt").exists()
    assert not (tmp_path / "out" / "t_mesh.txt").exists()
    events = json.loads(orchestrator.log_path.read_text(encoding="utf-8"))
    assert events[-1]["details"]["status"] == "error"


def test_track_pipeline_skips_spectral_stages(orchestrator, tmp_path):
    job = JobConfig.model_validate({
        "surface": {"family": "B", "parameters": {"r": 0.75}}, "task": "resonance-track",
        "mesh": {"n_boundary": 32}, "fem": {"J": 4},
        "track": {"seeds": ["0+4.5j"], "parameter": "r", "grid": [0.75, 0.8]},
        "output": {"directory": str(tmp_path / "out")},
    })
    result = orchestrator.run_job(job)
    assert list(result["stages"]) == ["resonances"]
    assert result["run_id"].startswith("run_")


@pytest.mark.parametrize("error,error_type", [
    (NeumannPoleError("极点", eigenvalue=1.0, index=1), "NeumannPoleError"),
    (ValueError("坏输入"), "ValueError"),
    (KeyError("k"), "KeyError"),
])
def test_base_stage_never_raises(error, error_type):
    result = FailingStage("scatter", error).run({})
    assert result["status"] == "error"
    assert result["error_type"] == error_type
    assert result["stage"] == "scatter"
    assert "elapsed_s" in result


def test_unimplemented_stage_reports_error():
    stage = Unimplemented(name="空", role="empty")
    result = stage.run({})
    assert result["error_type"] == "NotImplementedError"
    assert [h["direction"] for h in stage.history()] == ["received", "sent"]


def test_stage_requires_role():
    with pytest.raises(ValueError):
        Unimplemented(name="空", role="")


def test_missing_upstream_is_reported():
    class NeedsMesh(BaseStage):
        def _process(self, context):
            self._require(context, "mesh")
            return {}

    result = NeedsMesh(name="需要网格", role="x").run({"mesh": None})
    assert result["status"] == "error"
    assert "mesh" in result["message"]
