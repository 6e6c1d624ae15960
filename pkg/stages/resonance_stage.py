#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
共振阶段：扫描、按种子求根、辐角原理计数与参数跟踪
"""

from typing import Any, Callable, Dict, List

from loguru import logger

from numerics.errors import StageError
from numerics.resonances import (
    ResonanceRecord,
    count_by_argument_principle,
    deflated_find,
    newton_find,
    resonance_scan,
    track,
)
from numerics.scattering import ScatteringEvaluator
from stages.base_stage import BaseStage, output_path
from stages.mesh_stage import MeshStage
from stages.scatter_stage import evaluator_for
from stages.spectral_stage import SpectralStage
from stages.surface_stage import resolve_surface
from utils.export import plot_resonances, plot_trajectories, write_csv, write_json

RESONANCE_COLUMNS = ["param", "re_s", "im_s", "residual", "class", "multiplicity"]


def family_evaluator_factory(context: Dict[str, Any], cache=None) -> Callable[[float], ScatteringEvaluator]:
    """参数值 -> 在该参数曲面上重新运行网格与谱数据阶段得到的求值器"""
    job = context["job"]
    parameter = job.track.parameter

    def factory(value: float) -> ScatteringEvaluator:
        sub = {"job": job, "spec": resolve_surface(job.surface, {parameter: value})}
        for stage in (MeshStage(cache), SpectralStage(cache)):
            result = stage.run(sub)
            if result["status"] != "success":
                raise StageError(stage.role, f"{parameter} = {value:g}: {result.get('message')}")
        logger.info(f"参数 {parameter} = {value:.6g} 的谱数据就绪")
        return ScatteringEvaluator(sub["data"], sub["anchors"], cusps=sub["spec"].cusps)

    return factory


class ResonanceStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="共振求解", role="resonances", cache=cache)

    def _write_records(self, context: Dict[str, Any], records: List[ResonanceRecord], title: str) -> List[str]:
        header = context.get("header", {})
        outputs = [
            write_csv(output_path(context, "resonances.csv"), [r.to_row() for r in records], RESONANCE_COLUMNS, header),
            write_json(output_path(context, "resonances.json"),
                       [{**r.to_row(), "members": r.members, "iterations": r.iterations} for r in records], header),
        ]
        if context["job"].output.plot:
            outputs.append(plot_resonances(output_path(context, "resonances.svg"), records, title))
        return [str(p) for p in outputs]

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job")
        job = context["job"]
        task = job.task

        if task == "resonance-track":
            trajectories = track(family_evaluator_factory(context, self.cache), job.track.grid, job.track.seeds,
                                 predictor_order=job.track.predictor_order, max_step=job.track.max_step)
            rows = [{**row, "trajectory": i, "truncated": traj.truncated}
                    for i, traj in enumerate(trajectories) for row in traj.to_rows()]
            header = context.get("header", {})
            outputs = [write_csv(output_path(context, "trajectories.csv"), rows,
                                 ["trajectory"] + RESONANCE_COLUMNS + ["truncated"], header)]
            if job.track.frames:
                frames_dir = output_path(context, "frames")
                outputs.extend(plot_trajectories(frames_dir, trajectories))
            return {"status": "success", "outputs": [str(p) for p in outputs],
                    "summary": {"trajectories": len(trajectories),
                                "truncated": sum(t.truncated for t in trajectories)}}

        self._require(context, "data", "anchors", "spec")
        evaluator = evaluator_for(context)
        title = f"{context['spec'].family} {context['spec'].parameters}"

        if task == "resonance-count":
            count = count_by_argument_principle(job.count.rectangle, evaluator, job.count.n_points)
            path = write_json(output_path(context, "count.json"),
                              {"rectangle": job.count.rectangle, "count": count}, context.get("header", {}))
            return {"status": "success", "outputs": [str(path)], "summary": {"count": count}}

        if task == "resonance-find":
            if job.find.deflate:
                records = deflated_find(job.find.seeds, evaluator)
            else:
                records = [newton_find(seed, evaluator) for seed in job.find.seeds]
        else:
            records = resonance_scan(evaluator, job.scan.window, job.scan.spacing)

        outputs = self._write_records(context, records, title)
        return {"status": "success", "outputs": outputs,
                "summary": {"resonances": len(records),
                            "by_class": {c: sum(r.classification == c for r in records)
                                         for c in sorted({r.classification for r in records})}}}
