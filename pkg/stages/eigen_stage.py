#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
特征值阶段：临界线上的嵌入特征值扫描，以及奇子空间的纯离散谱
"""

from typing import Any, Dict

import numpy as np
from loguru import logger

from numerics.fem import dirichlet_spectrum
from numerics.resonances import embedded_scan
from stages.base_stage import BaseStage, output_path
from stages.scatter_stage import evaluator_for
from stages.spectral_stage import system_for
from utils.export import plot_sigma_scan, write_csv


class EigenStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="嵌入特征值", role="eigen", cache=cache)

    def _embedded(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "data", "anchors", "spec")
        task = context["job"].embedded
        grid = np.arange(task.t_min, task.t_max + 0.5 * task.t_step, task.t_step)
        result = embedded_scan(evaluator_for(context), grid, threshold=task.threshold)
        header = context.get("header", {})
        outputs = [
            write_csv(output_path(context, "sigma_scan.csv"),
                      [{"t": t, "sigma_min": s} for t, s in result.samples()], ["t", "sigma_min"], header),
            write_csv(output_path(context, "embedded.csv"), [c.to_row() for c in result.candidates],
                      ["t", "lambda", "sigma_min", "multiplicity", "gap"], header),
        ]
        if context["job"].output.plot:
            outputs.append(plot_sigma_scan(output_path(context, "sigma_scan.svg"), result.t, result.sigma,
                                           result.candidates))
        return {"status": "success", "outputs": [str(p) for p in outputs],
                "summary": {"candidates": [round(c.t, 6) for c in result.candidates]}}

    def _odd(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "spec", "mesh")
        spec = context["spec"]
        if spec.symmetry_reduction != "odd":
            raise ValueError(f"奇子空间谱需要 odd 约化的曲面，当前为 {spec.symmetry_reduction}")
        values, t = dirichlet_spectrum(system_for(context), context["job"].odd.n)
        rows = [{"index": i + 1, "lambda": lam, "t": tv} for i, (lam, tv) in enumerate(zip(values, t))]
        path = write_csv(output_path(context, "odd_spectrum.csv"), rows, ["index", "lambda", "t"],
                         context.get("header", {}))
        logger.info(f"奇子空间前 {len(values)} 个特征值: t = {np.round(t[:5], 5).tolist()} ...")
        return {"status": "success", "outputs": [str(path)], "summary": {"t": t.tolist()}}

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job")
        if context["job"].task == "odd-spectrum":
            return self._odd(context)
        return self._embedded(context)
