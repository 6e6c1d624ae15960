#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
散射阶段：构造 C̃(s) 求值器，并按作业给出的 s / t 值输出散射矩阵与诊断量。
"""

from typing import Any, Dict, List

import numpy as np
from loguru import logger

from numerics.scattering import ScatteringEvaluator
from stages.base_stage import BaseStage, output_path
from utils.export import write_csv, write_json

SCATTER_COLUMNS = ["re_s", "im_s", "re_det_C", "im_det_C", "abs_det_C", "sigma_p", "sigma_next", "gap_ok",
                   "condition", "unitarity_defect", "functional_defect", "error_bound"]


def evaluator_for(context: Dict[str, Any], strict: bool = False) -> ScatteringEvaluator:
    if context.get("evaluator") is None:
        context["evaluator"] = ScatteringEvaluator(context["data"], context["anchors"],
                                                   cusps=context["spec"].cusps, strict=strict)
    return context["evaluator"]


class ScatterStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="散射矩阵", role="scatter", cache=cache)

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job", "spec", "data", "anchors")
        task = context["job"].scatter
        evaluator = evaluator_for(context, strict=task.strict)

        points = list(task.s_values) + [complex(0.5, t) for t in task.t_values]
        records: List[Dict[str, Any]] = []
        rows: List[Dict[str, Any]] = []
        for s in points:
            result = evaluator(s)
            det = complex(np.linalg.det(result.C))
            on_line = abs(s.real - 0.5) < 1e-14
            unitarity = abs(float(np.linalg.norm(result.C, 2)) - 1.0) if on_line else None
            functional = evaluator.functional_defect(s)
            bound = evaluator.error_estimate(s) if task.error_bound else None
            record = result.to_record()
            record.update({"unitarity_defect": unitarity, "functional_defect": functional, "error_bound": bound})
            records.append(record)
            rows.append({"re_s": s.real, "im_s": s.imag, "re_det_C": det.real, "im_det_C": det.imag,
                         "abs_det_C": abs(det), "sigma_p": result.sigma_p, "sigma_next": result.sigma_next,
                         "gap_ok": result.gap_ok, "condition": result.condition,
                         "unitarity_defect": unitarity, "functional_defect": functional, "error_bound": bound})
            logger.debug(f"C̃({s}) 计算完成，det = {det:.8g}")

        header = context.get("header", {})
        outputs = [
            write_json(output_path(context, "scatter.json"), records, header),
            write_csv(output_path(context, "scatter.csv"), rows, SCATTER_COLUMNS, header),
        ]
        if any(not r["gap_ok"] for r in rows):
            logger.warning("部分 s 值的核谱隙不足，可能接近嵌入特征值或近谱共振")
        return {"status": "success", "outputs": [str(p) for p in outputs], "summary": {"points": len(points)}}
