#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
对照阶段：把有限元得到的 C̃(s) 与算术情形的闭式 C(s) 逐点比较
"""

from typing import Any, Dict

import numpy as np
from loguru import logger

from numerics.specialfn import case_for_surface, compare_closed_form
from stages.base_stage import BaseStage, output_path
from stages.scatter_stage import evaluator_for
from utils.export import write_csv

COMPARE_COLUMNS = ["re_s", "im_s", "re_C_closed", "im_C_closed", "re_C_computed", "im_C_computed", "abs_error",
                   "relative_error"]


class OracleStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="闭式对照", role="oracle", cache=cache)

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job", "spec", "data", "anchors")
        task = context["job"].compare
        case = case_for_surface(context["spec"])
        evaluator = evaluator_for(context)

        points = list(task.s_values) + [complex(0.5, t) for t in task.t_values]
        if not points:
            points = [complex(0.5, t) for t in np.linspace(1.0, 10.0, 10)]
        report = compare_closed_form(case, points, [evaluator.matrix(s) for s in points], threshold=task.threshold)

        path = write_csv(output_path(context, "compare.csv"), report.rows(), COMPARE_COLUMNS,
                         context.get("header", {}))
        verdict = "通过" if report.passed else "未通过"
        logger.info(f"闭式情形 {case.value}: {len(points)} 个点，最大相对误差 "
                    f"{report.max_relative_error:.3e}，阈值 {task.threshold:g}，{verdict}")
        return {"status": "success", "outputs": [str(path)],
                "summary": {"case": case.value, "max_relative_error": report.max_relative_error,
                            "threshold": task.threshold, "passed": report.passed}}
