#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
曲面阶段：把作业中的曲面引用解析为经过校验的 SurfaceSpec
"""

from pathlib import Path
from typing import Any, Dict, Optional

from loguru import logger

from config.job import SurfaceRef
from numerics.geometry import SurfaceSpec, build_surface, spec_from_json, surface_from_name
from stages.base_stage import BaseStage


def resolve_surface(ref: SurfaceRef, overrides: Optional[Dict[str, float]] = None) -> SurfaceSpec:
    """预设名 / 族 + 参数 / JSON 文件；overrides 覆盖族参数（参数跟踪用）"""
    if ref.name is not None:
        if overrides:
            raise ValueError("预设曲面不接受参数覆盖")
        spec = surface_from_name(ref.name)
    elif ref.family is not None:
        params = {**ref.parameters, **(overrides or {})}
        spec = build_surface(ref.family, params, reduction=ref.reduction)
    else:
        spec = spec_from_json(Path(ref.spec_path).read_text(encoding="utf-8"))
    return spec


class SurfaceStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="曲面构造", role="surface", cache=cache)

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job")
        job = context["job"]
        spec = resolve_surface(job.surface)
        spec.verify_identifications()
        context["spec"] = spec
        summary = spec.describe()
        logger.info(f"曲面 {spec.family} {spec.parameters}: {len(spec.arcs)} 段边界弧，{spec.p} 个尖点")
        return {"status": "success", "summary": summary}
