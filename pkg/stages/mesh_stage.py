#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
网格阶段：三角剖分（按内容哈希缓存）
"""

from typing import Any, Dict

from loguru import logger

from numerics.mesh import Mesh, build_mesh
from stages.base_stage import BaseStage


def mesh_description(context: Dict[str, Any]) -> Dict[str, Any]:
    job = context["job"]
    return {"surface": context["spec"].model_dump(mode="json"), "mesh": job.mesh.model_dump(mode="json")}


class MeshStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="网格生成", role="mesh", cache=cache)

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job", "spec")
        params = context["job"].mesh
        spec = context["spec"]

        def compute() -> Mesh:
            return build_mesh(spec, h=params.h, n_boundary=params.n_boundary, refinements=params.refinements)

        if self.cache is not None:
            mesh = self.cache.get_or_compute(
                "mesh", mesh_description(context), compute,
                writer=lambda value, path: value.save(path), loader=Mesh.load,
            )
        else:
            mesh = compute()
        context["mesh"] = mesh
        summary = {"vertices": mesh.n_vertices, "triangles": int(len(mesh.triangles)), "dofs": mesh.n_dofs,
                   "min_angle": mesh.min_angle()}
        logger.info(f"网格: {summary['vertices']} 个顶点，{summary['triangles']} 个三角形，最小角 {summary['min_angle']:.1f}°")
        return {"status": "success", "summary": summary}
