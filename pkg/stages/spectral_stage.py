#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
谱数据阶段：组装、求 Neumann 特征对、提取边界系数并在锚点处直接求解。
谱数据和每个锚点分别缓存；全部命中时不再组装有限元系统。
"""

from typing import Any, Dict, List, Optional

from loguru import logger

from config.job import complex_to_text
from numerics.fem import AnchorSolve, FemSystem, NeumannSpectralData, assemble, direct_nd_at, extract_boundary_data, solve_spectrum
from stages.base_stage import BaseStage, output_path
from stages.mesh_stage import mesh_description


def spectral_description(context: Dict[str, Any]) -> Dict[str, Any]:
    fem = context["job"].fem
    return {**mesh_description(context), "fem": {"order": fem.order, "n_eigenpairs": fem.n_eigenpairs, "J": fem.J}}


def system_for(context: Dict[str, Any]) -> FemSystem:
    """按需组装并缓存在 context 中"""
    if context.get("system") is None:
        context["system"] = assemble(context["mesh"], context["spec"], context["job"].fem.order)
    return context["system"]


class SpectralStage(BaseStage):
    def __init__(self, cache=None):
        super().__init__(name="边界谱数据", role="spectral", cache=cache)

    def _cached(self, kind: str, description: Dict[str, Any], loader):
        if self.cache is None:
            return None
        return self.cache.fetch(kind, description, loader)

    def _store(self, kind: str, description: Dict[str, Any], value) -> None:
        if self.cache is not None:
            self.cache.store(kind, description, lambda path: value.save(path))

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        self._require(context, "job", "spec", "mesh")
        fem = context["job"].fem
        description = spectral_description(context)

        data: Optional[NeumannSpectralData] = self._cached("spectral", description, NeumannSpectralData.load)
        if data is None:
            system = system_for(context)
            values, vectors = solve_spectrum(system, fem.n_eigenpairs)
            data = extract_boundary_data(system, values, vectors, fem.J)
            self._store("spectral", description, data)

        anchors: List[AnchorSolve] = []
        for s0 in fem.anchors:
            anchor_description = {**description, "anchor": complex_to_text(s0)}
            anchor = self._cached("anchor", anchor_description, AnchorSolve.load)
            if anchor is None:
                anchor = direct_nd_at(system_for(context), s0, fem.J, data.eigenvalues)
                self._store("anchor", anchor_description, anchor)
            anchors.append(anchor)

        context["data"] = data
        context["anchors"] = anchors
        outputs = []
        if context["job"].task == "spectral-data":
            outputs.append(data.save(output_path(context, "spectral.npz")))
            for i, anchor in enumerate(anchors):
                outputs.append(anchor.save(output_path(context, f"anchor_{i}.npz")))
        defect = data.parseval_defect()
        summary = {
            "n": data.n,
            "p": data.p,
            "J": data.J,
            "lambda_min": float(data.eigenvalues[0]),
            "lambda_max": float(data.eigenvalues[-1]),
            "anchors": [complex_to_text(a.s0) for a in anchors],
            "parseval_min": float(defect.min()),
        }
        logger.info(f"谱数据: {data.n} 个特征对，λ ∈ [{summary['lambda_min']:.4g}, {summary['lambda_max']:.4g}]，"
                    f"{len(anchors)} 个锚点")
        return {"status": "success", "summary": summary, "outputs": [str(p) for p in outputs]}
