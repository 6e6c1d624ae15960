#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
紧部分 M 的三角剖分。

边界节点按双曲弧长等分；被粘合的目标弧上的节点取为源弧节点的像，
因此粘合后网格是协调的，顶点到自由度的映射由并查集合并得到。
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import meshpy.triangle as triangle
import numpy as np
from loguru import logger

from config.settings import SETTINGS
from numerics.errors import GeometryError, MeshError
from numerics.geometry import BoundaryArc, SurfaceSpec

MIN_ARC_SEGMENTS = 8
MIN_CUSP_NODES = 64
MATCH_TOL = 1e-10
CORNER_TOL = 1e-9


@dataclass
class Mesh:
    """三角网格及其边界标记与自由度粘合"""

    vertices: np.ndarray
    triangles: np.ndarray
    arc_nodes: Dict[str, np.ndarray]
    arc_params: Dict[str, np.ndarray]
    dof_map: np.ndarray
    h: float
    n_boundary: int
    merged_pairs: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_dofs(self) -> int:
        return int(self.dof_map.max()) + 1

    @property
    def boundary_edges(self) -> Dict[str, np.ndarray]:
        return {tag: np.column_stack([nodes[:-1], nodes[1:]]) for tag, nodes in self.arc_nodes.items()}

    def boundary_dofs(self, tags: List[str]) -> np.ndarray:
        nodes = np.concatenate([self.arc_nodes[tag] for tag in tags])
        return np.unique(self.dof_map[nodes])

    def min_angle(self) -> float:
        """最小欧氏内角（度）"""
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def save(self, path) -> Path:
        path = Path(path)
        header = {
            "h": self.h,
            "n_boundary": self.n_boundary,
            "tags": list(self.arc_nodes),
        }
        arrays = {f"nodes__{tag}": nodes for tag, nodes in self.arc_nodes.items()}
        arrays.update({f"params__{tag}": params for tag, params in self.arc_params.items()})
        np.savez_compressed(
            path, header=np.array(json.dumps(header)), vertices=self.vertices, triangles=self.triangles,
            dof_map=self.dof_map, merged_pairs=np.array(self.merged_pairs, dtype=int).reshape(-1, 2), **arrays,
        )
        return path

    @classmethod
    def load(cls, path) -> "Mesh":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            return cls(
                vertices=data["vertices"], triangles=data["triangles"],
                arc_nodes={tag: data[f"nodes__{tag}"] for tag in header["tags"]},
                arc_params={tag: data[f"params__{tag}"] for tag in header["tags"]},
                dof_map=data["dof_map"], h=header["h"], n_boundary=header["n_boundary"],
                merged_pairs=[tuple(pair) for pair in data["merged_pairs"].tolist()],
            )

    def to_skfem(self):
        from skfem import MeshTri

        return MeshTri(self.vertices.T.copy(), self.triangles.T.copy())


# ---------------------------------------------------------------------------
# 边界采样
# ---------------------------------------------------------------------------

def _segment_count(arc: BoundaryArc, spec: SurfaceSpec, h: float, n_boundary: int) -> int:
    if arc.kind == "horocycle-segment":
        width = spec.cusp(arc.cusp).width
        return max(MIN_ARC_SEGMENTS, int(round(n_boundary * (arc.hi - arc.lo) / width)))
    return max(MIN_ARC_SEGMENTS, int(math.ceil(arc.hyperbolic_length() / h)))


def is_reversed(spec: SurfaceSpec, ident) -> bool:
    """源弧参数递增时，其像在目标弧上是否参数递减"""
    source, target = spec.arc(ident.source), spec.arc(ident.target)
    image_lo = complex(ident.apply(source.point(source.lo)))
    return abs(image_lo - complex(target.point(target.lo))) > CORNER_TOL


def _boundary_parameters(spec: SurfaceSpec, h: float, n_boundary: int) -> Dict[str, np.ndarray]:
    """每条弧上的节点参数（升序，含端点）；粘合目标弧取源弧节点的像"""
    params: Dict[str, np.ndarray] = {}
    targets = {ident.target: ident for ident in spec.identifications}
    for arc in spec.arcs:
        if arc.tag in targets:
            continue
        params[arc.tag] = arc.sample(_segment_count(arc, spec, h, n_boundary))
    for tag, ident in targets.items():
        source, target = spec.arc(ident.source), spec.arc(tag)
        images = ident.apply(source.point(params[ident.source]))
        projected = np.sort(target.project(images))
        projected[0], projected[-1] = target.lo, target.hi
        params[tag] = projected
    return params


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _identify_dofs(spec: SurfaceSpec, vertices: np.ndarray, arc_nodes: Dict[str, np.ndarray]) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """按粘合映射合并源弧与目标弧上的节点，返回 (dof_map, 合并对)"""
    points = vertices[:, 0] + 1j * vertices[:, 1]
    uf = _UnionFind(len(vertices))
    pairs: List[Tuple[int, int]] = []
    for ident in spec.identifications:
        source_nodes = arc_nodes[ident.source]
        target_nodes = arc_nodes[ident.target]
        if len(source_nodes) != len(target_nodes):
            raise MeshError(f"粘合弧 {ident.source}→{ident.target} 节点数不一致 ({len(source_nodes)} vs {len(target_nodes)})")
        if is_reversed(spec, ident):
            target_nodes = target_nodes[::-1]
        images = ident.apply(points[source_nodes])
        mismatch = np.abs(images - points[target_nodes])
        if np.max(mismatch) > MATCH_TOL:
            raise MeshError(f"粘合弧 {ident.source}→{ident.target} 节点匹配失败，最大偏差 {np.max(mismatch):.3g}")
        for i, j in zip(source_nodes, target_nodes):
            uf.union(int(i), int(j))
            pairs.append((int(i), int(j)))
    roots = np.array([uf.find(i) for i in range(len(vertices))])
    _, dof_map = np.unique(roots, return_inverse=True)
    return dof_map, pairs


def triangulate(spec: SurfaceSpec, h: Optional[float] = None, n_boundary: Optional[int] = None,
                min_angle: Optional[float] = None) -> Mesh:
    """
    生成紧部分 M 的三角网格。

    三角形尺寸由双曲目标边长 h 控制：在高度 y 处欧氏边长约为 h·y。
    边界上不插入 Steiner 点，输入的边界节点保持在顶点列表的最前面。

    Raises:
        MeshError: 几何自交或粘合节点无法匹配。
    """
    h = SETTINGS.mesh_config["h"] if h is None else h
    n_boundary = SETTINGS.mesh_config["n_boundary"] if n_boundary is None else n_boundary
    min_angle = SETTINGS.mesh_config["min_angle"] if min_angle is None else min_angle
    if h <= 0:
        raise MeshError(f"目标边长 h = {h} 必须为正")
    if n_boundary < MIN_CUSP_NODES:
        logger.warning(f"n_boundary = {n_boundary} 少于 {MIN_CUSP_NODES}，尖点边界分辨率可能不足")

    params = _boundary_parameters(spec, h, n_boundary)

    # 角点：各弧端点按坐标聚类
    corners: List[complex] = []

    def corner_index(z: complex) -> int:
        for i, c in enumerate(corners):
            if abs(c - z) < CORNER_TOL:
                return i
        corners.append(z)
        return len(corners) - 1

    arc_corner = {}
    for arc in spec.arcs:
        a, b = arc.endpoints()
        arc_corner[arc.tag] = (corner_index(a), corner_index(b))

    points: List[complex] = list(corners)
    arc_nodes: Dict[str, np.ndarray] = {}
    for arc in spec.arcs:
        inner = arc.point(params[arc.tag][1:-1])
        start = len(points)
        points.extend(complex(z) for z in inner)
        lo, hi = arc_corner[arc.tag]
        arc_nodes[arc.tag] = np.array([lo, *range(start, start + len(inner)), hi], dtype=int)

    facets = []
    markers = []
    for marker, arc in enumerate(spec.arcs, start=1):
        nodes = arc_nodes[arc.tag]
        facets.extend(zip(nodes[:-1].tolist(), nodes[1:].tolist()))
        markers.extend([marker] * (len(nodes) - 1))

    mesh_info = triangle.MeshInfo()
    mesh_info.set_points([(z.real, z.imag) for z in points])
    mesh_info.set_facets(facets, markers)

    area_factor = math.sqrt(3) / 4 * h * h

    def needs_refinement(vertices, area):
        y = (vertices[0][1] + vertices[1][1] + vertices[2][1]) / 3.0
        return bool(area > area_factor * y * y)

    try:
        generated = triangle.build(
            mesh_info, refinement_func=needs_refinement, min_angle=min_angle,
            allow_boundary_steiner=False,
        )
    except Exception as exc:
        raise MeshError(f"Triangle 剖分失败: {exc}") from exc

    vertices = np.array(generated.points, dtype=float)
    triangles = np.array(generated.elements, dtype=int)
    if len(vertices) < len(points) or not np.allclose(vertices[:len(points), 0] + 1j * vertices[:len(points), 1], points, atol=1e-12):
        raise MeshError("剖分器改动了边界节点（几何可能自交）")
    if np.any(vertices[:, 1] <= 0):
        raise MeshError("网格顶点落到了实轴以下")

    mesh = Mesh(vertices=vertices, triangles=triangles, arc_nodes=arc_nodes,
                arc_params={tag: params[tag] for tag in arc_nodes}, dof_map=np.arange(len(vertices)),
                h=h, n_boundary=n_boundary)
    _orient(mesh)
    mesh.dof_map, mesh.merged_pairs = _identify_dofs(spec, mesh.vertices, mesh.arc_nodes)
    logger.info(f"网格生成: {mesh.n_vertices} 个顶点, {len(mesh.triangles)} 个三角形, "
                f"{mesh.n_dofs} 个自由度, 最小角 {mesh.min_angle():.1f}°")
    return mesh


def _orient(mesh: Mesh) -> None:
    areas = mesh.signed_areas()
    if np.any(np.abs(areas) == 0):
        raise MeshError("存在退化三角形")
    flip = areas < 0
    mesh.triangles[flip] = mesh.triangles[flip][:, [0, 2, 1]]


def refine(mesh: Mesh, spec: SurfaceSpec) -> Mesh:
    """
    一致中点加密：每个三角形分为四个。

    边界边的中点取在弧上的双曲弧长中点处，粘合关系在加密后重新建立。
    """
    edges = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]), axis=1)
    unique_edges, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n_old = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[unique_edges[:, 0]] + mesh.vertices[unique_edges[:, 1]])
    edge_lookup = {(int(a), int(b)): n_old + i for i, (a, b) in enumerate(unique_edges)}

    arc_nodes: Dict[str, np.ndarray] = {}
    arc_params: Dict[str, np.ndarray] = {}
    for tag, nodes in mesh.arc_nodes.items():
        arc = spec.arc(tag)
        params = mesh.arc_params[tag]
        coords = arc.coordinate(params)
        middle_params = arc.param_from_coordinate(0.5 * (coords[:-1] + coords[1:]))
        middle_points = arc.point(middle_params)
        new_nodes = np.empty(2 * len(nodes) - 1, dtype=int)
        new_params = np.empty(2 * len(nodes) - 1)
        new_nodes[0::2], new_params[0::2] = nodes, params
        for i, (a, b) in enumerate(zip(nodes[:-1], nodes[1:])):
            key = (int(min(a, b)), int(max(a, b)))
            if key not in edge_lookup:
                raise MeshError(f"边界边 {key} 不在三角形中")
            index = edge_lookup[key]
            midpoints[index - n_old] = (middle_points[i].real, middle_points[i].imag)
            new_nodes[2 * i + 1] = index
            new_params[2 * i + 1] = middle_params[i]
        arc_nodes[tag] = new_nodes
        arc_params[tag] = new_params

    vertices = np.vstack([mesh.vertices, midpoints])
    t = mesh.triangles
    n_tri = len(t)
    m01 = n_old + inverse[:n_tri]
    m12 = n_old + inverse[n_tri:2 * n_tri]
    m20 = n_old + inverse[2 * n_tri:]
    triangles = np.vstack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([t[:, 1], m12, m01]),
        np.column_stack([t[:, 2], m20, m12]),
        np.column_stack([m01, m12, m20]),
    ])
    refined = Mesh(vertices=vertices, triangles=triangles, arc_nodes=arc_nodes, arc_params=arc_params,
                   dof_map=np.arange(len(vertices)), h=mesh.h / 2, n_boundary=2 * mesh.n_boundary)
    _orient(refined)
    refined.dof_map, refined.merged_pairs = _identify_dofs(spec, refined.vertices, refined.arc_nodes)
    logger.info(f"网格加密: {refined.n_vertices} 个顶点, {len(refined.triangles)} 个三角形")
    return refined


def build_mesh(spec: SurfaceSpec, h: Optional[float] = None, n_boundary: Optional[int] = None,
               refinements: Optional[int] = None) -> Mesh:
    refinements = SETTINGS.mesh_config["refinements"] if refinements is None else refinements
    try:
        mesh = triangulate(spec, h, n_boundary)
    except GeometryError as exc:
        raise MeshError(f"几何描述无效: {exc}") from exc
    for _ in range(refinements):
        mesh = refine(mesh, spec)
    return mesh
