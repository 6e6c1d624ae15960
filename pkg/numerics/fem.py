#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
紧部分 M 上 Δ_g (+V) 的有限元离散。

二维中 Dirichlet 能量共形不变，因此刚度矩阵的主部就是欧氏刚度 ∫∇u·∇v，
度量只出现在质量矩阵的权 e^φ y^{-2} 中。
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger
from skfem import Basis, BilinearForm, ElementTriP1, ElementTriP2
from skfem.helpers import dot, grad

from config.settings import SETTINGS
from numerics.cuspnd import mode_ordering
from numerics.errors import GeometryError, NeumannPoleError, SingularSystemError
from numerics.geometry import SpectralPoint, SurfaceSpec
from numerics.linalg import factorize_sparse, generalized_eigs, solve_sparse_complex
from numerics.mesh import Mesh, is_reversed

POLE_DISTANCE = SETTINGS.scattering_config["pole_distance"]
ANCHOR_SHIFT = 0.1j
MAX_ANCHOR_SHIFTS = 10


@dataclass
class FemSystem:
    """约化后的刚度/质量矩阵及其与网格、边界的对应关系"""

    spec: SurfaceSpec
    mesh: Mesh
    order: int
    K: sp.csr_matrix
    M: sp.csr_matrix
    reduction: sp.csr_matrix
    reduced_index: np.ndarray
    facet_lookup: Dict[Tuple[int, int], int] = field(repr=False)
    nodal_dofs: np.ndarray = field(repr=False)
    facet_dofs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.K.shape[0]

    def _edge_dof(self, a: int, b: int) -> int:
        return int(self.facet_dofs[self.facet_lookup[(min(a, b), max(a, b))]])

    def cusp_boundary(self, k: int) -> List[Tuple[float, int, float]]:
        """尖点 k 截面上的积分节点 (x, 约化自由度, 权重)；P2 用 Simpson 规则"""
        cusp = self.spec.cusp(k)
        entries: List[Tuple[float, int, float]] = []
        for arc in self.spec.arcs:
            if arc.kind != "horocycle-segment" or arc.cusp != k or arc.condition != "cusp":
                continue
            nodes = self.mesh.arc_nodes[arc.tag]
            xs = self.mesh.arc_params[arc.tag]
            for i in range(len(nodes) - 1):
                length = xs[i + 1] - xs[i]
                left = self.reduced_index[self.nodal_dofs[nodes[i]]]
                right = self.reduced_index[self.nodal_dofs[nodes[i + 1]]]
                if self.order == 1:
                    entries.append((xs[i], left, 0.5 * length))
                    entries.append((xs[i + 1], right, 0.5 * length))
                else:
                    middle = self.reduced_index[self._edge_dof(nodes[i], nodes[i + 1])]
                    entries.append((xs[i], left, length / 6))
                    entries.append((0.5 * (xs[i] + xs[i + 1]), middle, 4 * length / 6))
                    entries.append((xs[i + 1], right, length / 6))
        if not entries:
            raise GeometryError(f"尖点 {k} 没有可用的截面节点")
        total = sum(weight for _, _, weight in entries)
        expected = cusp.width / 2 if cusp.fold else cusp.width
        if abs(total - expected) > 1e-9:
            raise GeometryError(f"尖点 {k} 截面的总长度 {total:.12g} 与宽度 {expected} 不符")
        return entries

    def boundary_functional(self, J: int) -> np.ndarray:
        """
        W[α, i]：约化自由度向量 u 在模式 α = (m, k) 上的 ∫ u e^{-2πimx/w} dx。

        折叠尖点使用偶延拓：√2 ∫₀^{w/2} u cos(2πmx/w) dx。
        """
        p = self.spec.p
        modes = mode_ordering(J, p)
        W = np.zeros((len(modes), self.dimension), dtype=complex)
        for row, (m, k) in enumerate(modes):
            cusp = self.spec.cusp(k)
            for x, dof, weight in self.cusp_boundary(k):
                if dof < 0:
                    continue
                if cusp.fold:
                    W[row, dof] += math.sqrt(2) * weight * math.cos(2 * math.pi * m * x / cusp.width)
                else:
                    W[row, dof] += weight * np.exp(-2j * math.pi * m * x / cusp.width)
        return W

    def boundary_mass_weights(self, k: int) -> np.ndarray:
        """截面上 ∫ u² dx 的对角权重（按约化自由度）"""
        weights = np.zeros(self.dimension)
        for _, dof, weight in self.cusp_boundary(k):
            if dof >= 0:
                weights[dof] += weight
        return weights

    def boundary_resolution(self, k: int) -> int:
        """尖点 k 整圈对应的边界段数"""
        cusp = self.spec.cusp(k)
        segments = sum(len(self.mesh.arc_nodes[arc.tag]) - 1 for arc in self.spec.arcs
                       if arc.kind == "horocycle-segment" and arc.cusp == k)
        return 2 * segments if cusp.fold else segments


def _forms(spec: SurfaceSpec):
    def weight(w):
        x, y = w.x[0], w.x[1]
        return spec.conformal_factor(x, y) / (y * y)

    @BilinearForm
    def stiffness(u, v, w):
        form = dot(grad(u), grad(v))
        if spec.potential is not None:
            form = form + spec.potential_value(w.x[0], w.x[1]) * weight(w) * u * v
        return form

    @BilinearForm
    def mass(u, v, w):
        return weight(w) * u * v

    return stiffness, mass


def _full_to_reduced(n_full: int, merges: Sequence[Tuple[int, int]], removed: np.ndarray) -> np.ndarray:
    parent = np.arange(n_full)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in merges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n_full)])
    # Dirichlet 节点所在的整个粘合类一起删除
    keep = ~np.isin(roots, roots[removed]) if len(removed) else np.ones(n_full, dtype=bool)
    index = -np.ones(n_full, dtype=int)
    kept_roots = np.unique(roots[keep])
    lookup = {int(r): i for i, r in enumerate(kept_roots)}
    for i in np.flatnonzero(keep):
        index[i] = lookup[int(roots[i])]
    return index


def assemble(mesh: Mesh, spec: SurfaceSpec, order: Optional[int] = None) -> FemSystem:
    """
    组装约化后的 K（Dirichlet 能量 + 势项）与 Mmat（权 e^φ y^{-2}）。

    粘合边界上的自由度合并，Dirichlet 边界上的自由度删除。
    """
    order = SETTINGS.fem_config["element_order"] if order is None else order
    if order not in (1, 2):
        raise ValueError(f"单元阶数只能是 1 或 2，当前为 {order}")

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    samples = np.vstack([mesh.vertices, centroids])
    if np.min(spec.conformal_factor(samples[:, 0], samples[:, 1])) <= 0:
        raise GeometryError("共形因子在网格上出现非正值")

    skmesh = mesh.to_skfem()
    element = ElementTriP1() if order == 1 else ElementTriP2()
    basis = Basis(skmesh, element, intorder=2 * order + 2)
    stiffness, mass = _forms(spec)
    K_full = stiffness.assemble(basis).tocsr()
    M_full = mass.assemble(basis).tocsr()

    nodal_dofs = np.asarray(basis.nodal_dofs[0])
    facet_dofs = np.asarray(basis.facet_dofs[0]) if order == 2 else None
    facets = np.asarray(skmesh.facets)
    facet_lookup = {(int(min(a, b)), int(max(a, b))): f for f, (a, b) in enumerate(facets.T)}

    merges: List[Tuple[int, int]] = [(int(nodal_dofs[i]), int(nodal_dofs[j])) for i, j in mesh.merged_pairs]
    if order == 2:
        for ident in spec.identifications:
            source = mesh.arc_nodes[ident.source]
            target = mesh.arc_nodes[ident.target]
            if is_reversed(spec, ident):
                target = target[::-1]
            for i in range(len(source) - 1):
                fs = facet_lookup[(int(min(source[i], source[i + 1])), int(max(source[i], source[i + 1])))]
                ft = facet_lookup[(int(min(target[i], target[i + 1])), int(max(target[i], target[i + 1])))]
                merges.append((int(facet_dofs[fs]), int(facet_dofs[ft])))

    removed: List[int] = []
    for arc in spec.arcs:
        if arc.condition != "dirichlet":
            continue
        nodes = mesh.arc_nodes[arc.tag]
        removed.extend(int(nodal_dofs[v]) for v in nodes)
        if order == 2:
            removed.extend(int(facet_dofs[facet_lookup[(int(min(a, b)), int(max(a, b)))]])
                           for a, b in zip(nodes[:-1], nodes[1:]))

    reduced_index = _full_to_reduced(K_full.shape[0], merges, np.array(removed, dtype=int))
    kept = np.flatnonzero(reduced_index >= 0)
    n_red = int(reduced_index.max()) + 1
    P = sp.csr_matrix((np.ones(len(kept)), (kept, reduced_index[kept])), shape=(K_full.shape[0], n_red))
    K = (P.T @ K_full @ P).tocsr()
    M = (P.T @ M_full @ P).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    logger.info(f"有限元组装完成: P{order}, 全自由度 {K_full.shape[0]}, 约化后 {n_red}")
    return FemSystem(spec=spec, mesh=mesh, order=order, K=K.tocsr(), M=M.tocsr(), reduction=P,
                     reduced_index=reduced_index, facet_lookup=facet_lookup, nodal_dofs=nodal_dofs,
                     facet_dofs=facet_dofs)


def solve_spectrum(system: FemSystem, n: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """前 n 个 Neumann（或混合边界）特征对"""
    n = SETTINGS.fem_config["n_eigenpairs"] if n is None else n
    n = min(n, system.dimension)
    values, vectors = generalized_eigs(system.K, system.M, n)
    logger.info(f"求得 {n} 个特征值，λ₁ = {values[0]:.6g}，λ_n = {values[-1]:.6g}")
    return values, vectors


def dirichlet_spectrum(system: FemSystem, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """奇子空间的纯离散谱：返回 (λ, t = √(λ - 1/4))"""
    values, _ = solve_spectrum(system, n)
    t = np.sqrt(np.maximum(values - 0.25, 0.0))
    return values, t


# ---------------------------------------------------------------------------
# 边界谱数据与锚点
# ---------------------------------------------------------------------------

@dataclass
class NeumannSpectralData:
    """特征值 λ_j 与边界 Fourier 系数 ⟨φ_j, e_α⟩（测度 dx/a_k）"""

    eigenvalues: np.ndarray
    boundary_coeffs: np.ndarray
    J: int
    heights: np.ndarray
    widths: np.ndarray
    folds: np.ndarray
    boundary_norms: np.ndarray
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def p(self) -> int:
        return len(self.heights)

    @property
    def mode_heights(self) -> np.ndarray:
        return np.repeat(self.heights, 2 * self.J + 1)

    def coefficient(self, j: int, m: int, k: int) -> complex:
        return complex(self.boundary_coeffs[j, (k - 1) * (2 * self.J + 1) + m + self.J])

    def truncate(self, n: int) -> "NeumannSpectralData":
        return NeumannSpectralData(
            eigenvalues=self.eigenvalues[:n], boundary_coeffs=self.boundary_coeffs[:n], J=self.J,
            heights=self.heights, widths=self.widths, folds=self.folds,
            boundary_norms=self.boundary_norms[:n], meta=dict(self.meta),
        )

    def parseval_defect(self) -> np.ndarray:
        """‖φ_j‖² - a Σ|c_α|²，应为非负（截断误差）"""
        captured = np.sum(self.mode_heights * np.abs(self.boundary_coeffs) ** 2, axis=1)
        return self.boundary_norms - captured

    def save(self, path) -> Path:
        path = Path(path)
        header = {"J": self.J, "meta": self.meta}
        np.savez_compressed(path, header=np.array(json.dumps(header, default=str)), eigenvalues=self.eigenvalues,
                            boundary_coeffs=self.boundary_coeffs, heights=self.heights, widths=self.widths,
                            folds=self.folds, boundary_norms=self.boundary_norms)
        return path

    @classmethod
    def load(cls, path) -> "NeumannSpectralData":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            return cls(eigenvalues=data["eigenvalues"], boundary_coeffs=data["boundary_coeffs"], J=header["J"],
                       heights=data["heights"], widths=data["widths"], folds=data["folds"],
                       boundary_norms=data["boundary_norms"], meta=header.get("meta", {}))


@dataclass
class AnchorSolve:
    """在锚点 s₀ 处直接求解得到的截断 ND 矩阵 N^M(s₀)"""

    s0: complex
    matrix: np.ndarray
    J: int

    @property
    def lam(self) -> complex:
        return SpectralPoint(self.s0).lam

    def save(self, path) -> Path:
        path = Path(path)
        header = {"s0": [self.s0.real, self.s0.imag], "J": self.J}
        np.savez_compressed(path, header=np.array(json.dumps(header)), matrix=self.matrix)
        return path

    @classmethod
    def load(cls, path) -> "AnchorSolve":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            return cls(s0=complex(*header["s0"]), matrix=data["matrix"], J=header["J"])


def _check_resolution(system: FemSystem, J: int) -> None:
    for cusp in system.spec.cusps:
        nodes = system.boundary_resolution(cusp.index)
        if nodes < 4 * J:
            raise ValueError(f"尖点 {cusp.index} 的边界只有 {nodes} 段，不足以解析 J = {J}（需要 ≥ {4 * J}）")


def extract_boundary_data(system: FemSystem, eigenvalues: np.ndarray, eigenvectors: np.ndarray,
                          J: Optional[int] = None) -> NeumannSpectralData:
    """用截面上的求积计算 ⟨φ_j, e_α⟩ = ∫ φ_j e^{-2πimx} dx / a_k"""
    J = SETTINGS.fem_config["truncation_j"] if J is None else J
    _check_resolution(system, J)
    spec = system.spec
    W = system.boundary_functional(J)
    heights = spec.cut_heights
    mode_heights = np.repeat(heights, 2 * J + 1)
    coeffs = (W @ eigenvectors).T / mode_heights[None, :]

    norms = np.zeros(len(eigenvalues))
    for cusp in spec.cusps:
        weights = system.boundary_mass_weights(cusp.index)
        norms += np.einsum("i,ij->j", weights, np.abs(eigenvectors) ** 2) / cusp.height

    data = NeumannSpectralData(
        eigenvalues=np.asarray(eigenvalues, dtype=float), boundary_coeffs=coeffs, J=J, heights=heights,
        widths=np.array([c.width for c in sorted(spec.cusps, key=lambda c: c.index)]),
        folds=np.array([c.fold for c in sorted(spec.cusps, key=lambda c: c.index)]),
        boundary_norms=norms,
        meta={"family": spec.family, "parameters": spec.parameters, "order": system.order,
              "h": system.mesh.h, "n_boundary": system.mesh.n_boundary},
    )
    worst = float(np.min(data.parseval_defect()))
    if worst < -1e-8:
        logger.warning(f"Parseval 检查失败，最小余量 {worst:.3g}")
    return data


def shift_anchor(s0: complex, eigenvalues: Optional[np.ndarray]) -> complex:
    """若 s₀(1-s₀) 离某个 λ_j 太近，则沿虚方向逐步移动 s₀"""
    if eigenvalues is None or len(eigenvalues) == 0:
        return complex(s0)
    s = complex(s0)
    for _ in range(MAX_ANCHOR_SHIFTS + 1):
        lam = SpectralPoint(s).lam
        distance = float(np.min(np.abs(np.asarray(eigenvalues) - lam)))
        if distance >= POLE_DISTANCE:
            if s != complex(s0):
                logger.warning(f"锚点 {complex(s0)} 过于接近 Neumann 特征值，已移到 {s}")
            return s
        s += ANCHOR_SHIFT
    raise NeumannPoleError(f"无法为锚点 {s0} 找到远离特征值的位置", eigenvalue=float("nan"), index=-1)


def direct_nd_at(system: FemSystem, s0: complex, J: Optional[int] = None,
                 eigenvalues: Optional[np.ndarray] = None) -> AnchorSolve:
    """
    以每个 e_α 为 Neumann 数据直接求解 (K - s₀(1-s₀)M)ψ = 边界载荷，
    返回 Dirichlet 迹的 Fourier 系数矩阵。
    """
    J = SETTINGS.fem_config["truncation_j"] if J is None else J
    _check_resolution(system, J)
    s0 = shift_anchor(s0, eigenvalues)
    lam = SpectralPoint(s0).lam
    W = system.boundary_functional(J)
    mode_heights = np.repeat(system.spec.cut_heights, 2 * J + 1)
    loads = W.conj().T / mode_heights[None, :]
    operator = (system.K - lam * system.M).astype(complex).tocsc()
    try:
        lu = factorize_sparse(operator)
    except SingularSystemError as exc:
        raise SingularSystemError(f"锚点 s₀ = {s0} 处系统奇异，请换一个锚点: {exc}") from exc
    psi = solve_sparse_complex(operator, loads, factorization=lu)
    matrix = W @ psi
    logger.info(f"锚点 s₀ = {s0} 的直接求解完成 ({matrix.shape[0]} 个模式)")
    return AnchorSolve(s0=s0, matrix=matrix, J=J)
