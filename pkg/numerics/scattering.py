#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
由边界谱数据构造散射矩阵 C(s)。

内部 ND 矩阵 Ñ^M(s) 用特征级数（可选锚点加速）表示，与尖点 ND 矩阵 Ñ^c(s)
组合成 T̃(s) = (1 - av)Ñ^M + Ñ^c；T̃ 的 p 维近似核给出 Q̃₁、Q̃₂，进而得到 C̃(s)。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from loguru import logger

from config.settings import SETTINGS
from numerics.cuspnd import CuspNDMatrix, averaging_matrix, constant_mode_indices, cusp_nd, mode_weights
from numerics.errors import KernelDimensionError, NeumannPoleError, SingularSystemError
from numerics.fem import AnchorSolve, NeumannSpectralData
from numerics.geometry import SpectralPoint
from numerics.linalg import condition_estimate, svd

SCATTERING_DEFAULTS = SETTINGS.scattering_config
DEGENERATE_TOL = 1e-10


@dataclass
class NDMatrix:
    """截断 Fourier 基下的内部 ND 矩阵，provenance 记录其来源"""

    s: complex
    entries: np.ndarray
    J: int
    p: int
    provenance: str = "series"

    def symmetry_defect(self, heights: Sequence[float]) -> float:
        """‖R Ñᵀ R - Ñ‖/‖Ñ‖（按行除以 a_k 后），R 为 m ↦ -m 的置换"""
        size = 2 * self.J + 1
        flip = np.concatenate([k * size + np.arange(size)[::-1] for k in range(self.p)])
        scaled = self.entries / np.repeat(np.asarray(heights, dtype=float), size)[:, None]
        mirrored = scaled.T[np.ix_(flip, flip)]
        return float(np.linalg.norm(mirrored - scaled) / max(np.linalg.norm(scaled), np.finfo(float).tiny))


def _check_poles(data: NeumannSpectralData, lam: complex, pole_distance: float) -> None:
    distances = np.abs(data.eigenvalues - lam)
    index = int(np.argmin(distances))
    if distances[index] < pole_distance:
        raise NeumannPoleError(
            f"λ = s(1-s) = {lam:.8g} 距 Neumann 特征值 λ_{index + 1} = {data.eigenvalues[index]:.8g} 仅 {distances[index]:.2e}",
            eigenvalue=float(data.eigenvalues[index]), index=index + 1,
        )


def _weighted_series(data: NeumannSpectralData, weights: np.ndarray) -> np.ndarray:
    """Mat[β, α] = a_β Σ_j c_{jβ} w_j conj(c_{jα})"""
    B = data.boundary_coeffs
    return data.mode_heights[:, None] * ((B.T * weights[None, :]) @ B.conj())


def _divided_differences(lams: Sequence[complex], matrices: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Newton 差商表的对角线 N[λ₀], N[λ₀,λ₁], ..."""
    table = [np.array(m, dtype=complex) for m in matrices]
    coefficients = [table[0]]
    for level in range(1, len(table)):
        table = [(table[i + 1] - table[i]) / (lams[i + level] - lams[i]) for i in range(len(table) - 1)]
        coefficients.append(table[0])
    return coefficients


def interior_nd(data: NeumannSpectralData, anchors: Sequence[AnchorSolve], s: complex,
                pole_distance: Optional[float] = None) -> NDMatrix:
    """
    Ñ^M(s)：无锚点时为截断特征级数；有 k 个锚点时用 Newton 插值加速，
    N(λ) = Σ_i N[λ₀..λ_i] Π_{l<i}(λ-λ_l) + Π_l(λ-λ_l) Σ_j P_j / ((λ_j-λ) Π_l(λ_j-λ_l))。

    Raises:
        NeumannPoleError: s(1-s) 距某个 λ_j 小于 pole_distance。
    """
    pole_distance = SCATTERING_DEFAULTS["pole_distance"] if pole_distance is None else pole_distance
    s = complex(s)
    lam = SpectralPoint(s).lam
    _check_poles(data, lam, pole_distance)
    eigenvalues = data.eigenvalues.astype(complex)

    if not anchors:
        entries = _weighted_series(data, 1.0 / (eigenvalues - lam))
        return NDMatrix(s=s, entries=entries, J=data.J, p=data.p, provenance="series")

    for anchor in anchors:
        if anchor.J != data.J:
            raise ValueError(f"锚点 J = {anchor.J} 与谱数据 J = {data.J} 不一致")
    lams = [anchor.lam for anchor in anchors]
    coefficients = _divided_differences(lams, [anchor.matrix for anchor in anchors])

    entries = np.zeros_like(coefficients[0])
    product = 1.0 + 0j
    for i, coefficient in enumerate(coefficients):
        entries = entries + coefficient * product
        product *= lam - lams[i]
    denominators = eigenvalues - lam
    for anchor_lam in lams:
        denominators = denominators * (eigenvalues - anchor_lam)
    entries = entries + product * _weighted_series(data, 1.0 / denominators)
    provenance = "anchored-series" if len(anchors) == 1 else "repeated-anchored-series"
    return NDMatrix(s=s, entries=entries, J=data.J, p=data.p, provenance=provenance)


def assemble_T(ndm: NDMatrix, ndc: CuspNDMatrix, av: np.ndarray) -> np.ndarray:
    """T̃(s) = (1 - av)Ñ^M(s) + Ñ^c(s)"""
    size = ndm.entries.shape[0]
    if ndc.diagonal.shape[0] != size or av.shape != (size, size):
        raise ValueError(f"维数不匹配: Ñ^M {ndm.entries.shape}, Ñ^c {ndc.diagonal.shape}, av {av.shape}")
    return (np.eye(size) - av) @ ndm.entries + np.diag(ndc.diagonal)


@dataclass
class KernelResult:
    vectors: np.ndarray
    sigma_p: float
    sigma_next: float
    singular_values: np.ndarray

    @property
    def gap(self) -> float:
        if self.sigma_p == 0:
            return float("inf")
        return self.sigma_next / self.sigma_p

    @property
    def gap_ok(self) -> bool:
        return self.gap >= SCATTERING_DEFAULTS["gap_ratio"]


def kernel_vectors(T: np.ndarray, p: int, q_weight: Optional[bool] = None, J: Optional[int] = None,
                   strict: bool = False, gap_ratio: Optional[float] = None) -> KernelResult:
    """
    T′ = qT 的 p 个最小奇异值对应的右奇异向量，q = |m| + 1。

    Raises:
        KernelDimensionError: strict 模式下 σ_{p+1}/σ_p 小于 gap_ratio。
    """
    q_weight = SCATTERING_DEFAULTS["q_weight"] if q_weight is None else q_weight
    gap_ratio = SCATTERING_DEFAULTS["gap_ratio"] if gap_ratio is None else gap_ratio
    T = np.asarray(T, dtype=complex)
    if T.shape[0] != T.shape[1]:
        raise ValueError(f"T 必须是方阵: {T.shape}")
    if q_weight:
        if J is None:
            J = (T.shape[0] // p - 1) // 2
        T = mode_weights(J, p)[:, None] * T
    _, sigma, V = svd(T)
    vectors = V[:, -p:]
    sigma_p = float(sigma[-p])
    sigma_next = float(sigma[-p - 1]) if len(sigma) > p else float("inf")
    result = KernelResult(vectors=vectors, sigma_p=sigma_p, sigma_next=sigma_next, singular_values=sigma)
    if sigma_next < gap_ratio * sigma_p:
        message = f"核维数可疑: σ_p = {sigma_p:.3e}, σ_(p+1) = {sigma_next:.3e}（可能有嵌入特征值或共振靠近）"
        if strict:
            raise KernelDimensionError(message, singular_values=sigma)
        logger.warning(message)
    return result


def _power_diag(heights: np.ndarray, exponent: complex) -> np.ndarray:
    return np.diag(np.exp(exponent * np.log(heights)))


def c_from_q(Q1: np.ndarray, Q2: np.ndarray, heights: np.ndarray, s: complex,
             condition_limit: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """C = A^{s-1}(sQ₂ - Q₁)((s-1)Q₂ + Q₁)^{-1}A^s，返回 (C, 条件数)"""
    condition_limit = SCATTERING_DEFAULTS["condition_limit"] if condition_limit is None else condition_limit
    denominator = (s - 1) * Q2 + Q1
    numerator = s * Q2 - Q1
    condition = condition_estimate(denominator)
    if not np.isfinite(condition) or condition > condition_limit:
        raise SingularSystemError(f"(s-1)Q₂ + Q₁ 在 s = {s} 处近奇异（条件数 {condition:.3g}）", condition=condition)
    middle = sla.solve(denominator.T, numerator.T).T
    C = _power_diag(heights, s - 1) @ middle @ _power_diag(heights, s)
    return C, condition


@dataclass
class ScatteringResult:
    s: complex
    C: np.ndarray
    sigma_p: float
    sigma_next: float
    gap_ok: bool
    condition: float
    provenance: str = "series"
    functional_defect: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        return {
            "s": [self.s.real, self.s.imag],
            "C": [[[z.real, z.imag] for z in row] for row in self.C],
            "sigma_p": self.sigma_p,
            "sigma_next": self.sigma_next,
            "gap_ok": self.gap_ok,
            "condition": self.condition,
            "provenance": self.provenance,
            "functional_defect": self.functional_defect,
            **self.extra,
        }


def q_matrices(ndm: NDMatrix, kernel: KernelResult) -> Tuple[np.ndarray, np.ndarray]:
    """Q̃₁、Q̃₂：核向量及 Ñ^M 作用后的常数模式分量"""
    rows = constant_mode_indices(ndm.J, ndm.p)
    Q1 = kernel.vectors[rows, :]
    Q2 = (ndm.entries @ kernel.vectors)[rows, :]
    return Q1, Q2


def scattering_matrix(data: NeumannSpectralData, anchors: Sequence[AnchorSolve], s: complex,
                      cusps: Optional[Sequence] = None, strict: bool = False) -> ScatteringResult:
    """计算 C̃(s)；cusps 缺省时使用谱数据中记录的切割高度与宽度"""
    s = complex(s)
    if abs(s - 0.5) < 1e-14:
        raise ValueError("s = 1/2 处 C(s) 由极限定义，请避开该点")
    if cusps is None:
        cusps = list(zip(data.heights.tolist(), data.widths.tolist()))
    ndm = interior_nd(data, anchors, s)
    ndc = cusp_nd(s, cusps, data.J)
    av = averaging_matrix(data.J, data.p)
    kernel = kernel_vectors(assemble_T(ndm, ndc, av), data.p, J=data.J, strict=strict)
    Q1, Q2 = q_matrices(ndm, kernel)
    C, condition = c_from_q(Q1, Q2, data.heights, s)
    return ScatteringResult(s=s, C=C, sigma_p=kernel.sigma_p, sigma_next=kernel.sigma_next,
                            gap_ok=kernel.gap_ok, condition=condition, provenance=ndm.provenance,
                            extra={"K2": float(np.linalg.norm(np.linalg.inv((s - 1) * Q2 + Q1), 2)),
                                   "K3": float(np.linalg.norm(s * Q2 - Q1, 2)),
                                   "norm_N": float(np.linalg.norm(ndm.entries, 2))})


def one_cusp_via_generalized_eig(ndm: NDMatrix, ndc: CuspNDMatrix, av: np.ndarray, s: complex,
                                 height: float) -> Tuple[complex, bool]:
    """
    单尖点情形：由矩阵束 (Ñ^M + Ñ^c, av) 唯一的有限广义特征值 G 得到
    C = (sG - 1)((s-1)G + 1)^{-1} a^{2s-1}。返回 (C, 是否走了例外分支)。
    """
    if ndm.p != 1:
        raise ValueError("广义特征值路径只适用于单尖点")
    s = complex(s)
    A = ndm.entries + np.diag(ndc.diagonal)
    B = np.asarray(av, dtype=complex)
    pairs = sla.eigvals(A, B, homogeneous_eigvals=True)
    alpha, beta = pairs[0], pairs[1]
    scale = np.linalg.norm(A, 2)
    degenerate = (np.abs(alpha) < DEGENERATE_TOL * max(scale, 1.0)) & (np.abs(beta) < DEGENERATE_TOL)
    power = complex(np.exp((2 * s - 1) * math.log(height)))
    if np.any(degenerate):
        logger.warning(f"矩阵束在 s = {s} 处退化，采用例外分支 C = s/(s-1)·a^(2s-1)")
        return s / (s - 1) * power, True
    ratio = np.abs(beta) / np.maximum(np.abs(alpha), np.finfo(float).tiny)
    index = int(np.argmax(ratio))
    G = alpha[index] / beta[index]
    return (s * G - 1) / ((s - 1) * G + 1) * power, False


def error_bound(delta1: float, delta2: float, K1: float, K2: float, K3: float, norm_N: float,
                norm_As: float, norm_As1: float, s: complex, p: int) -> Optional[float]:
    """
    ‖C̃ - C‖ ≤ ‖A^{s-1}‖‖A^s‖(ε₁K₂²(K₃+ε₂)/(1-ε₁K₂) + ε₂K₂)；ε₁K₂ ≥ 1 时不可用，返回 None。
    """
    root_p = math.sqrt(p)
    shared = root_p * delta1 / K1
    propagated = delta2 + norm_N * delta1 / K1
    eps1 = shared + abs(s - 1) * root_p * propagated
    eps2 = shared + abs(s) * root_p * propagated
    if eps1 * K2 >= 1:
        logger.warning(f"误差界不可用: ε₁K₂ = {eps1 * K2:.3g} ≥ 1")
        return None
    return norm_As1 * norm_As * (eps1 * K2 ** 2 * (K3 + eps2) / (1 - eps1 * K2) + eps2 * K2)


def estimate_truncation_delta(data: NeumannSpectralData, anchors: Sequence[AnchorSolve], s: complex,
                              fraction: float = 0.75) -> float:
    """用截断到 3/4 特征对的级数与完整级数之差估计 δ"""
    full = interior_nd(data, anchors, s).entries
    truncated = interior_nd(data.truncate(max(1, int(fraction * data.n))), anchors, s).entries
    return float(np.linalg.norm(full - truncated, 2))


class ScatteringEvaluator:
    """
    固定谱数据与锚点的 C̃(s) 求值器，可直接作为函数调用。
    """

    def __init__(self, data: NeumannSpectralData, anchors: Optional[Sequence[AnchorSolve]] = None,
                 cusps: Optional[Sequence] = None, strict: bool = False):
        self.data = data
        self.anchors = list(anchors or [])
        self.cusps = list(cusps) if cusps is not None else list(zip(data.heights.tolist(), data.widths.tolist()))
        self.strict = strict
        self.av = averaging_matrix(data.J, data.p)

    @property
    def p(self) -> int:
        return self.data.p

    def __call__(self, s: complex) -> ScatteringResult:
        return scattering_matrix(self.data, self.anchors, s, cusps=self.cusps, strict=self.strict)

    def matrix(self, s: complex) -> np.ndarray:
        return self(s).C

    def components(self, s: complex) -> Tuple[NDMatrix, CuspNDMatrix]:
        return interior_nd(self.data, self.anchors, s), cusp_nd(s, self.cusps, self.data.J)

    def via_generalized_eig(self, s: complex) -> complex:
        ndm, ndc = self.components(s)
        value, _ = one_cusp_via_generalized_eig(ndm, ndc, self.av, s, float(self.data.heights[0]))
        return value

    def functional_defect(self, s: complex) -> float:
        """‖C(s)C(1-s) - I‖"""
        product = self.matrix(s) @ self.matrix(1 - complex(s))
        return float(np.linalg.norm(product - np.eye(self.p), 2))

    def unitarity_defect(self, t: float) -> float:
        """|‖C(1/2+it)‖₂ - 1|"""
        return abs(float(np.linalg.norm(self.matrix(0.5 + 1j * t), 2)) - 1.0)

    def symmetry_defect(self, s: complex) -> float:
        """‖conj(C(s)) - C(conj s)‖"""
        s = complex(s)
        return float(np.linalg.norm(np.conj(self.matrix(s)) - self.matrix(s.conjugate()), 2))

    def error_estimate(self, s: complex) -> Optional[float]:
        """用截断差 δ 与当前的谱隙、条件量估计 ‖C̃(s) - C(s)‖"""
        s = complex(s)
        result = self(s)
        delta = estimate_truncation_delta(self.data, self.anchors, s)
        heights = self.data.heights
        norm_As = float(np.max(np.abs(np.exp(s * np.log(heights)))))
        norm_As1 = float(np.max(np.abs(np.exp((s - 1) * np.log(heights)))))
        return error_bound(delta, delta, result.sigma_next, result.extra["K2"], result.extra["K3"],
                           result.extra["norm_N"], norm_As, norm_As1, s, self.p)
