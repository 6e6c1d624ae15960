#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
双曲曲面基本域的描述：边界弧、粘合等距、尖点分解以及四个曲面族的构造函数。
"""

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import sympy
from loguru import logger
from matplotlib.path import Path as PolygonPath
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import optimize

from numerics.errors import GeometryError

IDENTITY = [[1.0, 0.0], [0.0, 1.0]]
MATCH_TOL = 1e-12
LENGTH_TOL = 1e-10
ENDPOINT_TOL = 1e-9

ArcKind = Literal["circular-arc", "vertical-ray", "horocycle-segment"]
BoundaryCondition = Literal["identified", "neumann", "dirichlet", "cusp"]


# ---------------------------------------------------------------------------
# 谱参数
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    """谱参数 s，派生 λ = s(1-s) 与 t = -i(s - 1/2)"""

    s: complex

    @property
    def lam(self) -> complex:
        return self.s * (1 - self.s)

    @property
    def t(self) -> complex:
        return -1j * (self.s - 0.5)

    @classmethod
    def from_t(cls, t: complex) -> "SpectralPoint":
        return cls(0.5 + 1j * complex(t))

    @classmethod
    def from_lambda(cls, lam: complex, half_plane: Literal["right", "left"] = "right") -> "SpectralPoint":
        """由 λ 还原 s；right 取 Re s ≥ 1/2，left 取 Re s ≤ 1/2"""
        root = cmath.sqrt(0.25 - complex(lam))
        if root.real < 0 or (root.real == 0 and root.imag < 0):
            root = -root
        s = 0.5 + root if half_plane == "right" else 0.5 - root
        return cls(s)


# ---------------------------------------------------------------------------
# Möbius 变换与双曲几何工具
# ---------------------------------------------------------------------------

def mobius_apply(matrix, z):
    """对复数（或数组）作用 2×2 实矩阵对应的分式线性变换"""
    (a, b), (c, d) = np.asarray(matrix, dtype=float)
    z = np.asarray(z, dtype=complex)
    return (a * z + b) / (c * z + d)


def normalize_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    det = np.linalg.det(m)
    if det <= 0:
        raise GeometryError(f"Möbius 矩阵行列式 {det:g} 非正，不是 ℍ 的保向等距")
    return m / math.sqrt(det)


def hyperbolic_distance(z, w):
    """ℍ 中的双曲距离，用 asinh 形式保证小距离的精度"""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def geodesic_translation(e1: float, e2: float, distance: float) -> np.ndarray:
    """沿端点为 e1→e2 的测地线平移 distance（正值朝 e2 方向）"""
    if e1 < e2:
        to_axis = np.array([[-1.0, e1], [1.0, -e2]])
    else:
        to_axis = np.array([[1.0, -e1], [1.0, -e2]])
    to_axis = normalize_matrix(to_axis)
    dilation = np.diag([math.exp(distance / 2), math.exp(-distance / 2)])
    return normalize_matrix(np.linalg.inv(to_axis) @ dilation @ to_axis)


def alpha_of_length(length: float) -> float:
    """亏格一曲面族的角参数 α = 2 arctan(tanh(ℓ/4))"""
    return 2.0 * math.atan(math.tanh(length / 4.0))


# ---------------------------------------------------------------------------
# 标量场（共形因子与势函数）
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _compile_expression(expression: str, parameter_names: Tuple[str, ...]) -> Callable:
    x, y = sympy.symbols("x y", real=True)
    params = sympy.symbols(parameter_names, real=True) if parameter_names else ()
    namespace = {"x": x, "y": y, **{str(p): p for p in params}}
    expr = sympy.sympify(expression, locals=namespace)
    unknown = expr.free_symbols - {x, y, *params}
    if unknown:
        raise GeometryError(f"场表达式 '{expression}' 含有未定义符号 {sorted(map(str, unknown))}")
    return sympy.lambdify((x, y, *params), expr, modules="numpy")


class FieldSpec(BaseModel):
    """以表达式字符串保存的标量场 f(x, y)"""

    expression: str
    parameters: Dict[str, float] = Field(default_factory=dict)
    compact_support: bool = True

    def evaluate(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        names = tuple(sorted(self.parameters))
        func = _compile_expression(self.expression, names)
        values = func(x, y, *(self.parameters[name] for name in names))
        return np.broadcast_to(np.asarray(values, dtype=float), np.broadcast(x, y).shape).copy()


MODULAR_CONFORMAL = {
    "horizontal": "1 + q*sin(5*x - 0.5)*exp(-40*((x - 0.1)**2 + (y - 1.5)**2))",
    "vertical": "1 + q*sin(5*(y - 1.5))*exp(-40*((x - 0.1)**2 + (y - 1.5)**2))",
}


# ---------------------------------------------------------------------------
# 边界弧、粘合与尖点
# ---------------------------------------------------------------------------

class BoundaryArc(BaseModel):
    """
    紧部分 M 的一段边界。

    circular-arc: 圆心 center（实轴上）、半径 radius，参数为极角 θ；
    vertical-ray: 直线 x = center，参数为 y；
    horocycle-segment: 尖点坐标 w = x + i·height 经 chart 映到 ℍ，参数为 x。
    """

    tag: str
    kind: ArcKind
    center: float = 0.0
    radius: float = 0.0
    height: float = 0.0
    lo: float
    hi: float
    condition: BoundaryCondition = "neumann"
    cusp: Optional[int] = None
    chart: List[List[float]] = Field(default_factory=lambda: [row[:] for row in IDENTITY])

    @model_validator(mode="after")
    def _check_shape(self) -> "BoundaryArc":
        if self.hi <= self.lo:
            raise GeometryError(f"弧 {self.tag} 的参数区间 [{self.lo}, {self.hi}] 为空")
        if self.kind == "circular-arc":
            if self.radius <= 0 or self.lo <= 0 or self.hi >= math.pi:
                raise GeometryError(f"圆弧 {self.tag} 必须位于上半平面")
        elif self.kind == "vertical-ray":
            if self.lo <= 0:
                raise GeometryError(f"竖直射线 {self.tag} 必须满足 y > 0")
        else:
            if self.height <= 0 or self.cusp is None:
                raise GeometryError(f"极限环段 {self.tag} 需要正高度和尖点编号")
        return self

    # --- 参数化 ---
    def point(self, param) -> np.ndarray:
        param = np.asarray(param, dtype=float)
        if self.kind == "circular-arc":
            return self.center + self.radius * np.exp(1j * param)
        if self.kind == "vertical-ray":
            return self.center + 1j * param
        return mobius_apply(self.chart, param + 1j * self.height)

    def coordinate(self, param) -> np.ndarray:
        """沿弧的双曲弧长坐标（单调）"""
        param = np.asarray(param, dtype=float)
        if self.kind == "circular-arc":
            return np.log(np.tan(param / 2))
        if self.kind == "vertical-ray":
            return np.log(param)
        return param / self.height

    def param_from_coordinate(self, coord) -> np.ndarray:
        coord = np.asarray(coord, dtype=float)
        if self.kind == "circular-arc":
            return 2.0 * np.arctan(np.exp(coord))
        if self.kind == "vertical-ray":
            return np.exp(coord)
        return coord * self.height

    def project(self, z) -> np.ndarray:
        """返回与 z 最近的弧上点的参数（z 应已在弧附近）"""
        z = np.asarray(z, dtype=complex)
        if self.kind == "circular-arc":
            return np.angle(z - self.center)
        if self.kind == "vertical-ray":
            return z.imag
        inverse = np.linalg.inv(np.asarray(self.chart, dtype=float))
        return mobius_apply(inverse, z).real

    def hyperbolic_length(self, lo: Optional[float] = None, hi: Optional[float] = None) -> float:
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return float(abs(self.coordinate(hi) - self.coordinate(lo)))

    def sample(self, n_segments: int) -> np.ndarray:
        """按双曲弧长等分，返回 n_segments + 1 个参数值（从 lo 到 hi）"""
        coords = np.linspace(self.coordinate(self.lo), self.coordinate(self.hi), n_segments + 1)
        params = self.param_from_coordinate(coords)
        params[0], params[-1] = self.lo, self.hi
        return params

    def endpoints(self) -> Tuple[complex, complex]:
        a, b = self.point([self.lo, self.hi])
        return complex(a), complex(b)

    def max_height(self) -> float:
        if self.kind == "circular-arc":
            if self.lo <= math.pi / 2 <= self.hi:
                return self.radius
            return float(self.radius * max(math.sin(self.lo), math.sin(self.hi)))
        if self.kind == "vertical-ray":
            return self.hi
        return float(np.max(self.point(np.linspace(self.lo, self.hi, 33)).imag))


class Identification(BaseModel):
    """源弧到目标弧的等距：先（可选）反射 x ↦ -x，再作用 Möbius 矩阵"""

    source: str
    target: str
    matrix: List[List[float]] = Field(default_factory=lambda: [row[:] for row in IDENTITY])
    reflect: bool = False

    @field_validator("matrix")
    @classmethod
    def _unit_determinant(cls, value: List[List[float]]) -> List[List[float]]:
        det = float(np.linalg.det(np.asarray(value, dtype=float)))
        if abs(det - 1.0) > 1e-10:
            raise GeometryError(f"粘合矩阵行列式为 {det:.12g}，需要归一化为 1")
        return value

    def apply(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.reflect:
            z = -np.conj(z)
        return mobius_apply(self.matrix, z)


class CuspSpec(BaseModel):
    """尖点 k 的切割高度、宽度与坐标图"""

    index: int = Field(ge=1)
    height: float = Field(gt=0)
    width: float = Field(default=1.0, gt=0)
    chart: List[List[float]] = Field(default_factory=lambda: [row[:] for row in IDENTITY])
    fold: bool = False

    @property
    def boundary_mass(self) -> float:
        """∂M_k 在测度 dx/a_k 下的总质量"""
        return self.width / self.height


class SurfaceSpec(BaseModel):
    """粘合的双曲基本域（紧部分 M 的边界 + 尖点数据）"""

    family: Literal["A", "B", "C", "D"]
    parameters: Dict[str, float] = Field(default_factory=dict)
    arcs: List[BoundaryArc]
    identifications: List[Identification] = Field(default_factory=list)
    cusps: List[CuspSpec]
    conformal: Optional[FieldSpec] = None
    potential: Optional[FieldSpec] = None
    symmetry_reduction: Literal["none", "even", "odd"] = "none"

    @model_validator(mode="after")
    def _check_topology(self) -> "SurfaceSpec":
        if not self.cusps:
            raise GeometryError("曲面至少需要一个尖点")
        indices = sorted(c.index for c in self.cusps)
        if indices != list(range(1, len(self.cusps) + 1)):
            raise GeometryError(f"尖点编号必须为 1..p，当前为 {indices}")
        tags = [arc.tag for arc in self.arcs]
        if len(set(tags)) != len(tags):
            raise GeometryError("边界弧标签重复")
        usage: Dict[str, int] = {tag: 0 for tag in tags}
        for ident in self.identifications:
            for tag in (ident.source, ident.target):
                if tag not in usage:
                    raise GeometryError(f"粘合引用了不存在的弧 {tag}")
                usage[tag] += 1
        for arc in self.arcs:
            if arc.condition == "identified" and usage[arc.tag] != 1:
                raise GeometryError(f"粘合弧 {arc.tag} 出现在 {usage[arc.tag]} 个粘合中（应为 1）")
            if arc.condition != "identified" and usage[arc.tag]:
                raise GeometryError(f"非粘合弧 {arc.tag} 不应出现在粘合中")
            if arc.kind == "horocycle-segment" and arc.cusp not in indices:
                raise GeometryError(f"极限环段 {arc.tag} 引用了不存在的尖点 {arc.cusp}")
        return self

    # --- 访问器 ---
    @property
    def p(self) -> int:
        return len(self.cusps)

    @property
    def cut_heights(self) -> np.ndarray:
        return np.array([c.height for c in sorted(self.cusps, key=lambda c: c.index)])

    def arc(self, tag: str) -> BoundaryArc:
        for arc in self.arcs:
            if arc.tag == tag:
                return arc
        raise KeyError(tag)

    def cusp(self, index: int) -> CuspSpec:
        for cusp in self.cusps:
            if cusp.index == index:
                return cusp
        raise KeyError(index)

    def conformal_factor(self, x, y) -> np.ndarray:
        if self.conformal is None:
            return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return self.conformal.evaluate(x, y)

    def potential_value(self, x, y) -> np.ndarray:
        if self.potential is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return self.potential.evaluate(x, y)

    # --- 边界回路 ---
    def boundary_loop(self) -> List[Tuple[BoundaryArc, bool]]:
        """把所有弧首尾相接成闭合回路，返回 (弧, 是否反向)"""
        remaining = list(self.arcs)
        first = remaining.pop(0)
        loop = [(first, False)]
        start, current = first.endpoints()
        while remaining:
            for i, arc in enumerate(remaining):
                a, b = arc.endpoints()
                if abs(a - current) < ENDPOINT_TOL:
                    loop.append((arc, False))
                    current = b
                    break
                if abs(b - current) < ENDPOINT_TOL:
                    loop.append((arc, True))
                    current = a
                    break
            else:
                raise GeometryError(f"边界弧无法首尾相接，断点位于 {current:.6g}")
            remaining.pop(i)
        if abs(current - start) > ENDPOINT_TOL:
            raise GeometryError("边界回路未闭合")
        return loop

    def boundary_polygon(self, n_per_arc: int = 32) -> np.ndarray:
        points = []
        for arc, reverse in self.boundary_loop():
            params = arc.sample(n_per_arc)
            if reverse:
                params = params[::-1]
            points.append(arc.point(params[:-1]))
        return np.concatenate(points)

    def sample_interior(self, n: int = 60) -> np.ndarray:
        """在基本域内取规则网格点，用于正性等采样检查"""
        polygon = self.boundary_polygon()
        path = PolygonPath(np.column_stack([polygon.real, polygon.imag]))
        xs = np.linspace(polygon.real.min(), polygon.real.max(), n)
        ys = np.linspace(polygon.imag.min(), polygon.imag.max(), n)
        grid = np.array([(x, y) for x in xs for y in ys])
        inside = grid[path.contains_points(grid)]
        return inside[:, 0] + 1j * inside[:, 1]

    # --- 校验 ---
    def verify_identifications(self, n_samples: int = 17) -> None:
        for ident in self.identifications:
            source, target = self.arc(ident.source), self.arc(ident.target)
            params = source.sample(n_samples - 1)
            images = ident.apply(source.point(params))
            if np.any(images.imag <= 0):
                raise GeometryError(f"粘合 {ident.source}→{ident.target} 把点映出上半平面")
            on_target = target.point(np.clip(target.project(images), target.lo, target.hi))
            err = float(np.max(hyperbolic_distance(images, on_target)))
            if err > MATCH_TOL * max(1.0, source.hyperbolic_length()):
                raise GeometryError(f"粘合 {ident.source}→{ident.target} 偏离目标弧 {err:.3g}")
            ends = {complex(z) for z in target.endpoints()}
            for z in (images[0], images[-1]):
                if min(abs(z - e) for e in ends) > ENDPOINT_TOL:
                    raise GeometryError(f"粘合 {ident.source}→{ident.target} 的端点不对应")
            if abs(source.hyperbolic_length() - target.hyperbolic_length()) > LENGTH_TOL:
                raise GeometryError(f"粘合 {ident.source}→{ident.target} 不保持弧长")

    def verify_positive_conformal(self) -> None:
        if self.conformal is None:
            return
        samples = np.concatenate([self.sample_interior(), self.boundary_polygon()])
        values = self.conformal_factor(samples.real, samples.imag)
        if np.min(values) <= 0:
            raise GeometryError(f"共形因子在基本域内非正（最小值 {np.min(values):.4g}）")

    def validate_geometry(self) -> "SurfaceSpec":
        for cusp in self.cusps:
            if cusp.chart == IDENTITY or np.allclose(cusp.chart, IDENTITY):
                ceiling = max((arc.max_height() for arc in self.arcs if arc.kind == "circular-arc"), default=0.0)
                if cusp.height <= ceiling:
                    raise GeometryError(f"尖点 {cusp.index} 的切割高度 {cusp.height} 不高于边界圆弧 ({ceiling:.6g})")
        self.boundary_loop()
        self.verify_identifications()
        self.verify_positive_conformal()
        return self

    def describe(self) -> Dict[str, object]:
        return {
            "family": self.family,
            "parameters": dict(self.parameters),
            "cusps": [{"index": c.index, "height": c.height, "width": c.width, "fold": c.fold} for c in self.cusps],
            "arcs": [arc.tag for arc in self.arcs],
            "identifications": [f"{i.source}->{i.target}" for i in self.identifications],
            "reduction": self.symmetry_reduction,
        }


# ---------------------------------------------------------------------------
# 曲面族构造
# ---------------------------------------------------------------------------

def _field(expression: Optional[str], parameters: Optional[Dict[str, float]] = None) -> Optional[FieldSpec]:
    if expression is None:
        return None
    return FieldSpec(expression=expression, parameters=parameters or {})


def build_modular(a: float = 2.0, q: float = 0.0, reduction: str = "none",
                  conformal_family: str = "horizontal", potential: Optional[str] = None) -> SurfaceSpec:
    """模曲面 A_{φ_q}；q = 0 时可选偶/奇对称约化"""
    if a <= 1.0:
        raise GeometryError(f"切割高度 a = {a} 必须大于 1，否则与单位圆弧相交")
    if reduction not in ("none", "even", "odd"):
        raise GeometryError(f"未知的对称约化 {reduction}")
    if reduction != "none" and q != 0.0:
        raise GeometryError("只有 q = 0 时才能进行对称约化")
    if conformal_family not in MODULAR_CONFORMAL:
        raise GeometryError(f"未知的共形因子族 {conformal_family}")
    floor = math.sqrt(3) / 2
    conformal = _field(MODULAR_CONFORMAL[conformal_family], {"q": q}) if q != 0.0 else None

    if reduction == "none":
        arcs = [
            BoundaryArc(tag="horocycle", kind="horocycle-segment", height=a, lo=-0.5, hi=0.5, condition="cusp", cusp=1),
            BoundaryArc(tag="side_left", kind="vertical-ray", center=-0.5, lo=floor, hi=a, condition="identified"),
            BoundaryArc(tag="side_right", kind="vertical-ray", center=0.5, lo=floor, hi=a, condition="identified"),
            BoundaryArc(tag="arc_left", kind="circular-arc", center=0.0, radius=1.0, lo=math.pi / 2, hi=2 * math.pi / 3, condition="identified"),
            BoundaryArc(tag="arc_right", kind="circular-arc", center=0.0, radius=1.0, lo=math.pi / 3, hi=math.pi / 2, condition="identified"),
        ]
        identifications = [
            Identification(source="side_left", target="side_right", matrix=[[1.0, 1.0], [0.0, 1.0]]),
            Identification(source="arc_left", target="arc_right", reflect=True),
        ]
        cusps = [CuspSpec(index=1, height=a)]
    else:
        wall = "neumann" if reduction == "even" else "dirichlet"
        arcs = [
            BoundaryArc(tag="horocycle", kind="horocycle-segment", height=a, lo=0.0, hi=0.5,
                        condition="cusp" if reduction == "even" else "dirichlet", cusp=1),
            BoundaryArc(tag="symmetry_axis", kind="vertical-ray", center=0.0, lo=1.0, hi=a, condition=wall),
            BoundaryArc(tag="side_right", kind="vertical-ray", center=0.5, lo=floor, hi=a, condition=wall),
            BoundaryArc(tag="arc_right", kind="circular-arc", center=0.0, radius=1.0, lo=math.pi / 3, hi=math.pi / 2, condition=wall),
        ]
        identifications = []
        cusps = [CuspSpec(index=1, height=a, fold=True)]

    spec = SurfaceSpec(
        family="A", parameters={"a": a, "q": q}, arcs=arcs, identifications=identifications, cusps=cusps,
        conformal=conformal, potential=_field(potential), symmetry_reduction=reduction,
    )
    logger.debug(f"构造模曲面 A: a={a}, q={q}, reduction={reduction}")
    return spec.validate_geometry()


def build_artin(r: float, a: float = 1.5, potential: Optional[str] = None) -> SurfaceSpec:
    """Artin 台球 B_r 的偶约化域 {x²+y² ≥ r², 0 ≤ x ≤ 1/2}"""
    if r <= 0.5:
        raise GeometryError(f"r = {r} 必须大于 1/2")
    if a <= r:
        raise GeometryError(f"切割高度 a = {a} 必须大于 r = {r}")
    corner = math.sqrt(r * r - 0.25)
    arcs = [
        BoundaryArc(tag="horocycle", kind="horocycle-segment", height=a, lo=0.0, hi=0.5, condition="cusp", cusp=1),
        BoundaryArc(tag="symmetry_axis", kind="vertical-ray", center=0.0, lo=r, hi=a, condition="neumann"),
        BoundaryArc(tag="side_right", kind="vertical-ray", center=0.5, lo=corner, hi=a, condition="neumann"),
        BoundaryArc(tag="arc", kind="circular-arc", center=0.0, radius=r, lo=math.acos(0.5 / r), hi=math.pi / 2, condition="neumann"),
    ]
    spec = SurfaceSpec(
        family="B", parameters={"r": r, "a": a}, arcs=arcs, cusps=[CuspSpec(index=1, height=a, fold=True)],
        potential=_field(potential), symmetry_reduction="even",
    )
    logger.debug(f"构造 Artin 台球 B_r: r={r}, a={a}")
    return spec.validate_geometry()


def _glue_twisted_boundary(length: float, twist: float, rho: float, small: float) -> Tuple[List[BoundaryArc], List[Identification]]:
    """
    把闭测地线 γ₁ 按扭转 τℓ 粘到 γ₄ ∪ γ₅ 上。

    γ₁ 上以顶点为原点、向右为正的弧长坐标 u ∈ [-ℓ/2, ℓ/2]；
    点 γ₁(u) 粘到 γ₄ ∪ γ₅ 上坐标为 u + τℓ (mod ℓ) 的点。
    每个不跨越分支的子段对应一个 Möbius 变换。
    """
    half = length / 2
    along_gamma1 = (-rho, rho)
    # γ₂ 的端点极角为 α 与 π - α，其中 tan α = ρ/small
    side_length = 2 * abs(math.log(math.tan(math.atan2(rho, small) / 2)))
    right_motion = geodesic_translation(0.25 - small, 0.25 + small, side_length)
    left_motion = geodesic_translation(-0.25 - small, -0.25 + small, -side_length)

    def gamma1(u):
        return rho * np.exp(1j * 2.0 * np.arctan(np.exp(-np.asarray(u, dtype=float))))

    shift = twist * length
    cuts = sorted({-half, half, *(c for c in (-shift, half - shift, length - shift) if -half + 1e-12 < c < half - 1e-12)})
    arcs: List[BoundaryArc] = []
    identifications: List[Identification] = []
    counters = {"gamma4": 0, "gamma5": 0}
    for piece, (u_a, u_b) in enumerate(zip(cuts[:-1], cuts[1:]), start=1):
        middle = 0.5 * (u_a + u_b)
        offset = shift if middle + shift <= half else shift - length
        slide = geodesic_translation(along_gamma1[0], along_gamma1[1], offset)
        if middle + offset >= 0:
            motion, target_name, center = right_motion, "gamma4", 0.5
        else:
            motion, target_name, center = left_motion, "gamma5", -0.5
        matrix = normalize_matrix(motion @ slide)
        theta_a = 2.0 * math.atan(math.exp(-u_a))
        theta_b = 2.0 * math.atan(math.exp(-u_b))
        source_tag = f"gamma1.{piece}"
        arcs.append(BoundaryArc(tag=source_tag, kind="circular-arc", center=0.0, radius=rho,
                                lo=min(theta_a, theta_b), hi=max(theta_a, theta_b), condition="identified"))
        images = mobius_apply(matrix, gamma1([u_a, u_b]))
        angles = np.angle(images - center)
        counters[target_name] += 1
        target_tag = f"{target_name}.{counters[target_name]}"
        arcs.append(BoundaryArc(tag=target_tag, kind="circular-arc", center=center, radius=rho,
                                lo=float(angles.min()), hi=float(angles.max()), condition="identified"))
        identifications.append(Identification(source=source_tag, target=target_tag, matrix=matrix.tolist()))
    return arcs, identifications


def build_genus_one(length: float, twist: float = 0.0, a: Optional[float] = None,
                    potential: Optional[str] = None) -> SurfaceSpec:
    """Fenchel–Nielsen 坐标 (ℓ, τ) 的一尖点亏格一曲面 C_{ℓ,τ}"""
    if length <= 0:
        raise GeometryError(f"ℓ = {length} 必须为正")
    if not 0.0 <= twist < 1.0:
        raise GeometryError(f"τ = {twist} 必须位于 [0, 1)")
    alpha = alpha_of_length(length)
    rho = math.sin(alpha) / 4
    small = math.cos(alpha) / 4
    if a is None:
        a = max(2 * rho, 0.5)
    ceiling = max(small, rho)
    if a <= ceiling + 1e-9:
        raise GeometryError(f"极限环 y = {a} 与边界弧相交（弧最高点 {ceiling:.6g}）")

    arcs = [
        BoundaryArc(tag="horocycle", kind="horocycle-segment", height=a, lo=-0.5, hi=0.5, condition="cusp", cusp=1),
        BoundaryArc(tag="gamma2", kind="circular-arc", center=0.25, radius=small, lo=alpha, hi=math.pi - alpha, condition="identified"),
        BoundaryArc(tag="gamma3", kind="circular-arc", center=-0.25, radius=small, lo=alpha, hi=math.pi - alpha, condition="identified"),
        BoundaryArc(tag="gamma6", kind="vertical-ray", center=0.5, lo=rho, hi=a, condition="identified"),
        BoundaryArc(tag="gamma7", kind="vertical-ray", center=-0.5, lo=rho, hi=a, condition="identified"),
    ]
    identifications = [
        Identification(source="gamma6", target="gamma7", matrix=[[1.0, -1.0], [0.0, 1.0]]),
        Identification(source="gamma2", target="gamma3", matrix=geodesic_translation(-rho, rho, -length).tolist()),
    ]
    glued_arcs, glued_identifications = _glue_twisted_boundary(length, twist, rho, small)
    arcs.extend(glued_arcs)
    identifications.extend(glued_identifications)

    spec = SurfaceSpec(
        family="C", parameters={"length": length, "twist": twist, "a": a}, arcs=arcs,
        identifications=identifications, cusps=[CuspSpec(index=1, height=a)], potential=_field(potential),
    )
    logger.debug(f"构造亏格一曲面 C: ℓ={length:.6f}, τ={twist}, a={a}, α={alpha:.6f}")
    return spec.validate_geometry()


def _finite_cusp_chart(center: float) -> List[List[float]]:
    """尖点 center 处的标准缩放矩阵 w ↦ center - 1/(4w)"""
    return [[2.0 * center, -0.5], [2.0, 0.0]]


def build_genus_zero_three_cusps(a1: float = 1.5, a2: float = 1.5, a3: float = 1.5,
                                 potential: Optional[str] = None) -> SurfaceSpec:
    """
    Γ₀(4) 商曲面：尖点位于 z = 0 (a1)、z = 1/2 (a2) 与 ∞ (a3)。

    有限尖点的极限环在 ℍ 中是与实轴相切的欧氏圆。
    """
    for value in (a1, a2, a3):
        if value <= 0:
            raise GeometryError("切割高度必须为正")
    if a3 <= 0.25:
        raise GeometryError(f"无穷远尖点的切割高度 {a3} 必须高于边界半圆（1/4）")
    if a1 * a2 <= 0.25:
        raise GeometryError(f"尖点 0 与 1/2 的极限环圆盘重叠（a1·a2 = {a1 * a2:.4g} ≤ 1/4）")
    if 1.0 / (4 * a1) >= a3 or 1.0 / (4 * a2) >= a3:
        raise GeometryError("有限尖点的极限环圆盘与无穷远尖点的切割线相交")

    chart_zero = _finite_cusp_chart(0.0)
    chart_right = _finite_cusp_chart(0.5)
    chart_left = _finite_cusp_chart(-0.5)
    top = 1.0 / (4 * a2)

    def angle_on(center: float, chart, w: complex) -> float:
        return float(np.angle(mobius_apply(chart, w) - center))

    gamma1_ends = (angle_on(0.25, chart_zero, -0.5 + 1j * a1), angle_on(0.25, chart_right, 0.5 + 1j * a2))
    gamma2_ends = (angle_on(-0.25, chart_zero, 0.5 + 1j * a1), angle_on(-0.25, chart_left, -0.5 + 1j * a2))
    arcs = [
        BoundaryArc(tag="horocycle_inf", kind="horocycle-segment", height=a3, lo=-0.5, hi=0.5, condition="cusp", cusp=3),
        BoundaryArc(tag="gamma3", kind="vertical-ray", center=-0.5, lo=top, hi=a3, condition="identified"),
        BoundaryArc(tag="gamma4", kind="vertical-ray", center=0.5, lo=top, hi=a3, condition="identified"),
        BoundaryArc(tag="horocycle_half_left", kind="horocycle-segment", height=a2, lo=-0.5, hi=0.0,
                    condition="cusp", cusp=2, chart=chart_left),
        BoundaryArc(tag="horocycle_half_right", kind="horocycle-segment", height=a2, lo=0.0, hi=0.5,
                    condition="cusp", cusp=2, chart=chart_right),
        BoundaryArc(tag="horocycle_zero", kind="horocycle-segment", height=a1, lo=-0.5, hi=0.5,
                    condition="cusp", cusp=1, chart=chart_zero),
        BoundaryArc(tag="gamma1", kind="circular-arc", center=0.25, radius=0.25,
                    lo=min(gamma1_ends), hi=max(gamma1_ends), condition="identified"),
        BoundaryArc(tag="gamma2", kind="circular-arc", center=-0.25, radius=0.25,
                    lo=min(gamma2_ends), hi=max(gamma2_ends), condition="identified"),
    ]
    identifications = [
        Identification(source="gamma3", target="gamma4", matrix=[[1.0, 1.0], [0.0, 1.0]]),
        Identification(source="gamma2", target="gamma1", matrix=[[1.0, 0.0], [4.0, 1.0]]),
    ]
    cusps = [
        CuspSpec(index=1, height=a1, chart=chart_zero),
        CuspSpec(index=2, height=a2, chart=chart_right),
        CuspSpec(index=3, height=a3),
    ]
    spec = SurfaceSpec(
        family="D", parameters={"a1": a1, "a2": a2, "a3": a3}, arcs=arcs,
        identifications=identifications, cusps=cusps, potential=_field(potential),
    )
    logger.debug(f"构造三尖点亏格零曲面 D: a=({a1}, {a2}, {a3})")
    return spec.validate_geometry()


# ---------------------------------------------------------------------------
# 测地线长度恒等式
# ---------------------------------------------------------------------------

def second_geodesic_length(length: float, twist: float) -> float:
    """C_{ℓ,τ} 上第二条闭测地线的长度 ℓ'(ℓ, τ)"""
    if length <= 0:
        raise GeometryError(f"ℓ = {length} 必须为正")
    half = length / 2
    value = (math.cosh(length * twist) * math.cosh(half) ** 2 + 1) / math.sinh(half) ** 2
    return math.acosh(value)


def equal_length_locus(twist: float) -> float:
    """cosh ℓ - cosh(ℓτ) = 2 的正根 ℓ*(τ)"""
    if not 0.0 <= twist < 1.0:
        raise GeometryError(f"τ = {twist} 必须位于 [0, 1)")

    def residual(length: float) -> float:
        return math.cosh(length) - math.cosh(length * twist) - 2.0

    upper = 2.0
    while residual(upper) <= 0:
        upper *= 2.0
    return optimize.brentq(residual, 1e-12, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def twist_for_equal_lengths(length: float) -> float:
    """给定 ℓ，使两条闭测地线等长的扭转 τ*(ℓ) = arccosh(cosh ℓ - 2)/ℓ"""
    if math.cosh(length) < 3.0:
        raise GeometryError(f"ℓ = {length} 太短，不存在等长扭转（需要 cosh ℓ ≥ 3）")
    return math.acosh(math.cosh(length) - 2.0) / length


# ---------------------------------------------------------------------------
# 预设
# ---------------------------------------------------------------------------

PRESETS: Dict[str, Callable[[], SurfaceSpec]] = {
    "A0": lambda: build_modular(2.0, 0.0),
    "A0_even": lambda: build_modular(2.0, 0.0, reduction="even"),
    "A0_odd": lambda: build_modular(6.0, 0.0, reduction="odd"),
    "B_sqrt2": lambda: build_artin(1 / math.sqrt(2)),
    "B_sqrt3": lambda: build_artin(1 / math.sqrt(3)),
    "C_acosh2": lambda: build_genus_one(math.acosh(2.0), 0.0),
    "C_acosh3": lambda: build_genus_one(math.acosh(3.0), 0.0),
    "C_acosh9": lambda: build_genus_one(math.acosh(9.0), 0.0),
    "C_gutzwiller": lambda: build_genus_one(2 * math.acosh(1.5), 0.5),
    "D": lambda: build_genus_zero_three_cusps(),
}


def surface_from_name(name: str) -> SurfaceSpec:
    if name not in PRESETS:
        raise GeometryError(f"未知的曲面预设 {name}，可选: {', '.join(sorted(PRESETS))}")
    return PRESETS[name]()


def build_surface(family: str, params: Dict[str, float], reduction: str = "none") -> SurfaceSpec:
    """按族名和参数字典构造曲面（供配置文件与参数追踪使用）"""
    params = dict(params)
    if family == "A":
        return build_modular(params.get("a", 2.0), params.get("q", 0.0), reduction=reduction,
                             conformal_family=params.get("conformal_family", "horizontal"))
    if family == "B":
        return build_artin(params["r"], params.get("a", 1.5))
    if family == "C":
        return build_genus_one(params["length"], params.get("twist", 0.0), params.get("a"))
    if family == "D":
        return build_genus_zero_three_cusps(params.get("a1", 1.5), params.get("a2", 1.5), params.get("a3", 1.5))
    raise GeometryError(f"未知的曲面族 {family}")


def spec_to_json(spec: SurfaceSpec) -> str:
    return spec.model_dump_json(indent=2)


def spec_from_json(text: str) -> SurfaceSpec:
    return SurfaceSpec.model_validate_json(text).validate_geometry()


def sample_arc_points(spec: SurfaceSpec, tags: Sequence[str], n: int = 9) -> Dict[str, np.ndarray]:
    return {tag: spec.arc(tag).point(spec.arc(tag).sample(n - 1)) for tag in tags}
