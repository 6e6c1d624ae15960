#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
尖点区域的 Neumann-to-Dirichlet 映射。

在尖点 Z_k = {y ≥ a_k} 上第 m 个 Fourier 模式的衰减解为 √y K_{s-1/2}(2π|m|y/w)，
因此 ND 映射在 Fourier 基下是对角的，对角元由 Bessel K 函数的对数导数给出。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import integrate

from config.settings import SETTINGS
from numerics.errors import ConvergenceError

CF_DEFAULTS = SETTINGS.continued_fraction


def bessel_ratio_cf(t: complex, x: float, tol: Optional[float] = None, max_iter: Optional[int] = None,
                    tiny: Optional[float] = None) -> complex:
    """
    用修正 Lentz 算法计算 1/2 + x·K'_{it}(x)/K_{it}(x)。

    连分式为 -x - p₁/(2x+2 + p₂/(2x+4 + ...))，其中 p_n = -t² - (2n-1)²/4。

    Raises:
        ConvergenceError: max_iter 步内更新因子未收敛到 1。
    """
    if x <= 0:
        raise ValueError(f"x = {x} 必须为正")
    tol = CF_DEFAULTS["tol"] if tol is None else tol
    max_iter = CF_DEFAULTS["max_iter"] if max_iter is None else max_iter
    tiny = CF_DEFAULTS["tiny"] if tiny is None else tiny
    t = complex(t)
    nu_squared = -t * t

    f = complex(-x)
    if f == 0:
        f = complex(tiny)
    c, d = f, 0j
    for n in range(1, max_iter + 1):
        p_n = nu_squared - (2 * n - 1) ** 2 / 4.0
        a_n = -p_n if n == 1 else p_n
        b_n = 2.0 * x + 2.0 * n
        d = b_n + a_n * d
        if d == 0:
            d = complex(tiny)
        c = b_n + a_n / c
        if c == 0:
            c = complex(tiny)
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < tol:
            return f
    raise ConvergenceError(
        f"Bessel 连分式在 {max_iter} 步内未收敛 (t={t}, x={x})", partial=f, iterations=max_iter,
    )


def _integration_limit(x: float, nu: complex) -> float:
    """被积函数 e^{-x cosh u} cosh(νu) 小于 e^{-60} 的截断点"""
    upper = 1.0
    while x * math.cosh(upper) - abs(nu.real) * upper < 60.0:
        upper *= 1.5
    return upper


def bessel_ratio_quad(t: complex, x: float) -> complex:
    """积分表示 K_ν(x) = ∫₀^∞ e^{-x cosh u} cosh(νu) du 计算同一比值，用作后备和校验"""
    nu = 1j * complex(t)
    upper = _integration_limit(x, nu)

    def integral(weight) -> complex:
        real = integrate.quad(lambda u: (weight(u) * np.cosh(nu * u)).real * math.exp(-x * math.cosh(u)),
                              0.0, upper, limit=400, epsabs=0.0, epsrel=1e-13)[0]
        imag = integrate.quad(lambda u: (weight(u) * np.cosh(nu * u)).imag * math.exp(-x * math.cosh(u)),
                              0.0, upper, limit=400, epsabs=0.0, epsrel=1e-13)[0]
        return complex(real, imag)

    k_value = integral(lambda u: 1.0)
    k_derivative = -integral(lambda u: math.cosh(u))
    if k_value == 0:
        raise ConvergenceError(f"K_{{it}}({x}) 的积分值为零 (t={t})", partial=None)
    return 0.5 + x * k_derivative / k_value


def bessel_ratio(t: complex, x: float) -> complex:
    """先尝试连分式，停滞时自动退回积分"""
    try:
        return bessel_ratio_cf(t, x)
    except ConvergenceError as exc:
        logger.warning(f"连分式停滞 (t={complex(t):.6g}, x={x:.6g}, 已迭代 {exc.iterations} 步)，改用积分计算")
        return bessel_ratio_quad(t, x)


def cusp_nd_entry(s: complex, m: int, height: float, width: float = 1.0) -> complex:
    """尖点 ND 映射在模式 m 上的对角元 -(1/2 + xK'/K)^{-1}，x = 2π|m|a/w；m = 0 时为 0"""
    if m == 0:
        return 0j
    t = -1j * (complex(s) - 0.5)
    x = 2.0 * math.pi * abs(m) * height / width
    return -1.0 / bessel_ratio(t, x)


def mode_ordering(J: int, p: int) -> List[Tuple[int, int]]:
    """基向量顺序：先按尖点 k，再按 m 从 -J 到 J 升序"""
    return [(m, k) for k in range(1, p + 1) for m in range(-J, J + 1)]


def mode_weights(J: int, p: int) -> np.ndarray:
    """q 权重 |m| + 1"""
    return np.array([abs(m) + 1.0 for m, _ in mode_ordering(J, p)])


def constant_mode_indices(J: int, p: int) -> np.ndarray:
    """每个尖点 m = 0 模式所在的行号"""
    return np.array([(k - 1) * (2 * J + 1) + J for k in range(1, p + 1)])


def averaging_matrix(J: int, p: int) -> np.ndarray:
    """投影到每个尖点常数模式上的 0/1 对角矩阵"""
    av = np.zeros(((2 * J + 1) * p, (2 * J + 1) * p), dtype=complex)
    idx = constant_mode_indices(J, p)
    av[idx, idx] = 1.0
    return av


@dataclass
class CuspNDMatrix:
    """尖点 ND 映射在截断 Fourier 基下的对角矩阵"""

    s: complex
    J: int
    heights: np.ndarray
    diagonal: np.ndarray
    widths: np.ndarray = field(default=None)

    @property
    def p(self) -> int:
        return len(self.heights)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def entry(self, m: int, k: int) -> complex:
        return complex(self.diagonal[(k - 1) * (2 * self.J + 1) + m + self.J])


def cusp_nd(s: complex, cusps: Sequence, J: int) -> CuspNDMatrix:
    """
    组装尖点 ND 矩阵。cusps 可以是 CuspSpec 列表，也可以是 (高度, 宽度) 元组列表。

    对称性 d_{(m,k)} = d_{(-m,k)} 使每个 |m| 只需计算一次。
    """
    heights, widths = [], []
    for cusp in cusps:
        if isinstance(cusp, tuple):
            heights.append(float(cusp[0]))
            widths.append(float(cusp[1]))
        else:
            heights.append(float(cusp.height))
            widths.append(float(cusp.width))
    p = len(heights)
    cache: Dict[Tuple[int, int], complex] = {}
    diagonal = np.zeros((2 * J + 1) * p, dtype=complex)
    for row, (m, k) in enumerate(mode_ordering(J, p)):
        key = (abs(m), k)
        if key not in cache:
            cache[key] = cusp_nd_entry(s, abs(m), heights[k - 1], widths[k - 1])
        diagonal[row] = cache[key]
    return CuspNDMatrix(s=complex(s), J=J, heights=np.array(heights), diagonal=diagonal, widths=np.array(widths))
