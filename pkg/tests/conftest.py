#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest
from loguru import logger

from numerics.cuspnd import averaging_matrix, mode_ordering
from numerics.fem import NeumannSpectralData
from numerics.specialfn import ClosedFormCase, ClosedFormEvaluator

# ζ 非平凡零点的虚部（前 30 个）
ZETA_ZERO_ORDINATES = [
    14.134725142, 21.022039639, 25.010857580, 30.424876126, 32.935061588,
    37.586178159, 40.918719012, 43.327073281, 48.005150881, 49.773832478,
    52.970321478, 56.446247697, 59.347044003, 60.831778525, 65.112544048,
    67.079810529, 69.546401711, 72.067157674, 75.704690699, 77.144840069,
    79.337375020, 82.910380854, 84.735492981, 87.425274613, 88.809111208,
    92.491899271, 94.651344041, 95.870634228, 98.831194218, 101.317851006,
]

FABRICATED_EIGENVALUES = np.array([0.0, 3.1, 5.7, 12.4, 20.9, 33.3, 47.2, 61.0, 80.5, 97.3])


@pytest.fixture(autouse=True)
def _quiet_logs():
    """测试期间只保留 WARNING 以上的日志"""
    logger.remove()
    handler = logger.add(lambda message: None, level="WARNING")
    yield
    logger.remove(handler)


@pytest.fixture
def modular_evaluator():
    return ClosedFormEvaluator(ClosedFormCase.A0)


@pytest.fixture
def artin_sqrt2_evaluator():
    return ClosedFormEvaluator(ClosedFormCase.B_SQRT2)


def fabricate_spectral_data(J: int = 2, heights=(1.5,), seed: int = 7) -> NeumannSpectralData:
    """
    随机但结构合理的边界谱数据：c_{j,-m} = conj(c_{j,m})，常数模式系数为实数，
    对应实值特征函数。
    """
    rng = np.random.default_rng(seed)
    p = len(heights)
    n = len(FABRICATED_EIGENVALUES)
    modes = mode_ordering(J, p)
    coeffs = np.zeros((n, len(modes)), dtype=complex)
    for k in range(1, p + 1):
        base = (k - 1) * (2 * J + 1) + J
        coeffs[:, base] = rng.normal(size=n)
        for m in range(1, J + 1):
            value = rng.normal(size=n) + 1j * rng.normal(size=n)
            coeffs[:, base + m] = value / (1 + m)
            coeffs[:, base - m] = np.conj(value) / (1 + m)
    heights = np.asarray(heights, dtype=float)
    mode_heights = np.repeat(heights, 2 * J + 1)
    norms = np.sum(mode_heights * np.abs(coeffs) ** 2, axis=1) + 0.1
    return NeumannSpectralData(
        eigenvalues=FABRICATED_EIGENVALUES.copy(), boundary_coeffs=coeffs, J=J, heights=heights,
        widths=np.ones(p), folds=np.zeros(p, dtype=bool), boundary_norms=norms, meta={"family": "test"},
    )


@pytest.fixture
def spectral_data():
    return fabricate_spectral_data()


class LinearRootEvaluator:
    """det C(1-s) = Π (s - r) 的人造求值器，用于检验求根逻辑"""

    def __init__(self, roots):
        self.roots = [complex(r) for r in roots]

    def matrix(self, w):
        s = 1.0 - complex(w)
        value = 1.0 + 0j
        for root in self.roots:
            value *= s - root
        return np.array([[value]])


class ExponentialEvaluator:
    """det C(1-s) = e^s，没有零点"""

    def matrix(self, w):
        return np.array([[np.exp(1.0 - complex(w))]])


class _Interior:
    def __init__(self, entries):
        self.entries = entries


class _Cusp:
    def __init__(self, diagonal):
        self.diagonal = diagonal


class EmbeddedModelEvaluator:
    """
    P Q̃ 在 t = t_i 处恰好亏秩的两模式模型；每个 t_i 对应一个独立的核方向。
    """

    def __init__(self, crossings, J: int = 1):
        self.crossings = list(crossings)
        self.J = J
        self.av = averaging_matrix(J, 1)

    def components(self, s):
        t = float(((complex(s) - 0.5) / 1j).real)
        size = 2 * self.J + 1
        diagonal = np.ones(size, dtype=complex)
        free = [i for i in range(size) if i != self.J]
        for index, crossing in zip(free, self.crossings):
            diagonal[index] = (t - crossing) - 1.0
        return _Interior(np.diag(diagonal)), _Cusp(np.ones(size, dtype=complex))
