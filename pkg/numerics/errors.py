#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
数值计算各模块共用的异常类型
"""

from typing import Any, Optional, Sequence


class CuspScatterError(Exception):
    """所有计算错误的基类"""


class GeometryError(CuspScatterError):
    """曲面参数无效、粘合映射校验失败或切割高度不合法"""


class MeshError(CuspScatterError):
    """网格生成失败或粘合边界节点无法匹配"""


class ConvergenceError(CuspScatterError):
    """迭代过程未收敛，携带部分结果和迭代次数"""

    def __init__(self, message: str, partial: Any = None, iterations: int = 0, residuals: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.partial = partial
        self.iterations = iterations
        self.residuals = list(residuals) if residuals is not None else []


class NeumannPoleError(CuspScatterError):
    """谱参数过于接近某个 Neumann 特征值"""

    def __init__(self, message: str, eigenvalue: float, index: int):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.index = index


class SingularSystemError(CuspScatterError):
    """线性系统在工作精度下奇异"""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class KernelDimensionError(CuspScatterError):
    """小奇异值个数与尖点个数不一致"""

    def __init__(self, message: str, singular_values: Sequence[float] = ()):
        super().__init__(message)
        self.singular_values = list(singular_values)


class NearSpectrumError(ConvergenceError):
    """Newton 迭代进入 Re s ≥ 1/2 附近的保护带"""


class ArgumentPrincipleError(CuspScatterError):
    """围道缠绕数不接近整数"""

    def __init__(self, message: str, winding: float):
        super().__init__(message)
        self.winding = winding


class ClosedFormError(CuspScatterError):
    """闭式散射矩阵在极点处求值或与曲面不匹配"""


class StageError(CuspScatterError):
    """带有阶段归属的流水线错误"""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
