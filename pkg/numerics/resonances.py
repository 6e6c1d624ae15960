#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
共振与嵌入特征值。

共振是 C(s) 的极点，等价地是 f(s) = det C̃(1-s) 在 Re s < 1/2 中的零点。
这里提供：Newton 求根（中心差分导数）、逐根收缩的批量求根、辐角原理计数、
沿曲面参数的多项式外推跟踪，以及临界线上的 QR/奇异值嵌入特征值扫描。
求值器只需提供 matrix(s)（或可调用并返回矩阵/带 C 属性的结果）。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from joblib import Parallel, delayed
from loguru import logger
from scipy import optimize

from config.settings import SETTINGS
from numerics.errors import (
    ArgumentPrincipleError,
    ConvergenceError,
    CuspScatterError,
    NearSpectrumError,
    NeumannPoleError,
    SingularSystemError,
)
from numerics.linalg import qr

RESONANCE_DEFAULTS = SETTINGS.resonance_config

# 分类阈值
CRITICAL_LINE_TOL = 5e-3
IMAGINARY_AXIS_TOL = 5e-3
NEAR_SPECTRUM_TOL = 1e-2

# 默认种子窗口 [Re 下限, Re 上限, Im 下限, Im 上限]
DEFAULT_WINDOW = (-0.2, 0.45, 0.5, 20.0)
RELAXED_GUARD = 1e-6
WINDING_TOL = 0.1


def _matrix_of(evaluator, s: complex) -> np.ndarray:
    if hasattr(evaluator, "matrix"):
        return np.atleast_2d(evaluator.matrix(s))
    result = evaluator(s)
    if hasattr(result, "C"):
        return np.atleast_2d(result.C)
    return np.atleast_2d(np.asarray(result, dtype=complex))


def det_c_inverse_arg(s: complex, evaluator) -> complex:
    """f(s) = det C̃(1-s)"""
    return complex(np.linalg.det(_matrix_of(evaluator, 1.0 - complex(s))))


def classify(s: complex) -> str:
    s = complex(s)
    if abs(s.real - 0.25) <= CRITICAL_LINE_TOL:
        return "critical-line"
    if abs(s.real) <= IMAGINARY_AXIS_TOL:
        return "imaginary-axis"
    if abs(s.real - 0.5) <= NEAR_SPECTRUM_TOL:
        return "near-spectrum"
    return "generic"


@dataclass
class ResonanceRecord:
    """det C̃(1-s) 的一个零点；极点位于 1-s"""

    s: complex
    residual: float
    multiplicity: int = 1
    classification: str = ""
    parameter: Optional[float] = None
    iterations: int = 0
    members: List[complex] = field(default_factory=list)

    def __post_init__(self):
        self.s = complex(self.s)
        if not self.classification:
            self.classification = classify(self.s)
        if not self.members:
            self.members = [self.s]

    @property
    def pole(self) -> complex:
        return 1.0 - self.s

    def to_row(self) -> Dict[str, Any]:
        return {
            "param": self.parameter,
            "re_s": self.s.real,
            "im_s": self.s.imag,
            "residual": self.residual,
            "class": self.classification,
            "multiplicity": self.multiplicity,
        }


@dataclass
class Trajectory:
    """沿参数网格跟踪的单个共振路径"""

    parameters: List[float] = field(default_factory=list)
    records: List[ResonanceRecord] = field(default_factory=list)
    predictor_order: int = 3
    truncated: bool = False
    note: str = ""

    def append(self, record: ResonanceRecord) -> None:
        self.parameters.append(float(record.parameter))
        self.records.append(record)

    @property
    def points(self) -> np.ndarray:
        return np.array([r.s for r in self.records], dtype=complex)

    def max_step(self) -> float:
        if len(self.records) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.points))))

    def predict(self, parameter: float) -> complex:
        """对末尾至多 order+1 个点做多项式外推（实部、虚部分别拟合）"""
        if not self.records:
            raise ValueError("空轨迹无法外推")
        count = min(len(self.records), self.predictor_order + 1)
        x = np.asarray(self.parameters[-count:], dtype=float)
        y = self.points[-count:]
        if count == 1:
            return complex(y[0])
        degree = count - 1
        re = np.polyval(np.polyfit(x, y.real, degree), parameter)
        im = np.polyval(np.polyfit(x, y.imag, degree), parameter)
        return complex(re, im)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [r.to_row() for r in self.records]


@dataclass
class EmbeddedCandidate:
    """临界线上 P Q̃ 最小奇异值的局部极小点"""

    t: float
    sigma_min: float
    multiplicity: int
    gap: float

    @property
    def lam(self) -> float:
        return 0.25 + self.t ** 2

    def to_row(self) -> Dict[str, Any]:
        return {"t": self.t, "lambda": self.lam, "sigma_min": self.sigma_min,
                "multiplicity": self.multiplicity, "gap": self.gap}


@dataclass
class EmbeddedScanResult:
    t: np.ndarray
    sigma: np.ndarray
    candidates: List[EmbeddedCandidate]

    def samples(self) -> List[Tuple[float, float]]:
        return list(zip(self.t.tolist(), self.sigma.tolist()))


def _deflated(evaluator, roots: Sequence[complex]) -> Callable[[complex], complex]:
    roots = [complex(r) for r in roots]

    def value(s: complex) -> complex:
        f = det_c_inverse_arg(s, evaluator)
        for root in roots:
            if s == root:
                raise ConvergenceError(f"迭代点 {s} 恰好落在已收缩的根上", partial=s)
            f /= (s - root)
        return f

    return value


def newton_find(seed: complex, evaluator, tol: Optional[float] = None, max_iter: Optional[int] = None,
                step: Optional[float] = None, guard: Optional[float] = None,
                deflate: Sequence[complex] = (), divergence_radius: float = 2.0,
                parameter: Optional[float] = None) -> ResonanceRecord:
    """
    对 f(s) = det C̃(1-s)（可先除去已知根）做复 Newton 迭代，导数用中心差分。

    Raises:
        NearSpectrumError: 迭代点进入 Re s ≥ 1/2 - guard 的保护带。
        ConvergenceError: 发散、导数为零、迭代次数耗尽或收敛点残差过大。
    """
    tol = RESONANCE_DEFAULTS["newton_tol"] if tol is None else tol
    max_iter = RESONANCE_DEFAULTS["newton_max_iter"] if max_iter is None else max_iter
    step = RESONANCE_DEFAULTS["newton_step"] if step is None else step
    guard = RESONANCE_DEFAULTS["spectrum_guard"] if guard is None else guard
    residual_floor = 1e-13

    seed = complex(seed)
    if seed.real >= 0.5 - guard:
        raise NearSpectrumError(f"种子 {seed} 位于谱保护带内", partial=seed)
    f = _deflated(evaluator, deflate)
    s = seed
    history: List[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        fs = f(s)
        history.append(abs(fs))
        if not np.isfinite(fs):
            raise ConvergenceError(f"f({s}) 不是有限值", partial=s, iterations=iteration, residuals=history)
        if abs(fs) <= residual_floor:
            converged = True
            break
        derivative = (f(s + step) - f(s - step)) / (2.0 * step)
        if derivative == 0:
            raise ConvergenceError(f"在 s = {s} 处数值导数为零", partial=s, iterations=iteration, residuals=history)
        delta = fs / derivative
        s_new = s - delta
        if not np.isfinite(s_new) or abs(s_new - seed) > divergence_radius:
            raise ConvergenceError(f"Newton 迭代从种子 {seed} 发散", partial=s_new, iterations=iteration,
                                   residuals=history)
        if s_new.real >= 0.5 - guard:
            raise NearSpectrumError(f"Newton 迭代进入谱保护带: {s_new}", partial=s_new, iterations=iteration,
                                    residuals=history)
        s = s_new
        logger.debug(f"Newton 第 {iteration} 步: s = {s:.10g}, |f| = {abs(fs):.3e}, |Δs| = {abs(delta):.3e}")
        if abs(delta) <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"Newton 在 {max_iter} 步内未收敛", partial=s, iterations=max_iter, residuals=history)

    residual = abs(det_c_inverse_arg(s, evaluator))
    if residual > RESONANCE_DEFAULTS["residual_tol"]:
        raise ConvergenceError(f"收敛点 {s} 的残差 {residual:.3e} 超过接受阈值", partial=s,
                               iterations=iteration, residuals=history)
    return ResonanceRecord(s=s, residual=residual, parameter=parameter, iterations=iteration)


def cluster_records(records: Sequence[ResonanceRecord], radius: Optional[float] = None) -> List[ResonanceRecord]:
    """把彼此相距不超过 radius 的根合并为一条带重数的记录（传递闭包）"""
    radius = RESONANCE_DEFAULTS["cluster_radius"] if radius is None else radius
    remaining = list(records)
    clusters: List[ResonanceRecord] = []
    while remaining:
        group = [remaining.pop(0)]
        grown = True
        while grown:
            grown = False
            for candidate in list(remaining):
                if any(abs(candidate.s - member.s) <= radius for member in group):
                    group.append(candidate)
                    remaining.remove(candidate)
                    grown = True
        members = [r.s for r in group]
        best = min(group, key=lambda r: r.residual)
        centre = complex(np.mean(members))
        clusters.append(ResonanceRecord(
            s=centre if len(group) > 1 else best.s, residual=best.residual, multiplicity=len(group),
            parameter=best.parameter, iterations=best.iterations, members=members,
        ))
    clusters.sort(key=lambda r: (r.s.imag, r.s.real))
    return clusters


def _away_from_roots(seed: complex, roots: Sequence[complex], nudge: float) -> complex:
    """起点离已收缩的根太近时沿虚方向移开，保证差分的三个点都不落在根上"""
    start = seed
    while any(abs(start - root) <= nudge for root in roots):
        start += 1j * nudge
    return start


def deflated_find(seeds: Sequence[complex], evaluator, search_radius: float = 0.25,
                  cluster_radius: Optional[float] = None, max_per_seed: int = 8,
                  known: Sequence[complex] = ()) -> List[ResonanceRecord]:
    """
    逐个种子反复求 f(s)/Π(s - s_found) 的根，直到失败或新根落在 search_radius 之外。
    找到的根按 cluster_radius 合并，簇的大小作为重数估计。
    """
    if not seeds:
        raise ValueError("至少需要一个种子")
    found: List[ResonanceRecord] = []
    roots: List[complex] = [complex(r) for r in known]
    nudge = 10.0 * RESONANCE_DEFAULTS["newton_step"]
    for seed in seeds:
        seed = complex(seed)
        hits = 0
        for _ in range(max_per_seed):
            start = _away_from_roots(seed, roots, nudge)
            try:
                record = newton_find(start, evaluator, deflate=roots)
            except CuspScatterError as exc:
                if hits:
                    logger.debug(f"种子 {seed:.6g} 的收缩求根结束: {exc}")
                else:
                    logger.warning(f"种子 {seed:.6g} 没有找到根，已跳过: {type(exc).__name__}: {exc}")
                break
            if abs(record.s - seed) > search_radius:
                logger.debug(f"种子 {seed:.6g} 得到的根 {record.s:.6g} 超出搜索半径")
                break
            found.append(record)
            roots.append(record.s)
            hits += 1
    records = cluster_records(found, cluster_radius)
    logger.info(f"收缩求根: {len(seeds)} 个种子，{len(found)} 个根，合并为 {len(records)} 条记录")
    return records


def _parallel_map(func: Callable, items: Sequence, workers: Optional[int] = None) -> List:
    workers = SETTINGS.workers if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with Parallel(n_jobs=workers, backend="threading") as parallel:
        return parallel(delayed(func)(item) for item in items)


def _safe_abs_det(evaluator, s: complex) -> float:
    try:
        return abs(det_c_inverse_arg(s, evaluator))
    except CuspScatterError as exc:
        logger.debug(f"网格点 {s:.6g} 求值失败: {exc}")
        return float("inf")


def _check_window(window: Sequence[float]) -> Tuple[float, float, float, float]:
    re_lo, re_hi, im_lo, im_hi = (float(v) for v in window)
    if re_lo >= re_hi or im_lo >= im_hi:
        raise ValueError(f"窗口 {window} 无效")
    return re_lo, re_hi, im_lo, im_hi


def seed_scan(evaluator, window: Sequence[float] = DEFAULT_WINDOW, spacing: Optional[float] = None,
              workers: Optional[int] = None) -> List[complex]:
    """在矩形网格上计算 |det C̃(1-s)|，返回按函数值升序排列的局部极小点"""
    re_lo, re_hi, im_lo, im_hi = _check_window(window)
    spacing = RESONANCE_DEFAULTS["seed_spacing"] if spacing is None else spacing
    res = np.arange(re_lo, re_hi + 0.5 * spacing, spacing)
    ims = np.arange(im_lo, im_hi + 0.5 * spacing, spacing)
    points = [complex(x, y) for y in ims for x in res]
    values = np.array(_parallel_map(lambda z: _safe_abs_det(evaluator, z), points, workers)).reshape(len(ims), len(res))

    seeds: List[Tuple[float, complex]] = []
    for i in range(len(ims)):
        for j in range(len(res)):
            value = values[i, j]
            if not np.isfinite(value):
                continue
            neighbourhood = values[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if value <= np.min(neighbourhood[np.isfinite(neighbourhood)]):
                seeds.append((value, complex(res[j], ims[i])))
    seeds.sort(key=lambda item: item[0])
    logger.info(f"种子扫描: {len(points)} 个网格点，{len(seeds)} 个局部极小")
    return [s for _, s in seeds]


def resonance_scan(evaluator, window: Sequence[float] = DEFAULT_WINDOW, spacing: Optional[float] = None,
                   workers: Optional[int] = None) -> List[ResonanceRecord]:
    """种子扫描 + 收缩求根，只保留窗口内的结果"""
    re_lo, re_hi, im_lo, im_hi = _check_window(window)
    seeds = seed_scan(evaluator, window, spacing, workers)
    if not seeds:
        return []
    records = deflated_find(seeds, evaluator)
    inside = [r for r in records if re_lo <= r.s.real <= re_hi and im_lo <= r.s.imag <= im_hi]
    return inside


def _rectangle_points(re_lo: float, re_hi: float, im_lo: float, im_hi: float, n_points: int) -> np.ndarray:
    """逆时针矩形边界，各边点数按边长分配，首尾闭合"""
    corners = [complex(re_lo, im_lo), complex(re_hi, im_lo), complex(re_hi, im_hi), complex(re_lo, im_hi)]
    perimeter = 2 * ((re_hi - re_lo) + (im_hi - im_lo))
    pieces = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        count = max(4, int(math.ceil(n_points * abs(b - a) / perimeter)))
        pieces.append(a + (b - a) * np.arange(count) / count)
    pieces.append(np.array([corners[0]]))
    return np.concatenate(pieces)


def count_by_argument_principle(contour: Sequence[float], evaluator, n_points: int = 400,
                                max_refinements: int = 4, workers: Optional[int] = None) -> int:
    """
    矩形 [re_lo, re_hi]×[im_lo, im_hi]i 内 det C̃(1-s) 的零点个数（含重数）。

    相邻点辐角增量超过 π/4 时加倍采样点数，至多 max_refinements 次。

    Raises:
        ValueError: 矩形距 Re s = 1/2 不足 1e-2。
        ArgumentPrincipleError: 卷绕数与整数偏差超过 0.1。
    """
    re_lo, re_hi, im_lo, im_hi = _check_window(contour)
    if re_hi > 0.5 - NEAR_SPECTRUM_TOL:
        raise ValueError(f"围道右边界 {re_hi} 距 Re s = 1/2 不足 {NEAR_SPECTRUM_TOL}")

    points = n_points
    winding = float("nan")
    for attempt in range(max_refinements + 1):
        z = _rectangle_points(re_lo, re_hi, im_lo, im_hi, points)
        values = np.array(_parallel_map(lambda w: det_c_inverse_arg(w, evaluator), list(z), workers))
        if np.any(values == 0) or not np.all(np.isfinite(values)):
            raise ArgumentPrincipleError("围道经过 det C̃(1-s) 的零点或极点", winding=float("nan"))
        increments = np.angle(values[1:] / values[:-1])
        winding = float(np.sum(increments) / (2 * math.pi))
        if np.max(np.abs(increments)) <= math.pi / 4:
            break
        logger.debug(f"辐角增量 {np.max(np.abs(increments)):.3f} 过大，采样点数加倍到 {2 * points}")
        points *= 2

    nearest = int(round(winding))
    if abs(winding - nearest) > WINDING_TOL:
        raise ArgumentPrincipleError(
            f"卷绕数 {winding:.4f} 不接近整数，请增加 n_points（当前 {points}）", winding=winding,
        )
    logger.info(f"辐角原理: 矩形 {contour} 内有 {nearest} 个零点（卷绕数 {winding:.6f}）")
    return nearest


def _correct(prediction: complex, evaluator, parameter: float, deflate: Sequence[complex]) -> ResonanceRecord:
    """预测点上的 Newton 校正；进入保护带时放宽到 RELAXED_GUARD 重试一次"""
    try:
        return newton_find(prediction, evaluator, deflate=deflate, parameter=parameter)
    except NearSpectrumError:
        logger.warning(f"参数 {parameter:.6g} 处的根接近谱线，放宽保护带重试")
        return newton_find(prediction, evaluator, deflate=deflate, parameter=parameter, guard=RELAXED_GUARD)


def track(evaluator_factory: Callable[[float], Any], parameters: Sequence[float], seeds: Sequence[complex],
          predictor_order: int = 3, max_step: float = 0.1,
          workers: Optional[int] = None) -> List[Trajectory]:
    """
    沿参数网格跟踪共振。

    evaluator_factory(参数) 返回该参数曲面的求值器（通常运行一次完整流水线）。
    每步先多项式外推再 Newton 校正；步长超过 max_step 时把轨迹拆分，
    Newton 失败则标记轨迹为截断并停止跟踪。
    """
    parameters = [float(x) for x in parameters]
    if not parameters:
        raise ValueError("参数网格为空")
    if not seeds:
        raise ValueError("至少需要一个种子")

    first = evaluator_factory(parameters[0])
    active: List[Trajectory] = []
    finished: List[Trajectory] = []
    for seed in seeds:
        trajectory = Trajectory(predictor_order=predictor_order)
        try:
            trajectory.append(newton_find(seed, first, parameter=parameters[0]))
        except CuspScatterError as exc:
            trajectory.truncated = True
            trajectory.note = f"初始种子 {complex(seed)} 失败: {exc}"
            finished.append(trajectory)
            continue
        active.append(trajectory)

    for parameter in parameters[1:]:
        if not active:
            break
        evaluator = evaluator_factory(parameter)

        def step(trajectory: Trajectory):
            try:
                return _correct(trajectory.predict(parameter), evaluator, parameter, ())
            except CuspScatterError as exc:
                return exc

        outcomes = _parallel_map(step, active, workers)
        still_active: List[Trajectory] = []
        for trajectory, outcome in zip(active, outcomes):
            if isinstance(outcome, CuspScatterError):
                trajectory.truncated = True
                trajectory.note = f"参数 {parameter:.6g} 处丢失: {outcome}"
                logger.warning(f"轨迹在参数 {parameter:.6g} 处截断")
                finished.append(trajectory)
                continue
            jump = abs(outcome.s - trajectory.records[-1].s)
            if jump > max_step:
                trajectory.note = f"参数 {parameter:.6g} 处跳变 {jump:.3g}，轨迹拆分"
                logger.warning(trajectory.note)
                finished.append(trajectory)
                trajectory = Trajectory(predictor_order=predictor_order)
            trajectory.append(outcome)
            still_active.append(trajectory)
        active = still_active

    finished.extend(active)
    logger.info(f"跟踪完成: {len(finished)} 条轨迹，其中 {sum(t.truncated for t in finished)} 条截断")
    return finished


def embedded_singular_values(evaluator, t: float) -> np.ndarray:
    """
    s = 1/2 + it 处 P Q̃ 的奇异值（升序）。B̃ 按行块堆叠
    [Ñ^M + Ñ^c; ãv; Ñ^M; Ñ^c]，Q̃ 来自其经济 QR，P 取前两个行块。

    Raises:
        SingularSystemError: B̃ 秩亏。
    """
    ndm, ndc = evaluator.components(0.5 + 1j * float(t))
    NM = ndm.entries
    Nc = np.diag(ndc.diagonal)
    n = NM.shape[0]
    B = np.vstack([NM + Nc, evaluator.av, NM, Nc])
    Q, R = qr(B)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-14 * max(diag.max(), 1.0):
        raise SingularSystemError(f"t = {t} 处 B̃ 秩亏", condition=float("inf"))
    return np.sort(sla.svdvals(Q[:2 * n]))


def _sigma_min(evaluator, t: float) -> float:
    try:
        return float(embedded_singular_values(evaluator, t)[0])
    except (NeumannPoleError, SingularSystemError) as exc:
        logger.debug(f"t = {t:.6g} 处跳过: {exc}")
        return float("nan")


def embedded_scan(evaluator, t_grid: Sequence[float], threshold: Optional[float] = None,
                  workers: Optional[int] = None) -> EmbeddedScanResult:
    """
    在实网格 t 上计算 P Q̃(1/2+it) 的最小奇异值，局部极小经有界 Brent 细化后
    低于 threshold 的作为嵌入特征值候选。候选只附带奇异值间隙，不再区分真特征值与近谱共振。
    """
    threshold = RESONANCE_DEFAULTS["embedded_threshold"] if threshold is None else threshold
    gap_ratio = SETTINGS.scattering_config["gap_ratio"]
    t_values = np.asarray(t_grid, dtype=float)
    if np.any(t_values < 0):
        raise ValueError("t 必须非负")
    sigma = np.array(_parallel_map(lambda t: _sigma_min(evaluator, t), list(t_values), workers))

    candidates: List[EmbeddedCandidate] = []
    for i in range(1, len(t_values) - 1):
        window = sigma[i - 1:i + 2]
        if not np.all(np.isfinite(window)) or sigma[i] > window[0] or sigma[i] > window[2]:
            continue
        result = optimize.minimize_scalar(
            lambda t: np.nan_to_num(_sigma_min(evaluator, t), nan=1.0),
            bounds=(t_values[i - 1], t_values[i + 1]), method="bounded", options={"xatol": 1e-9},
        )
        t_star = float(result.x)
        try:
            values = embedded_singular_values(evaluator, t_star)
        except (NeumannPoleError, SingularSystemError):
            continue
        if values[0] >= threshold:
            continue
        multiplicity = int(np.sum((values < threshold) | (values < gap_ratio * values[0])))
        gap = float(values[1] / values[0]) if len(values) > 1 and values[0] > 0 else float("inf")
        candidates.append(EmbeddedCandidate(t=t_star, sigma_min=float(values[0]),
                                            multiplicity=max(1, multiplicity), gap=gap))
        logger.info(f"嵌入特征值候选 t = {t_star:.6f}, σ_min = {values[0]:.3e}, 重数 {multiplicity}")
    return EmbeddedScanResult(t=t_values, sigma=sigma, candidates=candidates)
