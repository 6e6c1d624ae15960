#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
系统配置文件
"""

import os
from pathlib import Path
from typing import Dict, Any, List
import warnings

from dotenv import load_dotenv

load_dotenv()

ENV_PREFIX = "CUSPSCATTER_"


def _env(name: str, default: str) -> str:
    return os.environ.get(ENV_PREFIX + name, default)


def _env_float(name: str, default: float) -> float:
    raw = _env(name, repr(default))
    try:
        return float(raw)
    except ValueError:
        warnings.warn(f"环境变量 {ENV_PREFIX}{name}='{raw}' 不是有效数字，使用默认值 {default}")
        return default


def _env_int(name: str, default: int) -> int:
    raw = _env(name, str(default))
    try:
        return int(raw)
    except ValueError:
        warnings.warn(f"环境变量 {ENV_PREFIX}{name}='{raw}' 不是有效整数，使用默认值 {default}")
        return default


def _parse_anchors(raw: str) -> List[complex]:
    anchors = []
    for item in raw.split(","):
        item = item.strip().replace(" ", "")
        if not item:
            continue
        try:
            anchors.append(complex(item))
        except ValueError:
            warnings.warn(f"无法解析锚点 '{item}'，已忽略")
    return anchors


class Settings:
    """系统配置类"""

    def __init__(self):
        """初始化配置"""
        # --- 项目路径 ---
        self.base_dir = Path(__file__).resolve().parent.parent
        self.data_dir = Path(_env("DATA_DIR", str(self.base_dir / "data")))
        self.log_dir = Path(_env("LOG_DIR", str(self.base_dir / "logs")))
        self.cache_dir = Path(_env("CACHE_DIR", str(self.base_dir / "cache")))
        self.output_dir = Path(_env("OUTPUT_DIR", str(self.base_dir / "output")))

        # --- 创建必要的目录 ---
        self._create_directories()

        # --- 日志配置 ---
        self.log_level = _env("LOG_LEVEL", "INFO").upper()
        self.core_log_file = self.log_dir / "cuspscatter_core.log"

        # --- 网格与有限元 ---
        self.mesh_config = {
            "h": _env_float("MESH_H", 0.02),  # 双曲目标边长
            "n_boundary": _env_int("N_BOUNDARY", 128),
            "min_angle": _env_float("MIN_ANGLE", 20.0),
            "refinements": _env_int("REFINEMENTS", 0),
        }
        self.fem_config = {
            "element_order": _env_int("ELEMENT_ORDER", 1),
            "n_eigenpairs": _env_int("N_EIGENPAIRS", 600),
            "truncation_j": _env_int("TRUNCATION_J", 15),
            "anchors": _parse_anchors(_env("ANCHORS", "0.5+6j")),
            "eig_shift": _env_float("EIG_SHIFT", -0.01),
        }

        # --- 连分式 ---
        self.continued_fraction = {
            "tol": _env_float("CF_TOL", 1e-14),
            "tiny": _env_float("CF_TINY", 1e-30),
            "max_iter": _env_int("CF_MAX_ITER", 10000),
        }

        # --- 散射矩阵与共振 ---
        self.scattering_config = {
            "gap_ratio": _env_float("GAP_RATIO", 10.0),
            "pole_distance": _env_float("POLE_DISTANCE", 1e-6),
            "condition_limit": _env_float("CONDITION_LIMIT", 1e12),
            "q_weight": _env("Q_WEIGHT", "true").lower() == "true",
        }
        self.resonance_config = {
            "newton_tol": _env_float("NEWTON_TOL", 1e-8),
            "newton_step": _env_float("NEWTON_STEP", 1e-5),
            "newton_max_iter": _env_int("NEWTON_MAX_ITER", 60),
            "spectrum_guard": _env_float("SPECTRUM_GUARD", 1e-3),
            "residual_tol": _env_float("RESIDUAL_TOL", 1e-6),
            "cluster_radius": _env_float("CLUSTER_RADIUS", 1e-3),
            "embedded_threshold": _env_float("EMBEDDED_THRESHOLD", 1e-4),
            "seed_spacing": _env_float("SEED_SPACING", 0.05),
        }

        # --- 并行 ---
        self.workers = max(1, _env_int("WORKERS", 1))

    def _create_directories(self):
        """创建必要的目录"""
        for path in (self.data_dir, self.log_dir, self.cache_dir, self.output_dir):
            os.makedirs(path, exist_ok=True)

    def validate_numerics(self) -> bool:
        """验证数值配置是否自洽"""
        problems = []
        if self.fem_config["truncation_j"] * 4 > self.mesh_config["n_boundary"]:
            problems.append("TRUNCATION_J 超过 N_BOUNDARY/4")
        if self.fem_config["element_order"] not in (1, 2):
            problems.append("ELEMENT_ORDER 只能是 1 或 2")
        if not self.fem_config["anchors"]:
            problems.append("未配置任何锚点")
        if problems:
            warnings.warn(f"数值配置存在问题: {'; '.join(problems)}")
            return False
        return True

    def snapshot(self) -> Dict[str, Any]:
        """返回可写入来源头信息的配置快照"""
        return {
            "mesh": dict(self.mesh_config),
            "fem": {**self.fem_config, "anchors": [str(a) for a in self.fem_config["anchors"]]},
            "continued_fraction": dict(self.continued_fraction),
            "scattering": dict(self.scattering_config),
            "resonances": dict(self.resonance_config),
            "workers": self.workers,
        }

    # 像字典一样安全地获取配置
    def get(self, key: str, default: Any = None) -> Any:
        """安全地获取配置项"""
        return getattr(self, key, default)

# 创建一个全局的配置实例供其他模块使用
SETTINGS = Settings()
