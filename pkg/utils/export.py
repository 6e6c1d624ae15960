#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
结果输出：带来源头信息的 CSV / JSON，以及共振分布与轨迹的 SVG 图。
"""

import csv
import json
import os
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402

TRACKED_PACKAGES = ("numpy", "scipy", "scikit-fem", "meshpy", "sympy", "pydantic", "joblib")

# 共振着色：近谱蓝、Re s = 1/4 红、Re s = 0 绿、其余黑
CLASS_COLOURS = {
    "near-spectrum": "tab:blue",
    "critical-line": "tab:red",
    "imaginary-axis": "tab:green",
    "generic": "black",
}


def library_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "未安装"
    return versions


def provenance(config_hash: Optional[str] = None, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    header = {
        "config_hash": config_hash or "",
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "versions": library_versions(),
    }
    if extra:
        header.update(extra)
    return header


def format_csv_value(value: Any) -> str:
    """数值保留 6 位有效数字"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    if isinstance(value, (complex, np.complexfloating)):
        return f"{complex(value).real:.6g}{complex(value).imag:+.6g}j"
    return str(value)


def write_csv(path, rows: Iterable[Dict[str, Any]], columns: Sequence[str],
              header: Optional[Dict[str, Any]] = None) -> Path:
    """来源头信息写成 '# key: value' 注释行，其后是普通 CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        for key, value in (header or {}).items():
            f.write(f"# {key}: {json.dumps(value, ensure_ascii=False) if isinstance(value, dict) else value}\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({col: format_csv_value(row.get(col)) for col in columns})
    os.replace(tmp, path)
    logger.info(f"已写出 CSV: {path}")
    return path


def _jsonable(value: Any) -> Any:
    """复数写成 [实部, 虚部]；浮点用 repr，即 17 位有效数字内的最短精确表示"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(complex(value).real), float(complex(value).imag)]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_json(path, payload: Any, header: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"provenance": header or {}, "data": _jsonable(payload)}
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(json.dumps(document, indent=2, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)
    logger.info(f"已写出 JSON: {path}")
    return path


def plot_resonances(path, records: Sequence, title: str = "") -> Path:
    """共振散点图，横轴 Re s，纵轴 Im s，按分类着色"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 7))
    for cls, colour in CLASS_COLOURS.items():
        points = [r.s for r in records if r.classification == cls]
        if points:
            ax.scatter([z.real for z in points], [z.imag for z in points], s=14, color=colour, label=cls)
    ax.axvline(0.5, color="tab:blue", lw=0.6, ls="--")
    ax.axvline(0.25, color="tab:red", lw=0.4, ls=":")
    ax.set_xlabel("Re s")
    ax.set_ylabel("Im s")
    if title:
        ax.set_title(title)
    if records:
        ax.legend(loc="upper left", fontsize=7)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info(f"已写出 SVG: {path}")
    return path


def plot_trajectories(directory, trajectories: Sequence, prefix: str = "frame") -> List[Path]:
    """每个参数值一帧，帧内显示到该参数为止的各轨迹，文件名按序号编号"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    parameters = sorted({p for traj in trajectories for p in traj.parameters})
    paths = []
    for index, parameter in enumerate(parameters):
        fig, ax = plt.subplots(figsize=(5, 7))
        for traj in trajectories:
            shown = [r for p, r in zip(traj.parameters, traj.records) if p <= parameter]
            if not shown:
                continue
            ax.plot([r.s.real for r in shown], [r.s.imag for r in shown], color="0.7", lw=0.8)
            last = shown[-1]
            ax.scatter([last.s.real], [last.s.imag], s=14, color=CLASS_COLOURS.get(last.classification, "black"))
        ax.axvline(0.5, color="tab:blue", lw=0.6, ls="--")
        ax.set_xlabel("Re s")
        ax.set_ylabel("Im s")
        ax.set_title(f"parameter = {parameter:.6g}")
        path = directory / f"{prefix}_{index:04d}.svg"
        fig.savefig(path, format="svg", bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    logger.info(f"已写出 {len(paths)} 帧轨迹图到 {directory}")
    return paths


def plot_sigma_scan(path, t: np.ndarray, sigma: np.ndarray, candidates: Sequence = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(t, sigma, lw=0.8, color="black")
    for cand in candidates:
        ax.axvline(cand.t, color="tab:red", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("σ_min(P Q)")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info(f"已写出 SVG: {path}")
    return path
