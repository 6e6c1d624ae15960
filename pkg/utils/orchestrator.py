#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
编排器组件，负责按任务类型串联各流水线阶段，记录交互日志，
并把阶段失败转换为带阶段归属的 StageError
"""

import json
import shutil
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from config.job import JobConfig
from config.settings import SETTINGS
from numerics.errors import StageError
from stages.base_stage import BaseStage
from stages.eigen_stage import EigenStage
from stages.mesh_stage import MeshStage
from stages.oracle_stage import OracleStage
from stages.resonance_stage import ResonanceStage
from stages.scatter_stage import ScatterStage
from stages.spectral_stage import SpectralStage
from stages.surface_stage import SurfaceStage
from utils.artifact_cache import ArtifactCache
from utils.export import provenance

SPECTRAL_PIPELINE = ["surface", "mesh", "spectral"]

# 每种任务依次运行的阶段
TASK_PIPELINES: Dict[str, List[str]] = {
    "spectral-data": SPECTRAL_PIPELINE,
    "scatter-eval": SPECTRAL_PIPELINE + ["scatter"],
    "resonance-scan": SPECTRAL_PIPELINE + ["resonances"],
    "resonance-find": SPECTRAL_PIPELINE + ["resonances"],
    "resonance-count": SPECTRAL_PIPELINE + ["resonances"],
    "resonance-track": ["resonances"],
    "embedded-scan": SPECTRAL_PIPELINE + ["eigen"],
    "odd-spectrum": ["surface", "mesh", "eigen"],
    "closed-form-compare": SPECTRAL_PIPELINE + ["oracle"],
}

STATUS_DESCRIPTIONS = {
    "success": "成功",
    "error": "出现错误",
}

STAGE_DESCRIPTIONS = {
    "surface": "构造曲面并校验粘合",
    "mesh": "生成三角网格",
    "spectral": "计算 Neumann 谱数据与锚点",
    "scatter": "计算散射矩阵",
    "resonances": "求解共振",
    "eigen": "扫描特征值",
    "oracle": "与闭式结果对照",
}


class Orchestrator:
    """编排器，负责一次作业的阶段调度"""

    def __init__(self, cache: Optional[ArtifactCache] = None, log_dir: Optional[Path] = None):
        self.cache = cache
        self.log_dir = Path(log_dir) if log_dir is not None else Path(SETTINGS.log_dir)
        self.stages: Dict[str, BaseStage] = {
            "surface": SurfaceStage(cache),
            "mesh": MeshStage(cache),
            "spectral": SpectralStage(cache),
            "scatter": ScatterStage(cache),
            "resonances": ResonanceStage(cache),
            "eigen": EigenStage(cache),
            "oracle": OracleStage(cache),
        }
        self.run_id = ""
        self.interaction_log: List[Dict[str, Any]] = []
        logger.info("编排器初始化完成")

    @property
    def log_path(self) -> Path:
        return self.log_dir / f"interaction_log_{self.run_id}.json"

    def _log_interaction_event(self, source: str, target: str, action: str, details: Dict[str, Any]) -> None:
        """记录交互事件并立即写回本次运行的日志文件"""
        event = {
            "timestamp": datetime.now(timezone.utc).strftime("%H:%M:%S.%f")[:-3] + "Z",
            "source": source,
            "target": target,
            "action": action,
            "details": details,
            "human_readable": self._generate_human_readable_description(source, target, action, details),
        }
        self.interaction_log.append(event)
        logger.debug(f"Event Logged [{self.run_id}]: {source} -> {target} ({action})")
        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text(json.dumps(self.interaction_log, ensure_ascii=False, indent=2, default=str),
                                     encoding="utf-8")
        except OSError as e:
            logger.error(f"保存交互日志到文件时出错: {e}")

    def _generate_human_readable_description(self, source: str, target: str, action: str,
                                             details: Dict[str, Any]) -> str:
        if source == "Orchestrator":
            description = f"系统请求{target}阶段{STAGE_DESCRIPTIONS.get(target, '')}"
        elif target == "Orchestrator":
            status = details.get("status", "")
            description = f"{source}阶段{STATUS_DESCRIPTIONS.get(status, status)}"
        else:
            description = f"{source} -> {target}: {action}"
        if "message" in details:
            description += f"（{details['message']}）"
        return description

    def _cleanup(self, context: Dict[str, Any]) -> None:
        """删除失败运行中已写出的部分产物"""
        for path in context.get("outputs", []):
            path = Path(path)
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            elif path.exists():
                path.unlink()
            logger.debug(f"已删除部分产物 {path}")

    def run_job(self, job: JobConfig, run_id: Optional[str] = None) -> Dict[str, Any]:
        """
        依次运行任务对应的阶段。

        Raises:
            StageError: 任一阶段返回错误状态（已写出的产物会被删除）。
        """
        self.run_id = run_id or f"run_{uuid.uuid4()}"
        self.interaction_log = []
        config_hash = job.config_hash()
        context: Dict[str, Any] = {
            "job": job,
            "header": provenance(config_hash, {"run_id": self.run_id, "task": job.task}),
            "outputs": [],
        }
        logger.info(f"开始作业 {self.run_id}: 任务 {job.task}，配置哈希 {config_hash[:12]}")
        self._log_interaction_event("User", "Orchestrator", "提交作业", {"task": job.task, "config_hash": config_hash})

        results: Dict[str, Dict[str, Any]] = {}
        for role in TASK_PIPELINES[job.task]:
            stage = self.stages[role]
            self._log_interaction_event("Orchestrator", role, "触发", {"keys": sorted(k for k in context if context[k] is not None)})
            result = stage.run(context)
            results[role] = result
            details = {"status": result["status"], "elapsed_s": result.get("elapsed_s")}
            if result["status"] != "success":
                details["message"] = result.get("message", "")
            self._log_interaction_event(role, "Orchestrator", "收到响应", details)
            if result["status"] != "success":
                self._cleanup(context)
                raise StageError(role, result.get("message", "未知错误"))

        outputs = [str(p) for p in context.get("outputs", [])]
        self._log_interaction_event("Orchestrator", "User", "作业完成", {"outputs": outputs})
        logger.info(f"作业 {self.run_id} 完成，输出 {len(outputs)} 个文件")
        return {"status": "success", "run_id": self.run_id, "config_hash": config_hash, "stages": results,
                "outputs": outputs, "context": context}
