#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
流水线阶段的基类，所有具体阶段（曲面、网格、谱数据、散射、共振……）都继承它
"""

import time
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from numerics.errors import CuspScatterError
from utils.artifact_cache import ArtifactCache


class BaseStage:
    """阶段基类：统一的运行入口、状态字典与运行记录"""

    def __init__(self, name: str, role: str, cache: Optional[ArtifactCache] = None):
        """
        Args:
            name: 阶段显示名。
            role: 阶段角色（例如 "surface"、"spectral"），用于错误归属。
            cache: 产物缓存；为 None 时不缓存。

        Raises:
            ValueError: role 为空。
        """
        self.id = str(uuid.uuid4())
        self.name = name
        if not role:
            raise ValueError("阶段角色不能为空")
        self.role = role
        self.cache = cache
        self._history: List[Dict[str, Any]] = []
        logger.debug(f"初始化 {self.role} 阶段: {name} (ID: {self.id})")

    def _now_utc_iso(self) -> str:
        return datetime.now(timezone.utc).isoformat()

    def run(self, context: Dict[str, Any]) -> Dict[str, Any]:
        """
        执行阶段。阶段从不向编排器抛出异常：成功时返回
        {"status": "success", ...}，失败时返回 {"status": "error", "message", "error_type"}。
        产物写回 context。
        """
        self._record("received", {"keys": sorted(context)})
        started = time.perf_counter()
        try:
            result = self._process(context)
            if not isinstance(result, dict):
                raise TypeError(f"{self.__class__.__name__}._process 必须返回字典")
            result.setdefault("status", "success")
        except NotImplementedError:
            logger.error(f"子类 {self.__class__.__name__} 未实现 _process 方法！")
            result = {"status": "error", "message": "阶段未实现", "error_type": "NotImplementedError"}
        except CuspScatterError as e:
            logger.error(f"{self.role} 阶段失败: {e}")
            result = {"status": "error", "message": str(e), "error_type": type(e).__name__}
        except (ValueError, OSError) as e:
            logger.error(f"{self.role} 阶段输入或文件错误: {e}")
            result = {"status": "error", "message": str(e), "error_type": type(e).__name__}
        except Exception as e:
            logger.exception(f"{self.role} 阶段发生未预期错误: {e}")
            result = {"status": "error", "message": f"内部错误: {e}", "error_type": type(e).__name__}

        result["stage"] = self.role
        result["elapsed_s"] = round(time.perf_counter() - started, 3)
        self._record("sent", {k: v for k, v in result.items() if k in ("status", "message", "outputs", "summary")})
        if result["status"] == "success":
            logger.info(f"{self.name} 完成，用时 {result['elapsed_s']} s")
        return result

    def _process(self, context: Dict[str, Any]) -> Dict[str, Any]:
        """具体处理逻辑，子类必须重写"""
        raise NotImplementedError(f"子类 {self.__class__.__name__} 必须实现 _process 方法")

    def _record(self, direction: str, payload: Dict[str, Any]) -> None:
        self._history.append({"timestamp_utc": self._now_utc_iso(), "direction": direction, "payload": payload})

    def history(self) -> List[Dict[str, Any]]:
        return list(self._history)

    @staticmethod
    def _require(context: Dict[str, Any], *keys: str) -> None:
        missing = [k for k in keys if context.get(k) is None]
        if missing:
            raise ValueError(f"上游产物缺失: {', '.join(missing)}")


def output_path(context: Dict[str, Any], suffix: str) -> Path:
    """<输出目录>/<前缀>_<suffix>，并登记到 context["outputs"] 以便失败时清理"""
    output = context["job"].output
    path = Path(output.directory) / f"{output.prefix}_{suffix}"
    path.parent.mkdir(parents=True, exist_ok=True)
    context.setdefault("outputs", []).append(path)
    return path
