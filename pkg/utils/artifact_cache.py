#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
产物缓存，负责按上游描述的内容哈希存储、检索网格与谱数据
"""

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from loguru import logger

from config.settings import SETTINGS

INDEX_NAME = "index.json"


def content_hash(description: Dict[str, Any]) -> str:
    """规范 JSON（键排序、紧凑分隔符）的 SHA-256"""
    canonical = json.dumps(description, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ArtifactCache:
    """以 <kind>/<hash><suffix> 组织的文件缓存，index.json 记录每个条目的描述"""

    def __init__(self, root: Optional[Path] = None, enabled: bool = True):
        self.root = Path(root) if root is not None else Path(SETTINGS.cache_dir)
        self.enabled = enabled
        self.root.mkdir(parents=True, exist_ok=True)
        self._index = self._load_index()
        logger.info(f"产物缓存初始化完成。目录: {self.root}，{'启用' if enabled else '禁用'}")

    def _now_utc(self) -> str:
        return datetime.now(timezone.utc).isoformat()

    def _load_index(self) -> Dict[str, Any]:
        path = self.root / INDEX_NAME
        if path.exists():
            try:
                return json.loads(path.read_text(encoding="utf-8"))
            except (json.JSONDecodeError, OSError) as e:
                logger.error(f"加载缓存索引 '{path}' 失败: {e}，将使用空索引。")
        return {}

    def _save_index(self) -> None:
        path = self.root / INDEX_NAME
        try:
            self._atomic_write(path, lambda tmp: tmp.write_text(json.dumps(self._index, indent=2, ensure_ascii=False),
                                                                encoding="utf-8"))
        except OSError as e:
            logger.error(f"保存缓存索引 '{path}' 失败: {e}")

    def _atomic_write(self, target: Path, writer: Callable[[Path], Any]) -> Path:
        """先写入同目录的临时文件，成功后 os.replace；失败时不留下半成品"""
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=".tmp-", suffix=target.suffix)
        os.close(fd)
        tmp = Path(tmp_name)
        try:
            written = writer(tmp)
            # np.savez 等写入器可能自行追加后缀
            produced = Path(written) if isinstance(written, (str, Path)) and Path(written).exists() else tmp
            os.replace(produced, target)
            if produced != tmp and tmp.exists():
                tmp.unlink()
        except BaseException:
            if tmp.exists():
                tmp.unlink()
            raise
        return target

    def path_for(self, kind: str, key: str, suffix: str) -> Path:
        return self.root / kind / f"{key}{suffix}"

    def fetch(self, kind: str, description: Dict[str, Any], loader: Callable[[Path], Any],
              suffix: str = ".npz") -> Optional[Any]:
        """命中时返回 loader(path)，否则返回 None；损坏的条目会被删除"""
        if not self.enabled:
            return None
        key = content_hash(description)
        path = self.path_for(kind, key, suffix)
        if not path.exists():
            return None
        try:
            value = loader(path)
        except Exception as e:
            logger.warning(f"缓存条目 {kind}/{key[:12]} 无法读取 ({e})，已删除")
            path.unlink(missing_ok=True)
            self._index.pop(f"{kind}/{key}", None)
            self._save_index()
            return None
        logger.info(f"缓存命中: {kind}/{key[:12]}")
        return value

    def store(self, kind: str, description: Dict[str, Any], writer: Callable[[Path], Any],
              suffix: str = ".npz") -> Optional[Path]:
        if not self.enabled:
            return None
        key = content_hash(description)
        path = self._atomic_write(self.path_for(kind, key, suffix), writer)
        self._index[f"{kind}/{key}"] = {"description": description, "created_utc": self._now_utc()}
        self._save_index()
        logger.debug(f"已缓存 {kind}/{key[:12]} -> {path}")
        return path

    def get_or_compute(self, kind: str, description: Dict[str, Any], compute: Callable[[], Any],
                       writer: Callable[[Any, Path], Any], loader: Callable[[Path], Any],
                       suffix: str = ".npz") -> Any:
        cached = self.fetch(kind, description, loader, suffix)
        if cached is not None:
            return cached
        value = compute()
        self.store(kind, description, lambda tmp: writer(value, tmp), suffix)
        return value

    def entries(self) -> Dict[str, Any]:
        return dict(self._index)

    def clear(self, kind: Optional[str] = None) -> int:
        removed = 0
        for entry in list(self._index):
            if kind is None or entry.startswith(f"{kind}/"):
                entry_kind, key = entry.split("/", 1)
                for path in (self.root / entry_kind).glob(f"{key}*"):
                    path.unlink(missing_ok=True)
                self._index.pop(entry)
                removed += 1
        self._save_index()
        logger.info(f"清理缓存条目 {removed} 个")
        return removed
