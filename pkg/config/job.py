#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
作业配置：一个 JSON 文件描述曲面、网格、有限元参数、任务和输出位置。
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_serializer, field_validator, model_validator

from config.settings import SETTINGS

TaskName = Literal[
    "spectral-data",
    "scatter-eval",
    "resonance-scan",
    "resonance-find",
    "resonance-track",
    "resonance-count",
    "embedded-scan",
    "odd-spectrum",
    "closed-form-compare",
]

# 每个任务必须提供的任务块
TASK_BLOCKS: Dict[str, Optional[str]] = {
    "spectral-data": None,
    "scatter-eval": "scatter",
    "resonance-scan": "scan",
    "resonance-find": "find",
    "resonance-track": "track",
    "resonance-count": "count",
    "embedded-scan": "embedded",
    "odd-spectrum": "odd",
    "closed-form-compare": "compare",
}


def to_complex(value: Any) -> complex:
    """接受 "0.5+6j"、[实部, 虚部] 或实数"""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        return complex(value.strip().replace(" ", "").replace("i", "j"))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"无法解析复数: {value!r}")


def complex_to_text(value: complex) -> str:
    return repr(complex(value)).strip("()")


class SurfaceRef(BaseModel):
    """预设名、族+参数，或 SurfaceSpec JSON 文件路径，三选一"""

    name: Optional[str] = None
    family: Optional[Literal["A", "B", "C", "D"]] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    reduction: Literal["none", "even", "odd"] = "none"
    spec_path: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "SurfaceRef":
        sources = [self.name is not None, self.family is not None, self.spec_path is not None]
        if sum(sources) != 1:
            raise ValueError("surface 必须且只能指定 name、family 或 spec_path 之一")
        return self


class MeshParams(BaseModel):
    h: float = Field(default_factory=lambda: SETTINGS.mesh_config["h"], gt=0)
    n_boundary: int = Field(default_factory=lambda: SETTINGS.mesh_config["n_boundary"], ge=8)
    refinements: int = Field(default_factory=lambda: SETTINGS.mesh_config["refinements"], ge=0)


class FemParams(BaseModel):
    order: Literal[1, 2] = Field(default_factory=lambda: SETTINGS.fem_config["element_order"])
    n_eigenpairs: int = Field(default_factory=lambda: SETTINGS.fem_config["n_eigenpairs"], ge=1)
    J: int = Field(default_factory=lambda: SETTINGS.fem_config["truncation_j"], ge=0)
    anchors: List[Any] = Field(default_factory=lambda: list(SETTINGS.fem_config["anchors"]))

    @field_validator("anchors")
    @classmethod
    def _parse_anchors(cls, value: List[Any]) -> List[complex]:
        return [to_complex(v) for v in value]

    @field_serializer("anchors")
    def _dump_anchors(self, value: List[complex]) -> List[str]:
        return [complex_to_text(v) for v in value]


class ScatterTask(BaseModel):
    s_values: List[Any] = Field(default_factory=list)
    t_values: List[float] = Field(default_factory=list)
    strict: bool = False
    error_bound: bool = False

    @field_validator("s_values")
    @classmethod
    def _parse_s(cls, value: List[Any]) -> List[complex]:
        return [to_complex(v) for v in value]

    @field_serializer("s_values")
    def _dump_s(self, value: List[complex]) -> List[str]:
        return [complex_to_text(v) for v in value]

    @model_validator(mode="after")
    def _non_empty(self) -> "ScatterTask":
        if not self.s_values and not self.t_values:
            raise ValueError("scatter 任务需要 s_values 或 t_values")
        return self


class ScanTask(BaseModel):
    window: List[float] = Field(default_factory=lambda: [-0.2, 0.45, 0.5, 20.0], min_length=4, max_length=4)
    spacing: float = Field(default_factory=lambda: SETTINGS.resonance_config["seed_spacing"], gt=0)


class FindTask(BaseModel):
    seeds: List[Any]
    deflate: bool = True

    @field_validator("seeds")
    @classmethod
    def _parse_seeds(cls, value: List[Any]) -> List[complex]:
        if not value:
            raise ValueError("至少需要一个种子")
        return [to_complex(v) for v in value]

    @field_serializer("seeds")
    def _dump_seeds(self, value: List[complex]) -> List[str]:
        return [complex_to_text(v) for v in value]


class TrackTask(FindTask):
    parameter: str
    grid: List[float] = Field(min_length=2)
    predictor_order: int = Field(default=3, ge=0, le=3)
    max_step: float = Field(default=0.1, gt=0)
    frames: bool = False


class CountTask(BaseModel):
    rectangle: List[float] = Field(min_length=4, max_length=4)
    n_points: int = Field(default=400, ge=16)


class EmbeddedTask(BaseModel):
    t_min: float = Field(ge=0)
    t_max: float
    t_step: float = Field(gt=0)
    threshold: float = Field(default_factory=lambda: SETTINGS.resonance_config["embedded_threshold"], gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "EmbeddedTask":
        if self.t_max <= self.t_min:
            raise ValueError("t_max 必须大于 t_min")
        return self


class OddTask(BaseModel):
    n: int = Field(default=10, ge=1)


class CompareTask(BaseModel):
    s_values: List[Any] = Field(default_factory=list)
    t_values: List[float] = Field(default_factory=list)
    threshold: float = Field(default=1e-3, gt=0)

    @field_validator("s_values")
    @classmethod
    def _parse_s(cls, value: List[Any]) -> List[complex]:
        return [to_complex(v) for v in value]

    @field_serializer("s_values")
    def _dump_s(self, value: List[complex]) -> List[str]:
        return [complex_to_text(v) for v in value]


class OutputParams(BaseModel):
    directory: str = Field(default_factory=lambda: str(SETTINGS.output_dir))
    prefix: str = "job"
    plot: bool = True


class JobConfig(BaseModel):
    """一次运行的完整描述"""

    surface: SurfaceRef
    mesh: MeshParams = Field(default_factory=MeshParams)
    fem: FemParams = Field(default_factory=FemParams)
    task: TaskName
    scatter: Optional[ScatterTask] = None
    scan: Optional[ScanTask] = None
    find: Optional[FindTask] = None
    track: Optional[TrackTask] = None
    count: Optional[CountTask] = None
    embedded: Optional[EmbeddedTask] = None
    odd: Optional[OddTask] = None
    compare: Optional[CompareTask] = None
    output: OutputParams = Field(default_factory=OutputParams)

    @model_validator(mode="after")
    def _check_task_and_resolution(self) -> "JobConfig":
        block = TASK_BLOCKS[self.task]
        if block == "scan" and self.scan is None:
            self.scan = ScanTask()
        elif block == "odd" and self.odd is None:
            self.odd = OddTask()
        elif block is not None and getattr(self, block) is None:
            raise ValueError(f"任务 {self.task} 需要 '{block}' 配置块")
        if 4 * self.fem.J > self.mesh.n_boundary:
            raise ValueError(f"J = {self.fem.J} 超过 n_boundary/4 = {self.mesh.n_boundary / 4:g}")
        if self.task == "resonance-track" and self.surface.family is None:
            raise ValueError("参数跟踪需要以 family + parameters 指定曲面")
        if self.task == "odd-spectrum" and self.surface.name is None and self.surface.reduction != "odd":
            raise ValueError("odd-spectrum 任务需要奇约化的曲面")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_job(path) -> JobConfig:
    """读取并校验作业文件（pydantic ValidationError 原样抛出）"""
    text = Path(path).read_text(encoding="utf-8")
    return JobConfig.model_validate_json(text)
