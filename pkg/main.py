#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
尖点双曲曲面散射计算的命令行入口
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger
from pydantic import ValidationError

from config.job import JobConfig, SurfaceRef, load_job, to_complex
from config.settings import SETTINGS
from numerics.errors import CuspScatterError, GeometryError, StageError
from numerics.geometry import spec_to_json
from numerics.mesh import build_mesh
from numerics.specialfn import ClosedFormEvaluator
from stages.surface_stage import resolve_surface
from utils.artifact_cache import ArtifactCache
from utils.export import provenance, write_csv
from utils.orchestrator import Orchestrator

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_INPUT = 2


def configure_logging(debug: bool = False) -> None:
    """stderr 按配置级别输出，文件 sink 记录全部 DEBUG 信息并轮转"""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if debug else SETTINGS.log_level,
               format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}")
    logger.add(SETTINGS.core_log_file, level="DEBUG", rotation="10 MB", retention=5, encoding="utf-8")


def _parse_params(items: Optional[List[str]]) -> Dict[str, Any]:
    params: Dict[str, Any] = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"参数格式应为 key=value: {item}")
        key, value = item.split("=", 1)
        try:
            params[key] = float(value)
        except ValueError:
            params[key] = value
    return params


def _parse_grid(text: str) -> List[float]:
    """start:stop:count 或逗号分隔的值"""
    if ":" in text:
        start, stop, count = text.split(":")
        count = int(count)
        if count < 2:
            raise ValueError("网格至少需要两个点")
        step = (float(stop) - float(start)) / (count - 1)
        return [float(start) + i * step for i in range(count)]
    return [float(v) for v in text.split(",") if v]


def _surface_ref(args) -> Dict[str, Any]:
    if args.spec:
        return {"spec_path": args.spec}
    if args.family:
        return {"family": args.family, "parameters": _parse_params(args.param), "reduction": args.reduction}
    if args.surface:
        return {"name": args.surface}
    raise ValueError("请用 --surface、--family 或 --spec 指定曲面")


def _job_from_args(args, task: str, blocks: Dict[str, Any]) -> JobConfig:
    fem: Dict[str, Any] = {}
    for key, attr in (("order", "order"), ("n_eigenpairs", "n_eigenpairs"), ("J", "J")):
        if getattr(args, attr, None) is not None:
            fem[key] = getattr(args, attr)
    if getattr(args, "anchor", None):
        fem["anchors"] = args.anchor
    mesh = {key: getattr(args, key) for key in ("h", "n_boundary", "refinements") if getattr(args, key, None) is not None}
    payload = {
        "surface": _surface_ref(args),
        "mesh": mesh,
        "fem": fem,
        "task": task,
        "output": {"directory": args.output_dir, "prefix": args.prefix, "plot": not args.no_plot},
        **blocks,
    }
    return JobConfig.model_validate(payload)


def _add_surface_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("曲面")
    group.add_argument("--surface", help="预设名，例如 A0、B_sqrt2、C_gutzwiller、D")
    group.add_argument("--family", choices=["A", "B", "C", "D"], help="曲面族")
    group.add_argument("--param", action="append", help="族参数 key=value，可重复")
    group.add_argument("--reduction", default="none", choices=["none", "even", "odd"])
    group.add_argument("--spec", help="SurfaceSpec JSON 文件")


def _add_pipeline_args(parser: argparse.ArgumentParser) -> None:
    _add_surface_args(parser)
    group = parser.add_argument_group("离散化")
    group.add_argument("--h", type=float, help="双曲目标边长")
    group.add_argument("--n-boundary", dest="n_boundary", type=int)
    group.add_argument("--refinements", type=int)
    group.add_argument("--order", type=int, choices=[1, 2])
    group.add_argument("--n-eigenpairs", dest="n_eigenpairs", type=int)
    group.add_argument("--J", dest="J", type=int)
    group.add_argument("--anchor", action="append", help="锚点 s₀，例如 0.5+6j，可重复")
    out = parser.add_argument_group("输出")
    out.add_argument("--output-dir", default=str(SETTINGS.output_dir))
    out.add_argument("--prefix", default="run")
    out.add_argument("--no-plot", action="store_true")
    out.add_argument("--no-cache", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="尖点双曲曲面的散射矩阵、共振与嵌入特征值计算")
    parser.add_argument("--debug", action="store_true", help="启用调试输出")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface", help="写出曲面描述 JSON")
    _add_surface_args(p)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("mesh", help="生成并保存网格")
    _add_surface_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--n-boundary", dest="n_boundary", type=int)
    p.add_argument("--refinements", type=int)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("fem", help="计算并保存边界谱数据与锚点")
    _add_pipeline_args(p)

    p = sub.add_parser("scatter", help="计算 C̃(s)")
    _add_pipeline_args(p)
    p.add_argument("--s", action="append", default=[], help="复数 s，可重复")
    p.add_argument("--t", action="append", type=float, default=[], help="临界线上的 t，可重复")
    p.add_argument("--strict", action="store_true", help="核谱隙不足时报错")
    p.add_argument("--error-bound", action="store_true", help="同时输出误差界")

    res = sub.add_parser("resonances", help="共振").add_subparsers(dest="action", required=True)
    p = res.add_parser("find", help="从种子出发求根")
    _add_pipeline_args(p)
    p.add_argument("--seed", action="append", required=True)
    p.add_argument("--no-deflate", action="store_true")
    p = res.add_parser("scan", help="网格扫描 + 收缩求根")
    _add_pipeline_args(p)
    p.add_argument("--window", nargs=4, type=float, default=[-0.2, 0.45, 0.5, 20.0],
                   metavar=("RE_LO", "RE_HI", "IM_LO", "IM_HI"))
    p.add_argument("--spacing", type=float, default=SETTINGS.resonance_config["seed_spacing"])
    p = res.add_parser("count", help="辐角原理计数")
    _add_pipeline_args(p)
    p.add_argument("--rect", nargs=4, type=float, required=True, metavar=("RE_LO", "RE_HI", "IM_LO", "IM_HI"))
    p.add_argument("--n-points", dest="n_points", type=int, default=400)
    p = res.add_parser("track", help="沿族参数跟踪")
    _add_pipeline_args(p)
    p.add_argument("--track-param", required=True, help="被跟踪的族参数名，例如 r、length、twist")
    p.add_argument("--grid", required=True, help="start:stop:count 或逗号分隔的值")
    p.add_argument("--seed", action="append", required=True)
    p.add_argument("--predictor-order", type=int, default=3)
    p.add_argument("--max-step", type=float, default=0.1)
    p.add_argument("--frames", action="store_true", help="输出编号的轨迹帧 SVG")

    eigs = sub.add_parser("eigs", help="特征值").add_subparsers(dest="action", required=True)
    p = eigs.add_parser("scan", help="临界线嵌入特征值扫描")
    _add_pipeline_args(p)
    p.add_argument("--t-min", type=float, required=True)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--t-step", type=float, default=0.01)
    p.add_argument("--threshold", type=float, default=SETTINGS.resonance_config["embedded_threshold"])
    p = eigs.add_parser("odd", help="奇子空间 Dirichlet 谱")
    _add_pipeline_args(p)
    p.add_argument("--n", type=int, default=10)

    oracle = sub.add_parser("oracle", help="闭式对照").add_subparsers(dest="action", required=True)
    p = oracle.add_parser("compare", help="有限元 C̃(s) 与闭式 C(s) 比较；给出 --case 时只输出闭式值")
    _add_pipeline_args(p)
    p.add_argument("--case", help="闭式情形，例如 A0、B_sqrt2、D_gamma04")
    p.add_argument("--s", action="append", default=[])
    p.add_argument("--t", action="append", type=float, default=[])
    p.add_argument("--threshold", type=float, default=1e-3, help="相对误差阈值")

    p = sub.add_parser("run", help="运行 JSON 作业文件")
    p.add_argument("job")
    p.add_argument("--no-cache", action="store_true")
    return parser


def _run(job: JobConfig, no_cache: bool) -> int:
    orchestrator = Orchestrator(cache=ArtifactCache(enabled=not no_cache))
    result = orchestrator.run_job(job)
    summary = {role: r.get("summary") for role, r in result["stages"].items()}
    print(json.dumps({"run_id": result["run_id"], "outputs": result["outputs"], "summary": summary},
                     ensure_ascii=False, indent=2, default=str))
    return EXIT_OK


def _closed_form_only(args) -> int:
    evaluator = ClosedFormEvaluator(args.case)
    points = [to_complex(v) for v in args.s] + [complex(0.5, t) for t in args.t]
    rows = []
    for s in points:
        C = evaluator.matrix(s)
        for i, j in np.ndindex(*C.shape):
            value = complex(C[i, j])
            rows.append({"re_s": s.real, "im_s": s.imag, "row": i, "col": j, "re_C": value.real, "im_C": value.imag})
    path = Path(args.output_dir) / f"{args.prefix}_closed_form.csv"
    write_csv(path, rows, ["re_s", "im_s", "row", "col", "re_C", "im_C"], provenance(extra={"case": args.case}))
    print(str(path))
    return EXIT_OK


def dispatch(args) -> int:
    if args.command == "surface":
        spec = resolve_surface(SurfaceRef(**_surface_ref(args)))
        Path(args.out).write_text(spec_to_json(spec), encoding="utf-8")
        logger.info(f"曲面描述已写出: {args.out}")
        return EXIT_OK
    if args.command == "mesh":
        spec = resolve_surface(SurfaceRef(**_surface_ref(args)))
        mesh = build_mesh(spec, h=args.h, n_boundary=args.n_boundary, refinements=args.refinements)
        mesh.save(args.out)
        logger.info(f"网格已写出: {args.out} ({mesh.n_vertices} 个顶点)")
        return EXIT_OK
    if args.command == "run":
        return _run(load_job(args.job), args.no_cache)

    if args.command == "fem":
        job = _job_from_args(args, "spectral-data", {})
    elif args.command == "scatter":
        job = _job_from_args(args, "scatter-eval", {"scatter": {"s_values": args.s, "t_values": args.t,
                                                                 "strict": args.strict,
                                                                 "error_bound": args.error_bound}})
    elif args.command == "resonances":
        if args.action == "find":
            job = _job_from_args(args, "resonance-find", {"find": {"seeds": args.seed, "deflate": not args.no_deflate}})
        elif args.action == "scan":
            job = _job_from_args(args, "resonance-scan", {"scan": {"window": args.window, "spacing": args.spacing}})
        elif args.action == "count":
            job = _job_from_args(args, "resonance-count", {"count": {"rectangle": args.rect, "n_points": args.n_points}})
        else:
            job = _job_from_args(args, "resonance-track", {"track": {
                "seeds": args.seed, "parameter": args.track_param, "grid": _parse_grid(args.grid),
                "predictor_order": args.predictor_order, "max_step": args.max_step, "frames": args.frames}})
    elif args.command == "eigs":
        if args.action == "scan":
            job = _job_from_args(args, "embedded-scan", {"embedded": {
                "t_min": args.t_min, "t_max": args.t_max, "t_step": args.t_step, "threshold": args.threshold}})
        else:
            job = _job_from_args(args, "odd-spectrum", {"odd": {"n": args.n}})
    else:
        if args.case:
            return _closed_form_only(args)
        compare = {"s_values": args.s, "t_values": args.t, "threshold": args.threshold}
        job = _job_from_args(args, "closed-form-compare", {"compare": compare})
    return _run(job, args.no_cache)


def main(argv: Optional[List[str]] = None) -> int:
    """程序入口函数"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.debug)
    SETTINGS.validate_numerics()
    try:
        return dispatch(args)
    except (ValidationError, ValueError, GeometryError) as e:
        logger.error(f"输入无效: {e}")
        return EXIT_BAD_INPUT
    except StageError as e:
        logger.error(f"作业失败 {e}")
        return EXIT_FAILURE
    except CuspScatterError as e:
        logger.error(f"计算失败: {type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
