"""Benchmark harness: per-scene reconstruction and PSNR/SSIM reporting."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from sci_pnp.config import RunConfig, get_settings
from sci_pnp.core.operators import encode
from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.errors import (
    DigestMismatchError,
    EmptyDatasetError,
    MissingFileError,
    ShapeMismatchError,
)
from sci_pnp.io.synthetic import make_masks
from sci_pnp.io.tensors import (
    load_cube,
    load_masks,
    load_measurements,
    masks_official,
    read_sidecar,
    tensor_paths,
)

from .manager import ReportManager, evaluate_cube
from .models import EvalReport

logger = logging.getLogger(__name__)

MEASUREMENT_SUFFIX = "_meas"


@dataclass
class SceneData:
    name: str
    cube: VideoCube
    measurements: list[Measurement] | None = None


@dataclass
class BenchmarkDataset:
    scenes: list[SceneData]
    masks: MaskStack
    official: bool


def load_dataset(dataset_dir: str | Path, B: int = 8, seed: int = 0) -> BenchmarkDataset:
    """
    读取 benchmark 目录

    目录内按 sidecar 的 kind 分类：cube 为场景真值（场景名取文件名），
    mask 为共享掩模（sidecar official 标志决定是否官方），
    measurement 通过 sidecar 的 scene 字段（或 <scene>_meas 文件名）关联场景。
    缺少掩模时生成固定种子的 p=0.5 二值掩模，运行标记为非官方。
    """
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        raise MissingFileError(f"数据目录不存在: {dataset_dir}")

    cube_paths: dict[str, Path] = {}
    mask_paths: list[Path] = []
    measurement_paths: dict[str, Path] = {}
    for sidecar in sorted(dataset_dir.glob("*.json")):
        try:
            header = read_sidecar(sidecar)
        except Exception as e:
            logger.debug("跳过非张量文件 %s: %s", sidecar.name, e)
            continue
        stem = sidecar.stem
        if header["kind"] == "cube":
            cube_paths[stem] = sidecar
        elif header["kind"] == "mask":
            mask_paths.append(sidecar)
        elif header["kind"] == "measurement":
            scene = header.get("scene") or stem.removesuffix(MEASUREMENT_SUFFIX)
            measurement_paths[scene] = sidecar

    if not cube_paths:
        raise EmptyDatasetError(f"数据目录中没有场景立方体: {dataset_dir}")

    cubes = {name: load_cube(path) for name, path in cube_paths.items()}
    frame_shape = next(iter(cubes.values())).frame_shape

    if mask_paths:
        if len(mask_paths) > 1:
            logger.warning("发现多个掩模文件，使用 %s", mask_paths[0].name)
        masks = load_masks(mask_paths[0])
        official = masks_official(mask_paths[0])
    else:
        logger.warning("未找到官方掩模，生成 p=0.5 二值掩模 (seed=%d)，结果为非官方", seed)
        masks = make_masks(frame_shape[1], frame_shape[0], B, seed=seed)
        official = False

    digest = masks.digest()
    scenes: list[SceneData] = []
    for name in sorted(cubes):
        cube = cubes[name]
        if cube.frame_shape != masks.frame_shape:
            raise ShapeMismatchError(f"场景 {name} 尺寸 {cube.frame_shape} 与掩模 {masks.frame_shape} 不一致")
        measurements = None
        if name in measurement_paths:
            measurements = load_measurements(measurement_paths[name])
            for m in measurements:
                if m.mask_digest is not None and m.mask_digest != digest:
                    raise DigestMismatchError(f"场景 {name} 的测量与掩模摘要不一致")
        scenes.append(SceneData(name=name, cube=cube, measurements=measurements))

    logger.info("数据集 %s: %d 个场景, B=%d, official=%s", dataset_dir, len(scenes), masks.frames, official)
    return BenchmarkDataset(scenes=scenes, masks=masks, official=official)


def scene_measurements(
    scene: SceneData,
    masks: MaskStack,
    noise_std: float = 0.0,
    seed: int = 0,
) -> tuple[list[Measurement], list[VideoCube]]:
    """(测量, 对应真值)；未提供测量时按每 B 帧编码一个"""
    B = masks.frames
    cube = scene.cube
    count = len(scene.measurements) if scene.measurements is not None else cube.frames // B
    if count == 0 or count * B > cube.frames:
        raise ShapeMismatchError(f"场景 {scene.name} 有 {cube.frames} 帧，不足以构成 {max(count, 1)} 个 B={B} 测量")

    truths = [VideoCube(cube.data[m * B : (m + 1) * B]) for m in range(count)]
    if scene.measurements is not None:
        return scene.measurements, truths

    cfa = CfaOperator.for_shape(cube.frame_shape) if cube.is_color else None
    measurements = [
        encode(truth, masks, cfa=cfa, noise_std=noise_std, seed=seed + m)
        for m, truth in enumerate(truths)
    ]
    return measurements, truths


def _run_scene(
    scene: SceneData,
    masks: MaskStack,
    config: RunConfig,
    official: bool,
) -> list[EvalReport]:
    from sci_pnp.pipeline import solve_many

    measurements, truths = scene_measurements(scene, masks, config.noise_std, config.seed)
    cfa = CfaOperator.for_shape(masks.frame_shape) if measurements[0].bayer else None
    results = solve_many(config, measurements, masks, cfa=cfa)
    digest = config.digest()
    return [
        evaluate_cube(
            truth,
            result.cube,
            scene=scene.name,
            solver=config.solver,
            measurement=m,
            seconds=result.seconds,
            iterations=result.iterations,
            official=official,
            config_digest=digest,
        )
        for m, (truth, result) in enumerate(zip(truths, results, strict=True))
    ]


def benchmark_run(
    dataset_dir: str | Path,
    config: RunConfig,
    threads: int | None = None,
    manager: ReportManager | None = None,
) -> ReportManager:
    """
    在数据目录的所有场景上运行配置的求解器

    场景并行求解，报告按场景名顺序串行汇总。

    Returns:
        ReportManager（含逐测量报告、CSV 与表格导出）
    """
    dataset = load_dataset(dataset_dir, B=config.B, seed=config.seed)
    threads = threads or get_settings().threads
    manager = manager or ReportManager(config_digest=config.digest())

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_run_scene, scene, dataset.masks, config, dataset.official)
            for scene in dataset.scenes
        ]
        per_scene = [f.result() for f in futures]

    for reports in per_scene:
        for report in reports:
            manager.record(report)

    summary = manager.get_summary()
    logger.info(
        "benchmark %s: %d scenes, %.2f dB / %.4f (official=%s)",
        config.solver,
        summary.scene_count,
        summary.mean_psnr_db,
        summary.mean_ssim,
        summary.official,
    )
    return manager


def dataset_exists(dataset_dir: str | Path | None) -> bool:
    """目录存在且至少有一个立方体"""
    if dataset_dir is None or not Path(dataset_dir).is_dir():
        return False
    for sidecar in Path(dataset_dir).glob("*.json"):
        payload, _ = tensor_paths(sidecar)
        if payload.exists():
            try:
                if read_sidecar(sidecar)["kind"] == "cube":
                    return True
            except Exception:
                continue
    return False
