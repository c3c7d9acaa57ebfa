"""RunConfig-driven reconstruction: prior loading and solver dispatch."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from pathlib import Path

from sci_pnp.adaptive import AdaptiveSolveResult, adaptive_solve, sequential_solve
from sci_pnp.config import RunConfig, get_settings
from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.errors import ConfigError, CorruptFileError, ShapeMismatchError
from sci_pnp.io.tensors import load_checkpoint, save_checkpoint
from sci_pnp.priors import (
    CnnDenoiser,
    DdnetDemosaicer,
    Demosaicer,
    Denoiser,
    TrainablePrior,
    create_priors_from_config,
)
from sci_pnp.solvers import IterationRecord, Schedule, SolveResult, TwoStageADMM, gap_solve

logger = logging.getLogger(__name__)


def load_priors(config: RunConfig, color: bool) -> tuple[Denoiser, Demosaicer | None]:
    """按配置创建先验，并加载检查点（若给定）"""
    denoiser, demosaicer = create_priors_from_config(config, color)

    if config.denoiser_checkpoint and isinstance(denoiser, CnnDenoiser):
        networks, _ = load_checkpoint(config.denoiser_checkpoint)
        if "denoiser" not in networks:
            raise CorruptFileError(f"检查点缺少 denoiser 网络: {config.denoiser_checkpoint}")
        loaded = CnnDenoiser(networks["denoiser"])
        if loaded.channels != denoiser.channels:
            raise ShapeMismatchError(
                f"去噪器检查点为 {loaded.channels} 通道，当前数据需要 {denoiser.channels}"
            )
        denoiser = loaded
    elif isinstance(denoiser, CnnDenoiser):
        logger.warning("CNN 去噪器未加载检查点（末层零初始化，等价于恒等映射）")

    if config.demosaicer_checkpoint and isinstance(demosaicer, DdnetDemosaicer):
        networks, _ = load_checkpoint(config.demosaicer_checkpoint)
        if "fusion" not in networks or "refine" not in networks:
            raise CorruptFileError(f"检查点缺少 fusion/refine 网络: {config.demosaicer_checkpoint}")
        demosaicer = DdnetDemosaicer(networks["fusion"], networks["refine"], config.ddnet_spec())
    elif isinstance(demosaicer, DdnetDemosaicer):
        logger.warning("DDNet 未加载检查点（等价于双线性预填充）")

    return denoiser, demosaicer


def resolve_schedule(config: RunConfig) -> Schedule:
    return config.schedule_obj(get_settings().schedules_config_path)


def solve(
    config: RunConfig,
    y: Measurement,
    masks: MaskStack,
    cfa: CfaOperator | None = None,
    truth: VideoCube | None = None,
    denoiser: Denoiser | None = None,
    demosaicer: Demosaicer | None = None,
    schedule: Schedule | None = None,
    on_step_callback: Callable[[IterationRecord], None] | None = None,
) -> SolveResult:
    """
    按 config.solver 重建单个测量

    denoiser 未给定时由配置创建（含检查点）；给定时 demosaicer 原样使用。
    """
    color = y.bayer or cfa is not None
    schedule = schedule or resolve_schedule(config)
    if denoiser is None:
        denoiser, demosaicer = load_priors(config, color)

    if config.solver == "gap_tv":
        if color and isinstance(denoiser, CnnDenoiser):
            raise ConfigError("彩色 GAP 在 Bayer 子平面上去噪，不支持 RGB CNN 去噪器")
        return gap_solve(
            y,
            masks,
            denoiser,
            schedule,
            cfa=cfa,
            demosaicer=demosaicer if color else None,
            truth=truth,
            on_step_callback=on_step_callback,
        )

    if config.solver == "two_stage_admm":
        engine = TwoStageADMM(
            config=config.solver_config(),
            denoiser=denoiser,
            demosaicer=demosaicer,
            on_step_callback=on_step_callback,
        )
        return engine.solve(y, masks, schedule, cfa=cfa, truth=truth)

    return adaptive_solve(
        y,
        masks,
        denoiser,
        schedule,
        online=config.online_config(),
        cfa=cfa,
        demosaicer=demosaicer,
        config=config.solver_config(),
        truth=truth,
        on_step_callback=on_step_callback,
    )


def solve_many(
    config: RunConfig,
    measurements: Sequence[Measurement],
    masks: MaskStack,
    cfa: CfaOperator | None = None,
    truths: Sequence[VideoCube] | None = None,
) -> list[SolveResult]:
    """
    重建一组共享掩模的测量

    adaptive 求解器按顺序传递自适应后的权重（K₀ 逐测量翻倍），其余求解器相互独立。
    """
    if not measurements:
        return []
    if truths is not None and len(truths) != len(measurements):
        raise ShapeMismatchError("真值数量与测量数量不一致")
    color = measurements[0].bayer or cfa is not None
    schedule = resolve_schedule(config)
    denoiser, demosaicer = load_priors(config, color)

    if config.solver == "adaptive":
        return list(
            sequential_solve(
                measurements,
                masks,
                denoiser,
                schedule,
                online=config.online_config(),
                cfa=cfa,
                demosaicer=demosaicer,
                config=config.solver_config(),
                truths=truths,
            )
        )
    return [
        solve(
            config,
            y,
            masks,
            cfa=cfa,
            truth=truths[i] if truths is not None else None,
            denoiser=denoiser,
            demosaicer=demosaicer,
            schedule=schedule,
        )
        for i, y in enumerate(measurements)
    ]


def output_dir(config: RunConfig, override: str | Path | None = None) -> Path:
    """输出目录：参数 > 配置 > Settings.output_dir"""
    if override is not None:
        return Path(override)
    if config.output_dir is not None:
        return Path(config.output_dir)
    return get_settings().output_dir


def save_adapted_checkpoints(
    out: str | Path,
    index: int,
    result: SolveResult,
    config: RunConfig,
) -> list[Path]:
    """
    保存单个测量自适应后的先验权重

    写入 out/adapted/{target}_{index:03d}；sidecar 记录源检查点、测量序号与更新事件日志。
    非自适应结果或不可训练先验不写文件。
    """
    if not isinstance(result, AdaptiveSolveResult):
        return []
    directory = Path(out) / "adapted"
    sources = {"denoiser": config.denoiser_checkpoint, "demosaicer": config.demosaicer_checkpoint}
    written: list[Path] = []
    for target, prior in (("denoiser", result.denoiser), ("demosaicer", result.demosaicer)):
        if not isinstance(prior, TrainablePrior):
            continue
        events = [e.as_dict() for e in result.events if e.target == target]
        path = save_checkpoint(
            directory / f"{target}_{index:03d}",
            prior.parameters(),
            extras={
                "target": target,
                "source_checkpoint": sources[target],
                "measurement_index": index,
                "update_events": events,
                "config_digest": config.digest(),
            },
        )
        logger.info("自适应 %s 检查点 (测量 %d) -> %s", target, index, path)
        written.append(path)
    return written
