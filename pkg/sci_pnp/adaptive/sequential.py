"""Sequential measurements with warm reuse of adapted prior weights."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.errors import ShapeMismatchError
from sci_pnp.priors.base import Demosaicer, Denoiser
from sci_pnp.solvers.state import Schedule, SolverConfig

from .online import AdaptiveSolveResult, OnlineConfig, adaptive_solve

logger = logging.getLogger(__name__)


def next_interval(interval: int, max_iters: int) -> int:
    """K₀ 每个测量后翻倍，上限为 K_max"""
    return min(2 * interval, max(max_iters, interval))


def sequential_solve(
    measurements: Sequence[Measurement],
    masks: MaskStack,
    denoiser: Denoiser,
    schedule: Schedule,
    online: OnlineConfig | None = None,
    cfa: CfaOperator | None = None,
    demosaicer: Demosaicer | None = None,
    config: SolverConfig | None = None,
    truths: Sequence[VideoCube] | None = None,
    on_measurement: Callable[[int, AdaptiveSolveResult], None] | None = None,
) -> list[AdaptiveSolveResult]:
    """
    依次重建多个测量，第 i+1 个测量从第 i 个测量自适应后的权重开始

    Args:
        measurements: 有序测量列表（共享掩模与 CFA）
        masks: 掩模
        denoiser: 初始去噪器（不被修改）
        schedule: σ 调度
        online: 在线更新配置（K₀ 逐测量翻倍）
        truths: 与测量对应的真值（可选）
        on_measurement: 每个测量完成后的回调 (index, result)

    Returns:
        每个测量的 AdaptiveSolveResult
    """
    if not measurements:
        return []
    shape = measurements[0].frame_shape
    bayer = measurements[0].bayer
    for m in measurements:
        if m.frame_shape != shape or m.bayer != bayer:
            raise ShapeMismatchError("序列测量的尺寸或 Bayer 标志不一致")
    if truths is not None and len(truths) != len(measurements):
        raise ShapeMismatchError("真值数量与测量数量不一致")

    online = online or OnlineConfig()
    results: list[AdaptiveSolveResult] = []
    current_denoiser: Denoiser = denoiser
    current_demosaicer = demosaicer

    for i, y in enumerate(measurements):
        result = adaptive_solve(
            y,
            masks,
            current_denoiser,
            schedule,
            online=online,
            cfa=cfa,
            demosaicer=current_demosaicer,
            config=config,
            truth=truths[i] if truths is not None else None,
        )
        results.append(result)
        logger.info(
            "measurement %d: K₀=%d, %d update events", i, online.interval, result.update_count
        )
        if on_measurement is not None:
            on_measurement(i, result)

        assert result.denoiser is not None
        current_denoiser = result.denoiser
        current_demosaicer = result.demosaicer
        online = online.model_copy(
            update={"interval": next_interval(online.interval, schedule.total_iters)}
        )

    return results
