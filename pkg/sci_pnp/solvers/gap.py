"""GAP baseline and the naive colour pipeline (GAP on the mosaic domain, then demosaic)."""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence

import numpy as np

from sci_pnp.core.operators import INIT_EPS, adjoint_h, apply_h, deinterleave, init_estimate, interleave
from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.errors import CfaError, ShapeMismatchError
from sci_pnp.metrics.quality import psnr
from sci_pnp.priors.base import Demosaicer, Denoiser
from sci_pnp.priors.demosaic import BilinearDemosaicer, MalvarDemosaicer

from .state import IterationRecord, ProgressUpdate, Schedule, SolveResult

logger = logging.getLogger(__name__)


def resolve_cfa(y: Measurement, masks: MaskStack, cfa: CfaOperator | None) -> CfaOperator | None:
    """检查测量/掩模/CFA 一致性；Bayer 测量缺省 CFA 时按帧尺寸构造"""
    if y.frame_shape != masks.frame_shape:
        raise ShapeMismatchError(f"测量 {y.frame_shape} 与掩模 {masks.frame_shape} 不一致")
    if cfa is None and y.bayer:
        return CfaOperator.for_shape(y.frame_shape)
    if cfa is not None and cfa.frame_shape != y.frame_shape:
        raise ShapeMismatchError(f"CFA {cfa.frame_shape} 与测量 {y.frame_shape} 不一致")
    return cfa


def gap_project(x: np.ndarray, y: np.ndarray, masks: MaskStack, eps: float = INIT_EPS) -> np.ndarray:
    """x + Hᵀ[(y − Hx) / max(r, ε)]"""
    return x + adjoint_h((y - apply_h(x, masks)) / np.maximum(masks.gram, eps), masks)


def denoise_mosaic(stack: np.ndarray, denoiser: Denoiser, sigma: float, color: bool) -> np.ndarray:
    """
    在马赛克域去噪

    灰度：(B, H, W) 视为单通道；彩色：交织为 (B, 4, H/2, W/2) 的 Bayer 子平面去噪后还原。
    """
    if not color:
        return denoiser(stack[:, None], sigma)[:, 0]
    planes = np.moveaxis(interleave(stack), 0, 1)
    return deinterleave(np.moveaxis(denoiser(planes, sigma), 1, 0))


def gap_iterations(
    x: np.ndarray,
    y: np.ndarray,
    masks: MaskStack,
    denoiser: Denoiser,
    sigmas: Sequence[float],
    color: bool,
    eps: float = INIT_EPS,
) -> np.ndarray:
    """固定次数的 GAP 迭代（热启动用）"""
    for sigma in sigmas:
        x = denoise_mosaic(gap_project(x, y, masks, eps), denoiser, sigma, color)
    return x


def gap_solve(
    y: Measurement,
    masks: MaskStack,
    denoiser: Denoiser,
    schedule: Schedule,
    cfa: CfaOperator | None = None,
    demosaicer: Demosaicer | None = None,
    eps: float = INIT_EPS,
    truth: VideoCube | None = None,
    on_step_callback: Callable[[IterationRecord], None] | None = None,
    on_progress_callback: Callable[[ProgressUpdate], None] | None = None,
) -> SolveResult:
    """
    GAP 求解：x ← D_σ(x + Hᵀ[(y − Hx)/max(r, ε)])

    Args:
        y: 测量
        masks: 掩模
        denoiser: 去噪器
        schedule: σ 调度
        cfa: Bayer 测量的 CFA（缺省时由测量标志推断）
        demosaicer: 彩色输出的逐帧去马赛克器（默认 Malvar）
        truth: 真值（给定时记录 PSNR）

    Returns:
        SolveResult（输出裁剪到 [0, 1]）
    """
    cfa = resolve_cfa(y, masks, cfa)
    color = cfa is not None
    if color and demosaicer is None:
        demosaicer = MalvarDemosaicer()
    if color and demosaicer is not None and demosaicer.channels != 3:
        raise CfaError("彩色 GAP 需要 RGB 去马赛克器")

    def to_cube(stack: np.ndarray) -> np.ndarray:
        if not color:
            return stack[:, None]
        assert demosaicer is not None
        return demosaicer(stack)

    start = time.perf_counter()
    x = init_estimate(y, masks, eps)
    trace: list[IterationRecord] = []

    for k, sigma in enumerate(schedule.sigmas(), start=1):
        x = denoise_mosaic(gap_project(x, y.data, masks, eps), denoiser, sigma, color)
        if on_progress_callback:
            on_progress_callback(ProgressUpdate(iteration=k, phase="gap"))

        record = IterationRecord(
            iter=k,
            sigma=sigma,
            fidelity=float(np.linalg.norm(y.data - apply_h(x, masks))),
        )
        if truth is not None:
            record.psnr = psnr(truth.data, np.clip(to_cube(x), 0.0, 1.0))
        trace.append(record)
        if on_step_callback:
            on_step_callback(record)
        logger.debug("gap iter %d σ=%g fidelity %.4e", k, sigma, record.fidelity)

    cube = VideoCube(np.clip(to_cube(x), 0.0, 1.0))
    seconds = time.perf_counter() - start
    logger.info("gap_solve: %d iterations in %.2fs", len(trace), seconds)
    return SolveResult(
        cube=cube,
        trace=trace,
        solver="gap_tv" if denoiser.name.startswith("tv") else f"gap_{denoiser.name}",
        iterations=len(trace),
        seconds=seconds,
    )


def naive_color_pipeline(
    y: Measurement,
    masks: MaskStack,
    denoiser: Denoiser,
    schedule: Schedule,
    cfa: CfaOperator | None = None,
    demosaicer: Demosaicer | None = None,
    truth: VideoCube | None = None,
) -> SolveResult:
    """马赛克域 GAP + 逐帧去马赛克（默认双线性）"""
    return gap_solve(
        y,
        masks,
        denoiser,
        schedule,
        cfa=cfa or CfaOperator.for_shape(y.frame_shape),
        demosaicer=demosaicer or BilinearDemosaicer(),
        truth=truth,
    )
