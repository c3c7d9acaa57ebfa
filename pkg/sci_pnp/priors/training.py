"""Supervised desk-scale training for DDNet-lite and the CNN denoiser."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from sci_pnp.core.operators import mosaic
from sci_pnp.core.types import VideoCube
from sci_pnp.errors import EmptyDatasetError, ShapeMismatchError

from .base import DdnetSpec
from .cnn_denoiser import CnnDenoiser, cnn_backward, cnn_forward
from .ddnet import DdnetDemosaicer, triplet_indices

logger = logging.getLogger(__name__)

LOG_EVERY = 50


@dataclass
class TrainingLog:
    """训练损失记录"""

    losses: list[float] = field(default_factory=list)

    @property
    def initial(self) -> float:
        return self.losses[0] if self.losses else float("nan")

    @property
    def final(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def _clip_and_step(model: CnnDenoiser | DdnetDemosaicer, lr: float, max_grad_norm: float | None) -> None:
    params = model.parameters()
    scale = 1.0
    if max_grad_norm is not None:
        norm = float(np.sqrt(sum(p.grad_norm() ** 2 for p in params)))
        if norm > max_grad_norm:
            scale = max_grad_norm / norm
    for p in params:
        p.sgd_step(lr * scale)


def _even_patch_origin(rng: np.random.Generator, size: int, patch: int) -> int:
    # 偶数对齐，保持 RGGB 相位
    return 2 * int(rng.integers(0, (size - patch) // 2 + 1))


def _check_patch(cube: VideoCube, patch: int, need_even: bool) -> None:
    if cube.ny < patch or cube.nx < patch:
        raise ShapeMismatchError(f"块尺寸 {patch} 大于视频帧 {cube.frame_shape}")
    if need_even and patch % 2:
        raise ShapeMismatchError("Bayer 训练块尺寸必须为偶数")


def sample_triplets(
    dataset: Sequence[VideoCube],
    batch: int,
    patch: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """
    随机抽取三帧块

    Returns:
        (triplet RGB (N, 3 帧, 3, p, p), 中心帧 RGB (N, 3, p, p))
    """
    triplets = np.empty((batch, 3, 3, patch, patch))
    for n in range(batch):
        cube = dataset[int(rng.integers(0, len(dataset)))]
        t = int(rng.integers(0, cube.frames))
        y0 = _even_patch_origin(rng, cube.ny, patch)
        x0 = _even_patch_origin(rng, cube.nx, patch)
        frames = triplet_indices(cube.frames)[t]
        triplets[n] = cube.data[list(frames), :, y0 : y0 + patch, x0 : x0 + patch]
    return triplets, triplets[:, 1]


def train_demosaic(
    spec: DdnetSpec | None,
    dataset: Sequence[VideoCube],
    steps: int = 2000,
    lr: float = 0.05,
    batch: int = 64,
    patch: int = 64,
    seed: int = 0,
    model: DdnetDemosaicer | None = None,
    max_grad_norm: float | None = 1.0,
    on_step: Callable[[int, float], None] | None = None,
) -> tuple[DdnetDemosaicer, TrainingLog]:
    """
    训练 DDNet-lite：最小化 ddnet(mosaic(x)) 与 x 的 MSE

    Args:
        spec: 网络结构（model 给定时忽略）
        dataset: RGB 视频立方体列表
        steps: SGD 步数
        lr: 学习率（0 时参数不变）
        batch: 每步随机块数
        patch: 块边长（偶数）
        seed: 初始化与抽样种子
        model: 继续训练的已有模型
        max_grad_norm: 全局梯度范数裁剪阈值（None 关闭）

    Returns:
        (训练后的模型, 损失记录)
    """
    if not dataset:
        raise EmptyDatasetError("训练数据集为空")
    for cube in dataset:
        if not cube.is_color:
            raise ShapeMismatchError("去马赛克训练需要 RGB 立方体")
        _check_patch(cube, patch, need_even=True)

    model = model or DdnetDemosaicer.create(spec, seed=seed)
    rng = np.random.default_rng(seed)
    log = TrainingLog()

    for step in range(steps):
        triplets, target = sample_triplets(dataset, batch, patch, rng)
        mosaics = mosaic(triplets)  # (N, 3 帧, p, p)
        out, cache = model.forward_triplets(mosaics[:, 0], mosaics[:, 1], mosaics[:, 2])
        diff = out - target
        loss = float(np.mean(diff**2))
        log.losses.append(loss)

        model.zero_grad()
        model.backward_triplets(cache, 2.0 * diff / diff.size)
        _clip_and_step(model, lr, max_grad_norm)

        if on_step is not None:
            on_step(step, loss)
        if step % LOG_EVERY == 0:
            logger.info("train-demosaic step %d loss %.6e", step, loss)

    for p in model.parameters():
        p.seed = seed
    logger.info("train-demosaic done: loss %.6e -> %.6e", log.initial, log.final)
    return model, log


def train_denoiser(
    dataset: Sequence[VideoCube],
    sigmas: Sequence[float] = (25.0, 12.0, 6.0),
    steps: int = 200,
    lr: float = 0.05,
    batch: int = 16,
    patch: int = 32,
    seed: int = 0,
    model: CnnDenoiser | None = None,
    depth: int = 5,
    width: int = 32,
    max_grad_norm: float | None = 1.0,
    on_step: Callable[[int, float], None] | None = None,
) -> tuple[CnnDenoiser, TrainingLog]:
    """
    训练 CNN 去噪器：高斯噪声 σ 从调度水平中抽取（0-255 尺度）
    """
    if not dataset:
        raise EmptyDatasetError("训练数据集为空")
    if not sigmas:
        raise ValueError("sigmas 不能为空")
    channels = dataset[0].channels
    for cube in dataset:
        if cube.channels != channels:
            raise ShapeMismatchError("训练集通道数不一致")
        _check_patch(cube, patch, need_even=False)

    model = model or CnnDenoiser.create(channels=channels, depth=depth, width=width, seed=seed)
    rng = np.random.default_rng(seed)
    log = TrainingLog()

    for step in range(steps):
        sigma = float(sigmas[int(rng.integers(0, len(sigmas)))])
        clean = np.empty((batch, channels, patch, patch))
        for n in range(batch):
            cube = dataset[int(rng.integers(0, len(dataset)))]
            t = int(rng.integers(0, cube.frames))
            y0 = int(rng.integers(0, cube.ny - patch + 1))
            x0 = int(rng.integers(0, cube.nx - patch + 1))
            clean[n] = cube.data[t, :, y0 : y0 + patch, x0 : x0 + patch]
        noisy = clean + rng.normal(0.0, sigma / 255.0, size=clean.shape)

        out = cnn_forward(model.params, noisy, sigma)
        diff = out - clean
        loss = float(np.mean(diff**2))
        log.losses.append(loss)

        model.zero_grad()
        cnn_backward(model.params, noisy, sigma, 2.0 * diff / diff.size)
        _clip_and_step(model, lr, max_grad_norm)

        if on_step is not None:
            on_step(step, loss)
        if step % LOG_EVERY == 0:
            logger.info("train-denoiser step %d σ=%g loss %.6e", step, sigma, loss)

    model.params.seed = seed
    logger.info("train-denoiser done: loss %.6e -> %.6e", log.initial, log.final)
    return model, log
