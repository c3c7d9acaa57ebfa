"""Synthetic scenes with known motion, plus pseudo-random modulation masks."""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np

from sci_pnp.core.types import MaskStack, VideoCube
from sci_pnp.errors import CfaError, ShapeMismatchError

logger = logging.getLogger(__name__)

SceneKind = Literal["moving_square", "texture_pan", "color_orbits"]
MaskKind = Literal["binary", "gray"]

SCENE_KINDS: tuple[str, ...] = ("moving_square", "texture_pan", "color_orbits")
_DEFAULT_CHANNELS = {"moving_square": 1, "texture_pan": 1, "color_orbits": 3}

SQUARE_VELOCITY = (1, 2)  # (dy, dx) 像素/帧
BACKGROUND = 0.15
FOREGROUND = 0.9


def _check_dims(nx: int, ny: int, B: int, channels: int) -> None:
    if nx < 8 or ny < 8:
        raise ShapeMismatchError(f"场景至少 8x8，实际 {ny}x{nx}")
    if B < 1:
        raise ShapeMismatchError(f"B 必须 ≥ 1，实际 {B}")
    if channels not in (1, 3):
        raise ShapeMismatchError(f"channels 必须为 1 或 3，实际 {channels}")
    if channels == 3 and (nx % 2 or ny % 2):
        raise CfaError(f"彩色场景需要偶数尺寸，实际 {ny}x{nx}")


def _moving_square(nx: int, ny: int, B: int, channels: int, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    size = max(2, min(nx, ny) // 4)
    vy, vx = SQUARE_VELOCITY
    travel_y = vy * (B - 1)
    travel_x = vx * (B - 1)
    if size + travel_y > ny or size + travel_x > nx:
        raise ShapeMismatchError(f"{ny}x{nx} 容纳不下 B={B} 帧的运动轨迹")
    y0 = int(rng.integers(0, ny - size - travel_y + 1))
    x0 = int(rng.integers(0, nx - size - travel_x + 1))
    color = np.full(channels, FOREGROUND) if channels == 1 else rng.uniform(0.4, 1.0, size=channels)

    cube = np.full((B, channels, ny, nx), BACKGROUND)
    for b in range(B):
        top, left = y0 + b * vy, x0 + b * vx
        cube[b, :, top : top + size, left : left + size] = color[:, None, None]
    meta = {"start": [y0, x0], "velocity": [vy, vx], "size": size}
    return cube, meta


def _texture_pan(nx: int, ny: int, B: int, channels: int, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    # 两个正弦分量叠加的纹理，整体水平平移
    period_a = float(rng.uniform(8.0, 16.0))
    period_b = float(rng.uniform(10.0, 20.0))
    speed = 1.0
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(channels, 2))
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)

    cube = np.empty((B, channels, ny, nx))
    for b in range(B):
        shift = xx - b * speed
        for c in range(channels):
            cube[b, c] = (
                0.5
                + 0.25 * np.sin(2.0 * np.pi * shift / period_a + phases[c, 0])
                + 0.2 * np.sin(2.0 * np.pi * (shift + yy) / period_b + phases[c, 1])
            )
    meta = {"periods": [period_a, period_b], "speed": speed}
    return np.clip(cube, 0.0, 1.0), meta


def _color_orbits(nx: int, ny: int, B: int, channels: int, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    if channels != 3:
        raise ShapeMismatchError("color_orbits 只生成彩色场景")
    side = min(nx, ny)
    radius = side / 10.0
    orbit = side / 4.0
    cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
    phase0 = float(rng.uniform(0.0, 2.0 * np.pi))
    omega = 2.0 * np.pi / (4 * max(B, 1))
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)

    cube = np.zeros((B, 3, ny, nx))
    for b in range(B):
        for c in range(3):
            angle = phase0 + b * omega + c * 2.0 * np.pi / 3.0
            dy = yy - (cy + orbit * np.sin(angle))
            dx = xx - (cx + orbit * np.cos(angle))
            cube[b, c][dy * dy + dx * dx <= radius * radius] = 1.0
    meta = {"radius": radius, "orbit": orbit, "omega": omega, "phase0": phase0}
    return cube, meta


def gen_synthetic(
    kind: SceneKind,
    nx: int,
    ny: int,
    B: int,
    seed: int = 0,
    channels: int | None = None,
) -> VideoCube:
    """
    生成合成场景

    Args:
        kind: moving_square / texture_pan / color_orbits
        nx, ny: 帧宽、帧高
        B: 帧数
        seed: 随机种子（同种子结果完全一致）
        channels: 通道数（缺省按场景类型：color_orbits 为 3，其余为 1）

    Returns:
        VideoCube，meta 记录生成参数
    """
    if kind not in _DEFAULT_CHANNELS:
        raise ValueError(f"未知场景类型: {kind}（可用: {', '.join(SCENE_KINDS)}）")
    channels = channels or _DEFAULT_CHANNELS[kind]
    _check_dims(nx, ny, B, channels)
    rng = np.random.default_rng(seed)

    builders = {
        "moving_square": _moving_square,
        "texture_pan": _texture_pan,
        "color_orbits": _color_orbits,
    }
    cube, meta = builders[kind](nx, ny, B, channels, rng)
    meta.update({"kind": kind, "seed": seed})
    logger.debug("生成 %s %s", kind, cube.shape)
    return VideoCube(cube, meta)


def make_masks(
    nx: int,
    ny: int,
    B: int,
    seed: int = 0,
    kind: MaskKind = "binary",
    p: float = 0.5,
) -> MaskStack:
    """二值 (P(1) = p) 或灰度 U[0, 1) 掩模"""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p 必须在 (0, 1] 内，实际 {p}")
    rng = np.random.default_rng(seed)
    if kind == "binary":
        data = (rng.random((B, ny, nx)) < p).astype(np.float64)
    elif kind == "gray":
        data = rng.random((B, ny, nx))
    else:
        raise ValueError(f"未知掩模类型: {kind}")
    return MaskStack(data)
