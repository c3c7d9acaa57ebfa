"""8-bit PNG / PGM frame export via pillow."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image

from sci_pnp.core.types import VideoCube
from sci_pnp.errors import MissingFileError, ShapeMismatchError

logger = logging.getLogger(__name__)

FrameFormat = Literal["png", "pgm"]


def to_uint8(frame: np.ndarray) -> np.ndarray:
    """[0, 1] -> 0..255（四舍五入）"""
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def _image(frame: np.ndarray) -> Image.Image:
    # frame: (C, H, W)
    if frame.shape[0] == 1:
        return Image.fromarray(to_uint8(frame[0]), mode="L")
    return Image.fromarray(to_uint8(np.moveaxis(frame, 0, -1)), mode="RGB")


def export_frames(
    cube: VideoCube,
    out_dir: str | Path,
    prefix: str = "frame",
    fmt: FrameFormat = "png",
) -> list[Path]:
    """
    逐帧导出

    pgm 格式下彩色帧写为 .ppm。
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for b in range(cube.frames):
        if fmt == "png":
            suffix = ".png"
        else:
            suffix = ".ppm" if cube.is_color else ".pgm"
        path = out_dir / f"{prefix}_{b:03d}{suffix}"
        _image(cube.data[b]).save(path)
        paths.append(path)
    logger.debug("导出 %d 帧到 %s", len(paths), out_dir)
    return paths


def load_frames(paths: Sequence[str | Path]) -> VideoCube:
    """读回帧序列（灰度或 RGB），值缩放到 [0, 1]"""
    if not paths:
        raise ShapeMismatchError("帧列表为空")
    frames: list[np.ndarray] = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise MissingFileError(f"帧文件不存在: {p}")
        with Image.open(p) as img:
            arr = np.asarray(img, dtype=np.float64) / 255.0
        frames.append(arr[None] if arr.ndim == 2 else np.moveaxis(arr[..., :3], -1, 0))
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"帧尺寸不一致: {sorted(shapes)}")
    return VideoCube(np.stack(frames))
