"""Data types of the SCI forward model."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

from sci_pnp.errors import CfaError, ShapeMismatchError

CfaPattern = Literal["rggb"]


def _as_float64(data: Any) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64))


@dataclass
class VideoCube:
    """动态场景 x，布局 (B, C, H, W)，C ∈ {1, 3}"""

    data: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.data = _as_float64(self.data)
        if self.data.ndim == 3:
            # (B, H, W) 灰度简写
            self.data = self.data[:, None, :, :]
        if self.data.ndim != 4:
            raise ShapeMismatchError(f"VideoCube 需要 (B, C, H, W)，实际 {self.data.shape}")
        if self.data.shape[0] < 1:
            raise ShapeMismatchError("VideoCube 至少需要 1 帧")
        if self.data.shape[1] not in (1, 3):
            raise ShapeMismatchError(f"channels 必须为 1 或 3，实际 {self.data.shape[1]}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("VideoCube 含有非有限值")

    @property
    def frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def ny(self) -> int:
        return int(self.data.shape[2])

    @property
    def nx(self) -> int:
        return int(self.data.shape[3])

    @property
    def is_color(self) -> bool:
        return self.channels == 3

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.ny, self.nx

    def clipped(self) -> VideoCube:
        """输出边界处裁剪到 [0, 1]"""
        return VideoCube(np.clip(self.data, 0.0, 1.0), dict(self.meta))

    def planes(self) -> np.ndarray:
        """灰度立方体的 (B, H, W) 视图"""
        if self.is_color:
            raise ShapeMismatchError("彩色立方体没有单平面视图")
        return self.data[:, 0]


@dataclass
class MaskStack:
    """调制掩模 C_b，布局 (B, H, W)，取值 [0, 1]"""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = _as_float64(self.data)
        if self.data.ndim != 3 or self.data.shape[0] < 1:
            raise ShapeMismatchError(f"MaskStack 需要 (B, H, W)，实际 {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("MaskStack 含有非有限值")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("掩模取值必须在 [0, 1] 内")

    @property
    def frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def frame_shape(self) -> tuple[int, int]:
        return int(self.data.shape[1]), int(self.data.shape[2])

    @cached_property
    def gram(self) -> np.ndarray:
        """R = HHᵀ 的对角线 r_j = Σ_b c_{b,j}²"""
        return np.sum(self.data * self.data, axis=0)

    def digest(self) -> str:
        """以 float32 存储形式计算的内容摘要（与文件往返一致）"""
        h = hashlib.sha256()
        h.update(str(self.data.shape).encode("utf-8"))
        h.update(self.data.astype("<f4").tobytes())
        return h.hexdigest()


class NoiseRecord(BaseModel):
    """测量噪声记录"""

    model: Literal["gaussian"] = Field(default="gaussian", description="噪声模型")
    std: float = Field(default=0.0, ge=0.0, description="标准差（像素值尺度）")


@dataclass
class Measurement:
    """单帧编码测量 y，布局 (H, W)"""

    data: np.ndarray
    noise: NoiseRecord = field(default_factory=NoiseRecord)
    bayer: bool = False
    mask_digest: str | None = None

    def __post_init__(self) -> None:
        self.data = _as_float64(self.data)
        if self.data.ndim != 2:
            raise ShapeMismatchError(f"Measurement 需要 (H, W)，实际 {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("Measurement 含有非有限值")

    @property
    def frame_shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])


@dataclass(frozen=True)
class CfaOperator:
    """Bayer 马赛克算子 T（固定 RGGB，红色位于 (0, 0)）"""

    ny: int
    nx: int
    pattern: CfaPattern = "rggb"

    def __post_init__(self) -> None:
        if self.pattern != "rggb":
            raise CfaError(f"仅支持 RGGB 排列，拒绝 {self.pattern!r}")
        if self.ny % 2 or self.nx % 2:
            raise CfaError(f"CFA 需要偶数尺寸，实际 {self.ny}x{self.nx}")

    @classmethod
    def for_shape(cls, frame_shape: tuple[int, int], pattern: str = "rggb") -> CfaOperator:
        return cls(ny=frame_shape[0], nx=frame_shape[1], pattern=pattern)  # type: ignore[arg-type]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.ny, self.nx

    def sampling_mask(self) -> np.ndarray:
        """TᵀT 的 0/1 对角线，形状 (3, H, W)"""
        from .operators import cfa_sampling_mask

        return cfa_sampling_mask(self.frame_shape)

    def mosaic(self, rgb: np.ndarray) -> np.ndarray:
        from .operators import mosaic

        self._check(rgb.shape[-2:])
        return mosaic(rgb)

    def mosaic_adjoint(self, plane: np.ndarray) -> np.ndarray:
        from .operators import mosaic_adjoint

        self._check(plane.shape[-2:])
        return mosaic_adjoint(plane)

    def _check(self, shape: tuple[int, ...]) -> None:
        if tuple(shape) != self.frame_shape:
            raise ShapeMismatchError(f"帧尺寸 {tuple(shape)} 与 CFA {self.frame_shape} 不一致")
