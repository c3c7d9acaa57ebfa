"""Abstract base classes for plug-in priors (denoisers and demosaicers)."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Literal

import numpy as np
from pydantic import BaseModel, Field

if TYPE_CHECKING:
    from .convnet import PriorParams


DenoiserKind = Literal["tv", "cnn", "identity"]
DemosaicerKind = Literal["closed", "bilinear", "malvar", "ddnet"]


class DenoiserSpec(BaseModel):
    """去噪器配置"""

    kind: DenoiserKind = Field(default="tv", description="去噪器类型")
    sigma: float = Field(default=25.0, gt=0.0, description="噪声水平（0-255 尺度）")
    tv_weight: float = Field(default=0.1, gt=0.0, description="TV 权重（σ=25 时的值）")
    tv_iters: int = Field(default=10, ge=1, description="TV 内迭代次数")
    tv_axes: Literal["spatial", "spatiotemporal"] = Field(
        default="spatial", description="TV 差分方向"
    )
    cnn_depth: int = Field(default=5, ge=1, description="CNN 卷积层数")
    cnn_width: int = Field(default=32, ge=1, description="CNN 中间通道数")


class DdnetSpec(BaseModel):
    """DDNet-lite 配置：三帧融合 + 细化两级残差网络"""

    window: Literal[3] = Field(default=3, description="时间窗口（帧）")
    depth: int = Field(default=4, ge=1, description="每级卷积层数")
    width: int = Field(default=32, ge=1, description="每级中间通道数")


class Denoiser(ABC):
    """去噪器 D_σ 抽象基类

    输入输出均为 (N, C, H, W) 堆叠；σ 为 0-255 尺度噪声水平。
    """

    @abstractmethod
    def __call__(self, stack: np.ndarray, sigma: float) -> np.ndarray:
        pass

    @property
    @abstractmethod
    def name(self) -> str:
        """去噪器名称（写入 trace / 报告）"""
        pass


class Demosaicer(ABC):
    """去马赛克器 D_M 抽象基类：(B, H, W) 马赛克堆叠 -> (B, C, H, W)"""

    @abstractmethod
    def __call__(self, mosaic_stack: np.ndarray) -> np.ndarray:
        pass

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @property
    def channels(self) -> int:
        """输出通道数"""
        return 3


class TrainablePrior(ABC):
    """可训练先验：支持反向传播与参数更新"""

    @abstractmethod
    def forward(self, inputs: np.ndarray, sigma: float) -> np.ndarray:
        """前向（不改变参数）"""
        pass

    @abstractmethod
    def backward(
        self,
        inputs: np.ndarray,
        sigma: float,
        out_grad: np.ndarray,
    ) -> np.ndarray | None:
        """
        反向传播

        Args:
            inputs: 与 forward 相同的输入
            sigma: 噪声水平
            out_grad: 标量损失对输出的梯度

        Returns:
            对输入的梯度；梯度在输入处截断的先验返回 None
        """
        pass

    @abstractmethod
    def parameters(self) -> list[PriorParams]:
        """全部可训练参数组（梯度缓冲随之填充）"""
        pass

    def zero_grad(self) -> None:
        for params in self.parameters():
            params.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.num_parameters() for p in self.parameters())
