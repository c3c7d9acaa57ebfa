"""Residual CNN denoiser with a noise-level input channel."""

from __future__ import annotations

import numpy as np

from sci_pnp.errors import ShapeMismatchError

from .base import Denoiser, DenoiserSpec, TrainablePrior
from .convnet import PriorParams, init_params, net_backward, net_forward

SIGMA_SCALE = 255.0


def _with_sigma(noisy: np.ndarray, sigma: float) -> np.ndarray:
    n, _, h, w = noisy.shape
    level = np.full((n, 1, h, w), sigma / SIGMA_SCALE)
    return np.concatenate([noisy, level], axis=1)


def _check_input(params: PriorParams, noisy: np.ndarray) -> np.ndarray:
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.ndim != 4:
        raise ShapeMismatchError(f"去噪输入需要 (N, C, H, W)，实际 {noisy.shape}")
    if noisy.shape[1] + 1 != params.in_channels or noisy.shape[1] != params.out_channels:
        raise ShapeMismatchError(
            f"网络需要 {params.out_channels} 个图像通道，实际 {noisy.shape[1]}"
        )
    return noisy


def cnn_forward(params: PriorParams, noisy: np.ndarray, sigma: float) -> np.ndarray:
    """output = noisy − net([noisy, σ/255])"""
    noisy = _check_input(params, noisy)
    residual, _ = net_forward(params, _with_sigma(noisy, sigma))
    return noisy - residual


def cnn_backward(
    params: PriorParams,
    noisy: np.ndarray,
    sigma: float,
    out_grad: np.ndarray,
) -> np.ndarray:
    """
    反向传播：累加参数梯度，返回对 noisy 的梯度

    梯度缓冲是累加的，调用方负责先 zero_grad。
    """
    noisy = _check_input(params, noisy)
    out_grad = np.asarray(out_grad, dtype=np.float64)
    if out_grad.shape != noisy.shape:
        raise ShapeMismatchError(f"out_grad {out_grad.shape} 与输出 {noisy.shape} 不一致")
    _, cache = net_forward(params, _with_sigma(noisy, sigma))
    d_inputs = net_backward(params, cache, -out_grad)
    return out_grad + d_inputs[:, : noisy.shape[1]]


class CnnDenoiser(Denoiser, TrainablePrior):
    """5 层 32 通道残差 CNN（逐帧处理，帧间无耦合）"""

    def __init__(self, params: PriorParams) -> None:
        self.params = params

    @classmethod
    def create(
        cls,
        channels: int = 1,
        depth: int = 5,
        width: int = 32,
        seed: int = 0,
    ) -> CnnDenoiser:
        params = init_params(
            in_channels=channels + 1,
            out_channels=channels,
            width=width,
            depth=depth,
            seed=seed,
            name="denoiser",
        )
        return cls(params)

    @classmethod
    def from_spec(cls, spec: DenoiserSpec, channels: int, seed: int = 0) -> CnnDenoiser:
        return cls.create(channels=channels, depth=spec.cnn_depth, width=spec.cnn_width, seed=seed)

    @property
    def name(self) -> str:
        return "cnn"

    @property
    def channels(self) -> int:
        return self.params.out_channels

    def __call__(self, stack: np.ndarray, sigma: float) -> np.ndarray:
        return cnn_forward(self.params, stack, sigma)

    def forward(self, inputs: np.ndarray, sigma: float) -> np.ndarray:
        return cnn_forward(self.params, inputs, sigma)

    def backward(self, inputs: np.ndarray, sigma: float, out_grad: np.ndarray) -> np.ndarray:
        return cnn_backward(self.params, inputs, sigma, out_grad)

    def parameters(self) -> list[PriorParams]:
        return [self.params]

    def clone(self) -> CnnDenoiser:
        return CnnDenoiser(self.params.clone())
