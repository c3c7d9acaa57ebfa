"""Small 3x3 convolutional networks with hand-written reverse mode.

卷积采用 reflect 填充 1 像素；im2col 由 sliding_window_view 实现，
收缩通过 tensordot（即矩阵乘）完成。
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from sci_pnp.errors import ShapeMismatchError

Activation = Literal["relu", "linear"]

KERNEL = 3
PAD = KERNEL // 2


@dataclass
class ConvLayer:
    """单个 3x3 卷积层及其梯度缓冲"""

    weight: np.ndarray  # (O, I, 3, 3)
    bias: np.ndarray  # (O,)
    activation: Activation = "relu"
    grad_weight: np.ndarray = field(init=False)
    grad_bias: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 4 or self.weight.shape[2:] != (KERNEL, KERNEL):
            raise ShapeMismatchError(f"卷积核需要 (O, I, 3, 3)，实际 {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError(f"偏置需要 ({self.weight.shape[0]},)，实际 {self.bias.shape}")
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)

    @property
    def in_channels(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.weight.shape[0])


@dataclass
class PriorParams:
    """网络权重 θ：有序卷积层列表"""

    layers: list[ConvLayer]
    name: str = "net"
    seed: int | None = None
    step: int = 0

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_channels

    def num_parameters(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.grad_weight.fill(0.0)
            layer.grad_bias.fill(0.0)

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))
            for layer in self.layers
        )

    def grads_finite(self) -> bool:
        return all(
            np.all(np.isfinite(layer.grad_weight)) and np.all(np.isfinite(layer.grad_bias))
            for layer in self.layers
        )

    def grad_norm(self) -> float:
        total = sum(
            float(np.sum(layer.grad_weight**2) + np.sum(layer.grad_bias**2))
            for layer in self.layers
        )
        return float(np.sqrt(total))

    def sgd_step(self, lr: float) -> None:
        """θ ← θ − lr·∇θ（无动量）"""
        if lr == 0.0:
            return
        for layer in self.layers:
            layer.weight -= lr * layer.grad_weight
            layer.bias -= lr * layer.grad_bias
        self.step += 1

    def clone(self) -> PriorParams:
        return copy.deepcopy(self)

    def arrays(self) -> list[np.ndarray]:
        """按层展开的权重数组（检查点顺序：w0, b0, w1, b1, ...）"""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def load_arrays(self, arrays: list[np.ndarray]) -> None:
        if len(arrays) != 2 * len(self.layers):
            raise ShapeMismatchError(f"需要 {2 * len(self.layers)} 个数组，实际 {len(arrays)}")
        for i, layer in enumerate(self.layers):
            w, b = arrays[2 * i], arrays[2 * i + 1]
            if w.shape != layer.weight.shape or b.shape != layer.bias.shape:
                raise ShapeMismatchError(f"第 {i} 层形状不一致")
            layer.weight[...] = w
            layer.bias[...] = b


def init_params(
    in_channels: int,
    out_channels: int,
    width: int,
    depth: int,
    seed: int = 0,
    name: str = "net",
    zero_last: bool = True,
) -> PriorParams:
    """
    Kaiming fan-in 初始化

    隐藏层 ReLU，末层线性；zero_last 时末层全零，使残差网络初始为恒等映射。
    """
    if depth < 1:
        raise ValueError("depth 至少为 1")
    rng = np.random.default_rng(seed)
    layers: list[ConvLayer] = []
    for i in range(depth):
        c_in = in_channels if i == 0 else width
        c_out = out_channels if i == depth - 1 else width
        last = i == depth - 1
        std = np.sqrt(2.0 / (c_in * KERNEL * KERNEL))
        if last and zero_last:
            weight = np.zeros((c_out, c_in, KERNEL, KERNEL))
        else:
            weight = rng.normal(0.0, std, size=(c_out, c_in, KERNEL, KERNEL))
        layers.append(
            ConvLayer(
                weight=weight,
                bias=np.zeros(c_out),
                activation="linear" if last else "relu",
            )
        )
    return PriorParams(layers=layers, name=name, seed=seed)


@dataclass
class _LayerCache:
    patches: np.ndarray  # (N, I, H, W, 3, 3)
    pre: np.ndarray  # (N, O, H, W)


@dataclass
class ForwardCache:
    """前向缓存（供 backward 使用）"""

    layers: list[_LayerCache] = field(default_factory=list)
    input_shape: tuple[int, ...] = ()


def _pad(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)), mode="reflect")


def _fold_pad(dxp: np.ndarray) -> np.ndarray:
    """reflect 填充的伴随：把填充区梯度折回原像素"""
    h = dxp.shape[2] - 2 * PAD
    w = dxp.shape[3] - 2 * PAD
    rows = dxp[:, :, PAD : PAD + h, :].copy()
    rows[:, :, 1, :] += dxp[:, :, 0, :]
    rows[:, :, h - 2, :] += dxp[:, :, h + 1, :]
    out = rows[:, :, :, PAD : PAD + w].copy()
    out[:, :, :, 1] += rows[:, :, :, 0]
    out[:, :, :, w - 2] += rows[:, :, :, w + 1]
    return out


def conv_forward(layer: ConvLayer, x: np.ndarray) -> tuple[np.ndarray, _LayerCache]:
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeMismatchError(
            f"卷积输入需要 (N, {layer.in_channels}, H, W)，实际 {x.shape}"
        )
    if x.shape[2] < 2 or x.shape[3] < 2:
        raise ShapeMismatchError(f"reflect 填充需要至少 2x2 的输入，实际 {x.shape[2:]}")
    patches = sliding_window_view(_pad(x), (KERNEL, KERNEL), axis=(2, 3))
    # (N, I, H, W, 3, 3) x (O, I, 3, 3) -> (N, H, W, O)
    pre = np.tensordot(patches, layer.weight, axes=([1, 4, 5], [1, 2, 3]))
    pre = np.ascontiguousarray(pre.transpose(0, 3, 1, 2)) + layer.bias[None, :, None, None]
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    return out, _LayerCache(patches=patches, pre=pre)


def conv_backward(layer: ConvLayer, cache: _LayerCache, dout: np.ndarray) -> np.ndarray:
    """累加参数梯度，返回对层输入的梯度"""
    if layer.activation == "relu":
        dout = dout * (cache.pre > 0.0)
    layer.grad_bias += dout.sum(axis=(0, 2, 3))
    layer.grad_weight += np.tensordot(dout, cache.patches, axes=([0, 2, 3], [0, 2, 3]))

    n, _, h, w = dout.shape
    # (N, O, H, W) x (O, I, 3, 3) -> (N, H, W, I, 3, 3)
    cols = np.tensordot(dout, layer.weight, axes=([1], [0]))
    dxp = np.zeros((n, layer.in_channels, h + 2 * PAD, w + 2 * PAD))
    for k in range(KERNEL):
        for m in range(KERNEL):
            dxp[:, :, k : k + h, m : m + w] += cols[..., k, m].transpose(0, 3, 1, 2)
    return _fold_pad(dxp)


def net_forward(params: PriorParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    cache = ForwardCache(input_shape=x.shape)
    out = np.asarray(x, dtype=np.float64)
    for layer in params.layers:
        out, layer_cache = conv_forward(layer, out)
        cache.layers.append(layer_cache)
    return out, cache


def net_backward(params: PriorParams, cache: ForwardCache, dout: np.ndarray) -> np.ndarray:
    grad = np.asarray(dout, dtype=np.float64)
    for layer, layer_cache in zip(reversed(params.layers), reversed(cache.layers), strict=True):
        grad = conv_backward(layer, layer_cache, grad)
    return grad
