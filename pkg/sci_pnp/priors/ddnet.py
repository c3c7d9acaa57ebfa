"""DDNet-lite: two-stage triplet video demosaicing network.

第一级（融合）：输入 t−1、t、t+1 三帧稀疏 RGB（马赛克伴随）与第 t 帧的双线性
预填充，共 12 通道，输出 prefill + net1。
第二级（细化）：输入第一级输出与第 t 帧稀疏 RGB，共 6 通道，输出 out1 + net2。
边界帧按复制补齐。
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sci_pnp.core.operators import mosaic_adjoint
from sci_pnp.errors import ShapeMismatchError

from .base import DdnetSpec, Demosaicer, TrainablePrior
from .convnet import ForwardCache, PriorParams, init_params, net_backward, net_forward
from .demosaic import demosaic_bilinear

FUSION_IN = 12
REFINE_IN = 6
RGB = 3


def triplet_indices(frames: int) -> list[tuple[int, int, int]]:
    """每帧的 (t−1, t, t+1)，边界钳位"""
    return [(max(t - 1, 0), t, min(t + 1, frames - 1)) for t in range(frames)]


@dataclass
class _DdnetCache:
    fusion: ForwardCache
    refine: ForwardCache


class DdnetDemosaicer(Demosaicer, TrainablePrior):
    """可训练视频去马赛克器（零权重时等于双线性预填充）"""

    def __init__(self, fusion: PriorParams, refine: PriorParams, spec: DdnetSpec | None = None) -> None:
        if fusion.in_channels != FUSION_IN or refine.in_channels != REFINE_IN:
            raise ShapeMismatchError("DDNet 权重通道数不匹配")
        self.fusion = fusion
        self.refine = refine
        self.spec = spec or DdnetSpec()

    @classmethod
    def create(cls, spec: DdnetSpec | None = None, seed: int = 0) -> DdnetDemosaicer:
        spec = spec or DdnetSpec()
        fusion = init_params(FUSION_IN, RGB, spec.width, spec.depth, seed=seed, name="fusion")
        refine = init_params(REFINE_IN, RGB, spec.width, spec.depth, seed=seed + 1, name="refine")
        return cls(fusion, refine, spec)

    @property
    def name(self) -> str:
        return "ddnet"

    def parameters(self) -> list[PriorParams]:
        return [self.fusion, self.refine]

    def clone(self) -> DdnetDemosaicer:
        return DdnetDemosaicer(self.fusion.clone(), self.refine.clone(), self.spec)

    def forward_triplets(
        self,
        prev: np.ndarray,
        cur: np.ndarray,
        nxt: np.ndarray,
    ) -> tuple[np.ndarray, _DdnetCache]:
        """三帧马赛克 (N, H, W) -> 中心帧 RGB (N, 3, H, W)"""
        sparse_cur = mosaic_adjoint(cur)
        prefill = demosaic_bilinear(cur)
        stage1_in = np.concatenate(
            [mosaic_adjoint(prev), sparse_cur, mosaic_adjoint(nxt), prefill], axis=1
        )
        res1, cache1 = net_forward(self.fusion, stage1_in)
        out1 = prefill + res1
        res2, cache2 = net_forward(self.refine, np.concatenate([out1, sparse_cur], axis=1))
        return out1 + res2, _DdnetCache(fusion=cache1, refine=cache2)

    def backward_triplets(self, cache: _DdnetCache, out_grad: np.ndarray) -> None:
        """累加两级参数梯度；梯度在网络输入处截断"""
        d_stage2 = net_backward(self.refine, cache.refine, out_grad)
        d_out1 = out_grad + d_stage2[:, :RGB]
        net_backward(self.fusion, cache.fusion, d_out1)

    def _split(self, mosaic_stack: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        stack = np.asarray(mosaic_stack, dtype=np.float64)
        if stack.ndim != 3 or stack.shape[0] < 1:
            raise ShapeMismatchError(f"DDNet 输入需要 (B, H, W)，实际 {stack.shape}")
        idx = np.array(triplet_indices(stack.shape[0]))
        return stack[idx[:, 0]], stack[idx[:, 1]], stack[idx[:, 2]]

    def __call__(self, mosaic_stack: np.ndarray) -> np.ndarray:
        out, _ = self.forward_triplets(*self._split(mosaic_stack))
        return out

    def forward(self, inputs: np.ndarray, sigma: float = 0.0) -> np.ndarray:
        return self(inputs)

    def backward(self, inputs: np.ndarray, sigma: float, out_grad: np.ndarray) -> None:
        _, cache = self.forward_triplets(*self._split(inputs))
        self.backward_triplets(cache, np.asarray(out_grad, dtype=np.float64))
        return None


def ddnet_forward(demosaicer: DdnetDemosaicer, mosaic_stack: np.ndarray) -> np.ndarray:
    """(B, H, W) 马赛克堆叠 -> (B, 3, H, W)"""
    return demosaicer(mosaic_stack)
