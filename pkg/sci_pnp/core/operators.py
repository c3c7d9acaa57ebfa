"""Linear operators of the SCI forward model.

约定:
- 堆叠平面 (B, H, W) 对应向量化的 x̃ = [x̃_1ᵀ, …, x̃_Bᵀ]ᵀ
- H = [D_1, …, D_B]，D_b = Diag(Vec(C_b))，从不稠密构造
- T 为 RGGB 选择算子，T_M 为其逐帧块对角堆叠
"""

from __future__ import annotations

import numpy as np

from sci_pnp.errors import CfaError, ShapeMismatchError

from .types import CfaOperator, MaskStack, Measurement, NoiseRecord, VideoCube

INIT_EPS = 1e-8

# RGGB: (行偏移, 列偏移, 通道)
_BAYER_SITES: tuple[tuple[int, int, int], ...] = (
    (0, 0, 0),  # R
    (0, 1, 1),  # G1
    (1, 0, 1),  # G2
    (1, 1, 2),  # B
)


def _check_stack(x: np.ndarray, masks: MaskStack) -> None:
    if x.shape != masks.data.shape:
        raise ShapeMismatchError(f"堆叠平面 {x.shape} 与掩模 {masks.data.shape} 不一致")


def _check_plane(y: np.ndarray, masks: MaskStack) -> None:
    if tuple(y.shape) != masks.frame_shape:
        raise ShapeMismatchError(f"测量平面 {y.shape} 与掩模帧尺寸 {masks.frame_shape} 不一致")


def _check_even(shape: tuple[int, ...]) -> None:
    if len(shape) < 2 or shape[-1] % 2 or shape[-2] % 2:
        raise CfaError(f"Bayer 操作需要偶数尺寸，实际 {tuple(shape[-2:])}")


def apply_h(x: np.ndarray, masks: MaskStack) -> np.ndarray:
    """H x̃ = Σ_b C_b ⊙ x̃_b"""
    x = np.asarray(x, dtype=np.float64)
    _check_stack(x, masks)
    return np.einsum("bij,bij->ij", masks.data, x)


def adjoint_h(y: np.ndarray, masks: MaskStack) -> np.ndarray:
    """Hᵀ y，第 b 个平面为 C_b ⊙ y"""
    y = np.asarray(y, dtype=np.float64)
    _check_plane(y, masks)
    return masks.data * y[None, :, :]


def gram_diag(masks: MaskStack) -> np.ndarray:
    """r_j = Σ_b c_{b,j}²"""
    return masks.gram.copy()


def cfa_sampling_mask(frame_shape: tuple[int, int]) -> np.ndarray:
    """RGGB 采样指示 s，形状 (3, H, W)"""
    _check_even(frame_shape)
    s = np.zeros((3, *frame_shape), dtype=np.float64)
    for dr, dc, ch in _BAYER_SITES:
        s[ch, dr::2, dc::2] = 1.0
    return s


def mosaic(rgb: np.ndarray) -> np.ndarray:
    """x̃ = T x，输入 (..., 3, H, W)，输出 (..., H, W)"""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim < 3 or rgb.shape[-3] != 3:
        raise ShapeMismatchError(f"mosaic 需要 (..., 3, H, W)，实际 {rgb.shape}")
    _check_even(rgb.shape)
    out = np.empty(rgb.shape[:-3] + rgb.shape[-2:], dtype=np.float64)
    for dr, dc, ch in _BAYER_SITES:
        out[..., dr::2, dc::2] = rgb[..., ch, dr::2, dc::2]
    return out


def mosaic_adjoint(plane: np.ndarray) -> np.ndarray:
    """Tᵀ x̃：未采样位置为 0 的稀疏 RGB"""
    plane = np.asarray(plane, dtype=np.float64)
    _check_even(plane.shape)
    out = np.zeros(plane.shape[:-2] + (3,) + plane.shape[-2:], dtype=np.float64)
    for dr, dc, ch in _BAYER_SITES:
        out[..., ch, dr::2, dc::2] = plane[..., dr::2, dc::2]
    return out


def interleave(stack: np.ndarray) -> np.ndarray:
    """(B, H, W) 马赛克堆叠 -> (4, B, H/2, W/2)，通道顺序 r, g1, g2, b"""
    stack = np.asarray(stack, dtype=np.float64)
    _check_even(stack.shape)
    return np.stack([stack[..., dr::2, dc::2] for dr, dc, _ in _BAYER_SITES], axis=0)


def deinterleave(channels: np.ndarray) -> np.ndarray:
    """interleave 的逆"""
    channels = np.asarray(channels, dtype=np.float64)
    if channels.shape[0] != 4:
        raise ShapeMismatchError(f"deinterleave 需要 4 个分量，实际 {channels.shape[0]}")
    h, w = channels.shape[-2:]
    out = np.empty(channels.shape[1:-2] + (2 * h, 2 * w), dtype=np.float64)
    for i, (dr, dc, _) in enumerate(_BAYER_SITES):
        out[..., dr::2, dc::2] = channels[i]
    return out


def apply_tm(x: np.ndarray, cfa: CfaOperator | None) -> np.ndarray:
    """T_M x：(B, C, H, W) -> (B, H, W)；灰度时 T_M = I"""
    if cfa is None:
        if x.shape[1] != 1:
            raise CfaError("彩色立方体需要 CFA")
        return x[:, 0]
    if x.shape[1] != 3:
        raise CfaError("CFA 仅作用于 3 通道立方体")
    return cfa.mosaic(x)


def adjoint_tm(q: np.ndarray, cfa: CfaOperator | None) -> np.ndarray:
    """T_Mᵀ q：(B, H, W) -> (B, C, H, W)"""
    if cfa is None:
        return q[:, None, :, :].copy()
    return cfa.mosaic_adjoint(q)


def sampling_indicator(cfa: CfaOperator | None, frame_shape: tuple[int, int]) -> np.ndarray:
    """T_MᵀT_M 的对角线（按帧广播），形状 (1, C, H, W)"""
    if cfa is None:
        return np.ones((1, 1, *frame_shape), dtype=np.float64)
    return cfa.sampling_mask()[None]


def encode(
    video: VideoCube,
    masks: MaskStack,
    cfa: CfaOperator | None = None,
    noise_std: float = 0.0,
    seed: int = 0,
) -> Measurement:
    """前向模型 y = H T_M x + z，z ~ N(0, noise_std²)"""
    if video.frames != masks.frames or video.frame_shape != masks.frame_shape:
        raise ShapeMismatchError(
            f"视频 {video.data.shape} 与掩模 {masks.data.shape} 不一致"
        )
    if video.is_color and cfa is None:
        raise CfaError("彩色视频编码需要 CFA")
    if not video.is_color and cfa is not None:
        raise CfaError("灰度视频不能附加 CFA")
    if noise_std < 0:
        raise ValueError("noise_std 不能为负")

    y = apply_h(apply_tm(video.data, cfa), masks)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_std, size=y.shape)

    return Measurement(
        data=y,
        noise=NoiseRecord(std=float(noise_std)),
        bayer=cfa is not None,
        mask_digest=masks.digest(),
    )


def init_estimate(y: Measurement | np.ndarray, masks: MaskStack, eps: float = INIT_EPS) -> np.ndarray:
    """初值 plane_b = C_b ⊙ y / max(r, ε)"""
    plane = y.data if isinstance(y, Measurement) else np.asarray(y, dtype=np.float64)
    _check_plane(plane, masks)
    return masks.data * (plane / np.maximum(masks.gram, eps))[None]
