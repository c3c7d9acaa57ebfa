"""PSNR / SSIM on [0, 1] data."""

from __future__ import annotations

import numpy as np
from skimage.metrics import structural_similarity

from sci_pnp.errors import ShapeMismatchError

PSNR_CAP_DB = 100.0
PSNR_METHOD = "per_frame_mean"

# SSIM 常数（L = 1）
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_WINDOW = 11


def _pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"形状不一致: {a.shape} vs {b.shape}")
    return a, b


def _frame_psnr(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(1.0 / mse)))


def frame_psnr(a: np.ndarray, b: np.ndarray) -> list[float]:
    """逐帧 PSNR；首轴为帧（2 维输入视为单帧）"""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    diff = (a - b).reshape(a.shape[0], -1)
    return [_frame_psnr(float(m)) for m in np.mean(diff * diff, axis=1)]


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """逐帧 MSE → 逐帧 PSNR → 取平均（上限 100 dB）"""
    return float(np.mean(frame_psnr(a, b)))


def _win_size(shape: tuple[int, ...]) -> int | None:
    """边长不足 11 时取不超过边长的最大奇数（高斯权重不变，仅缩小边界裁剪）"""
    side = min(shape)
    if side >= SSIM_WINDOW:
        return None
    return side if side % 2 == 1 else side - 1


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    单帧 SSIM

    高斯窗 σ=1.5（11×11），K1=0.01，K2=0.03，L=1；
    输入 (H, W) 或 (C, H, W)，彩色取通道平均。
    小于 11 像素的帧同样可评估，边界裁剪随之缩小。
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ShapeMismatchError(f"ssim 需要 (H, W) 或 (C, H, W)，实际 {a.shape}")
    win_size = _win_size(a.shape[-2:])
    scores = [
        structural_similarity(
            a[c],
            b[c],
            win_size=win_size,
            data_range=1.0,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
        for c in range(a.shape[0])
    ]
    return float(np.mean(scores))


def frame_ssim(a: np.ndarray, b: np.ndarray) -> list[float]:
    """逐帧 SSIM；输入 (B, H, W) 或 (B, C, H, W)"""
    a, b = _pair(a, b)
    if a.ndim not in (3, 4):
        raise ShapeMismatchError(f"frame_ssim 需要 3 或 4 维，实际 {a.shape}")
    return [ssim(a[i], b[i]) for i in range(a.shape[0])]


def cube_ssim(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(frame_ssim(a, b)))
