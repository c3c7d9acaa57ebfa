"""Fixed-stencil demosaicers: bilinear and gradient-corrected (Malvar 2004).

全部为线性算子；边界采用 scipy.ndimage 的 mirror 模式（与 numpy reflect 相同，
保持 Bayer 相位）。
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from sci_pnp.core.operators import cfa_sampling_mask, mosaic_adjoint
from sci_pnp.errors import CfaError, ShapeMismatchError

from .base import Demosaicer

_BORDER = "mirror"

H_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4.0
H_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4.0

# G at R/B sites
GR_GB = (
    np.array(
        [
            [0, 0, -1, 0, 0],
            [0, 0, 2, 0, 0],
            [-1, 2, 4, 2, -1],
            [0, 0, 2, 0, 0],
            [0, 0, -1, 0, 0],
        ],
        dtype=np.float64,
    )
    / 8.0
)

# R at G in R row / B at G in B row
RG_RB_BG_BR = (
    np.array(
        [
            [0, 0, 0.5, 0, 0],
            [0, -1, 0, -1, 0],
            [-1, 4, 5, 4, -1],
            [0, -1, 0, -1, 0],
            [0, 0, 0.5, 0, 0],
        ],
        dtype=np.float64,
    )
    / 8.0
)

# R at G in B row / B at G in R row
RG_BR_BG_RB = RG_RB_BG_BR.T.copy()

# R at B sites / B at R sites
RB_BB_BR_RR = (
    np.array(
        [
            [0, 0, -1.5, 0, 0],
            [0, 2, 0, 2, 0],
            [-1.5, 0, 6, 0, -1.5],
            [0, 2, 0, 2, 0],
            [0, 0, -1.5, 0, 0],
        ],
        dtype=np.float64,
    )
    / 8.0
)

MALVAR_MIN_SIZE = 6


def _as_stack(plane: np.ndarray) -> tuple[np.ndarray, bool]:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim == 2:
        return plane[None], True
    if plane.ndim != 3:
        raise ShapeMismatchError(f"马赛克输入需要 (H, W) 或 (B, H, W)，实际 {plane.shape}")
    return plane, False


def _correlate(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.correlate(plane, kernel, mode=_BORDER)


def _bilinear_frame(plane: np.ndarray) -> np.ndarray:
    sparse = mosaic_adjoint(plane)
    return np.stack(
        [
            _correlate(sparse[0], H_RB),
            _correlate(sparse[1], H_G),
            _correlate(sparse[2], H_RB),
        ]
    )


def demosaic_bilinear(mosaic_plane: np.ndarray) -> np.ndarray:
    """逐通道双线性插值；采样位置保持原值。(H, W) -> (3, H, W)，(B, H, W) -> (B, 3, H, W)"""
    stack, single = _as_stack(mosaic_plane)
    out = np.stack([_bilinear_frame(frame) for frame in stack])
    return out[0] if single else out


def _malvar_frame(plane: np.ndarray) -> np.ndarray:
    s = cfa_sampling_mask(plane.shape)
    r_site, g_site, b_site = s[0] > 0, s[1] > 0, s[2] > 0

    rows = np.arange(plane.shape[0])[:, None] % 2 == 0
    r_row = np.broadcast_to(rows, plane.shape)
    b_row = ~r_row

    g_interp = _correlate(plane, GR_GB)
    horizontal = _correlate(plane, RG_RB_BG_BR)
    vertical = _correlate(plane, RG_BR_BG_RB)
    diagonal = _correlate(plane, RB_BB_BR_RR)

    red = np.where(r_site, plane, 0.0)
    green = np.where(g_site, plane, g_interp)
    blue = np.where(b_site, plane, 0.0)

    red = np.where(r_row & g_site, horizontal, red)
    red = np.where(b_row & g_site, vertical, red)
    red = np.where(b_site, diagonal, red)

    blue = np.where(b_row & g_site, horizontal, blue)
    blue = np.where(r_row & g_site, vertical, blue)
    blue = np.where(r_site, diagonal, blue)

    return np.stack([red, green, blue])


def demosaic_malvar(mosaic_plane: np.ndarray) -> np.ndarray:
    """梯度校正线性插值（5x5 定点模板 /8）"""
    stack, single = _as_stack(mosaic_plane)
    h, w = stack.shape[-2:]
    if h % 2 or w % 2:
        raise CfaError(f"去马赛克需要偶数尺寸，实际 {h}x{w}")
    if h < MALVAR_MIN_SIZE or w < MALVAR_MIN_SIZE:
        raise ShapeMismatchError(f"Malvar 模板需要至少 {MALVAR_MIN_SIZE}x{MALVAR_MIN_SIZE} 输入")
    out = np.stack([_malvar_frame(frame) for frame in stack])
    return out[0] if single else out


class IdentityDemosaicer(Demosaicer):
    """灰度路径：T_M = I，(B, H, W) -> (B, 1, H, W)"""

    @property
    def name(self) -> str:
        return "identity"

    @property
    def channels(self) -> int:
        return 1

    def __call__(self, mosaic_stack: np.ndarray) -> np.ndarray:
        return np.asarray(mosaic_stack, dtype=np.float64)[:, None].copy()


class BilinearDemosaicer(Demosaicer):
    @property
    def name(self) -> str:
        return "bilinear"

    def __call__(self, mosaic_stack: np.ndarray) -> np.ndarray:
        return demosaic_bilinear(mosaic_stack)


class MalvarDemosaicer(Demosaicer):
    @property
    def name(self) -> str:
        return "malvar"

    def __call__(self, mosaic_stack: np.ndarray) -> np.ndarray:
        return demosaic_malvar(mosaic_stack)
