"""Factory for creating denoisers and demosaicers."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .base import DdnetSpec, Demosaicer, Denoiser, DenoiserSpec
from .cnn_denoiser import CnnDenoiser
from .ddnet import DdnetDemosaicer
from .demosaic import BilinearDemosaicer, MalvarDemosaicer
from .tv import IdentityDenoiser, TvDenoiser

if TYPE_CHECKING:
    from sci_pnp.config import RunConfig


def create_denoiser(
    kind: str,
    spec: DenoiserSpec | None = None,
    channels: int = 1,
    seed: int = 0,
) -> Denoiser:
    """
    创建去噪器

    Args:
        kind: 类型 (tv, tv3d, cnn, identity)
        spec: 去噪器配置
        channels: 图像通道数（CNN 用）
        seed: 初始化种子

    Returns:
        去噪器实例
    """
    kind = kind.lower()
    spec = spec or DenoiserSpec()

    if kind == "tv":
        return TvDenoiser.from_spec(spec)
    elif kind == "tv3d":
        return TvDenoiser(weight=spec.tv_weight, iters=spec.tv_iters, axes="spatiotemporal")
    elif kind == "cnn":
        return CnnDenoiser.from_spec(spec, channels=channels, seed=seed)
    elif kind == "identity":
        return IdentityDenoiser()
    else:
        raise ValueError(f"不支持的去噪器: {kind}")


def create_demosaicer(
    kind: str,
    color: bool = True,
    spec: DdnetSpec | None = None,
    seed: int = 0,
) -> Demosaicer | None:
    """
    创建去马赛克器

    "closed" 返回 None（x 子问题走闭式解）；灰度时 T_M = I，一律返回 None。
    """
    kind = kind.lower()
    if not color:
        return None

    if kind == "closed":
        return None
    elif kind == "bilinear":
        return BilinearDemosaicer()
    elif kind == "malvar":
        return MalvarDemosaicer()
    elif kind == "ddnet":
        return DdnetDemosaicer.create(spec, seed=seed)
    else:
        raise ValueError(f"不支持的去马赛克器: {kind}")


def create_priors_from_config(
    config: "RunConfig",
    color: bool,
) -> tuple[Denoiser, Demosaicer | None]:
    """根据 RunConfig 创建 (去噪器, 去马赛克器)；检查点由调用方加载"""
    spec = config.denoiser_spec()
    denoiser = create_denoiser(
        config.denoiser,
        spec=spec,
        channels=3 if color else 1,
        seed=config.seed,
    )
    demosaicer = create_demosaicer(
        config.demosaicer,
        color=color,
        spec=config.ddnet_spec(),
        seed=config.seed,
    )
    return denoiser, demosaicer
