"""Shared fixtures."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from sci_pnp.config import get_settings
from sci_pnp.core import CfaOperator, MaskStack, VideoCube, encode
from sci_pnp.io import gen_synthetic, make_masks
from sci_pnp.priors import CnnDenoiser, init_params

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def gray_instance(rng: np.random.Generator):
    """(truth, masks, y)：4 帧 8x8 灰度，灰度掩模"""
    truth = VideoCube(rng.random((4, 1, 8, 8)))
    masks = MaskStack(rng.uniform(0.1, 1.0, size=(4, 8, 8)))
    return truth, masks, encode(truth, masks)


@pytest.fixture
def color_instance(rng: np.random.Generator):
    """(truth, masks, y, cfa)：3 帧 8x8 RGB，二值掩模"""
    truth = VideoCube(rng.random((3, 3, 8, 8)))
    masks = MaskStack((rng.random((3, 8, 8)) < 0.5).astype(float))
    cfa = CfaOperator.for_shape((8, 8))
    return truth, masks, encode(truth, masks, cfa=cfa), cfa


@pytest.fixture
def color_scene():
    """32x32 彩色 orbits 场景 + 二值掩模 + 测量"""
    truth = gen_synthetic("color_orbits", 32, 32, 4, seed=3)
    masks = make_masks(32, 32, 4, seed=3)
    cfa = CfaOperator.for_shape(truth.frame_shape)
    return truth, masks, encode(truth, masks, cfa=cfa), cfa


def scalar_gain_denoiser(channels: int, gain: float = 1.0) -> CnnDenoiser:
    """单层线性卷积的玩具先验：输出 = noisy − (1 − gain)·noisy（仅中心抽头）"""
    params = init_params(channels + 1, channels, width=1, depth=1, seed=0, name="denoiser")
    layer = params.layers[0]
    for c in range(channels):
        layer.weight[c, c, 1, 1] = 1.0 - gain
    return CnnDenoiser(params)


@pytest.fixture
def gain_denoiser():
    """scalar_gain_denoiser 工厂"""
    return scalar_gain_denoiser


@pytest.fixture
def cli_env(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    """CLI 测试环境：固定配置路径、输出目录到 tmp_path"""
    monkeypatch.setenv("SCI_PNP_PRESETS_CONFIG_PATH", str(REPO_ROOT / "config" / "presets.yaml"))
    monkeypatch.setenv("SCI_PNP_SCHEDULES_CONFIG_PATH", str(REPO_ROOT / "config" / "schedules.yaml"))
    monkeypatch.setenv("SCI_PNP_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SCI_PNP_LOG_LEVEL", "WARNING")
    monkeypatch.delenv("SCI_PNP_DATA_DIR", raising=False)
    get_settings.cache_clear()
    yield tmp_path
    get_settings.cache_clear()
