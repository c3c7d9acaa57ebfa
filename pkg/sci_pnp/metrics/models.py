"""Evaluation report models."""

from __future__ import annotations

from pydantic import BaseModel, Field

from .quality import PSNR_CAP_DB, PSNR_METHOD


class FrameScore(BaseModel):
    """单帧指标"""

    frame: int
    psnr_db: float = Field(le=PSNR_CAP_DB)
    ssim: float = Field(ge=-1.0, le=1.0)


class EvalReport(BaseModel):
    """单个测量的评估记录"""

    scene: str
    solver: str
    measurement: int = Field(default=0, description="场景内测量序号")
    psnr_db: float = Field(description="逐帧 PSNR 的平均 (dB)")
    ssim: float = Field(ge=-1.0, le=1.0, description="逐帧 SSIM 的平均")
    seconds: float = Field(default=0.0, description="求解耗时")
    iterations: int = Field(default=0)
    official: bool = Field(default=False, description="是否使用官方掩模")
    config_digest: str | None = Field(default=None)
    psnr_method: str = Field(default=PSNR_METHOD)
    frames: list[FrameScore] = Field(default_factory=list)


class SceneRow(BaseModel):
    """按场景聚合的一行（对应 CSV 一行）"""

    scene: str
    solver: str
    psnr_db: float
    ssim: float
    seconds: float
    iterations: int
    official: bool


class BenchmarkSummary(BaseModel):
    """benchmark 汇总"""

    solver: str
    scene_count: int
    measurement_count: int
    mean_psnr_db: float
    mean_ssim: float
    total_seconds: float
    official: bool
    config_digest: str | None = None
    psnr_method: str = PSNR_METHOD
    rows: list[SceneRow] = Field(default_factory=list)
    reports: list[EvalReport] = Field(default_factory=list)
