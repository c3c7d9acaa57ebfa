"""Solver state, configuration and trace records."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from sci_pnp.core.types import VideoCube
from sci_pnp.errors import ConfigError

logger = logging.getLogger(__name__)

DualSign = Literal["consistent", "as_printed"]
Phase = Literal["q", "x", "v", "w", "u", "online", "gap"]


class SchedulePhase(BaseModel):
    """σ 调度的一段"""

    sigma: float = Field(gt=0.0, description="噪声水平（0-255 尺度）")
    iters: int = Field(ge=1, description="该段迭代次数")


class Schedule(BaseModel):
    """σ 调度：有序 (σ, 迭代次数) 段"""

    name: str = Field(default="custom", description="调度名称")
    phases: list[SchedulePhase] = Field(min_length=1)

    @model_validator(mode="after")
    def _warn_non_decreasing(self) -> Schedule:
        sigmas = [p.sigma for p in self.phases]
        if any(b >= a for a, b in zip(sigmas, sigmas[1:], strict=False)):
            logger.warning("调度 %s 的 σ 未严格递减: %s", self.name, sigmas)
        return self

    @classmethod
    def from_pairs(cls, pairs: list[tuple[float, int]], name: str = "custom") -> Schedule:
        return cls(name=name, phases=[SchedulePhase(sigma=s, iters=n) for s, n in pairs])

    @property
    def total_iters(self) -> int:
        """迭代预算 K_max"""
        return sum(p.iters for p in self.phases)

    def sigmas(self) -> list[float]:
        """逐次迭代的 σ 序列（长度 K_max）"""
        out: list[float] = []
        for p in self.phases:
            out.extend([p.sigma] * p.iters)
        return out

    def sigma_at(self, k: int) -> float:
        """第 k 次迭代（从 1 计）的 σ"""
        if k < 1 or k > self.total_iters:
            raise IndexError(f"迭代 {k} 超出调度范围 1..{self.total_iters}")
        return self.sigmas()[k - 1]


class SolverConfig(BaseModel):
    """求解器配置"""

    rho: float = Field(default=1.0, gt=0.0, description="外层罚参数 ρ")
    tau: float = Field(default=1.0, gt=0.0, description="内层罚参数 τ")
    dual_sign: DualSign = Field(
        default="consistent",
        description="内层对偶更新：consistent 为 w += v − x，as_printed 为 w += x − v",
    )
    early_stop: bool = Field(default=False, description="v 相对变化低于阈值时提前停止")
    early_stop_tol: float = Field(default=1e-5, gt=0.0, description="提前停止阈值")
    warm_start_iters: int = Field(default=0, ge=0, description="初始化后的 GAP-TV 热启动迭代数")
    eps: float = Field(default=1e-8, gt=0.0, description="除法保护 ε")

    @classmethod
    def build(cls, **kwargs: object) -> SolverConfig:
        """校验失败时抛出 ConfigError"""
        try:
            return cls(**kwargs)  # type: ignore[arg-type]
        except ValueError as e:
            raise ConfigError(f"求解器配置非法: {e}") from e


@dataclass
class SolverState:
    """ADMM 变量

    q, u, p: 马赛克域 (B, H, W)；x, v, w: (B, C, H, W)。
    """

    q: np.ndarray
    u: np.ndarray
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    rho: float = 1.0
    tau: float = 1.0
    k: int = 0
    p: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.rho <= 0 or self.tau <= 0:
            raise ConfigError(f"ρ, τ 必须为正，实际 ρ={self.rho}, τ={self.tau}")
        if self.u.shape != self.q.shape:
            raise ValueError("u 与 q 形状不一致")
        if not (self.v.shape == self.w.shape == self.x.shape):
            raise ValueError("x, v, w 形状不一致")

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (self.q, self.u, self.x, self.v, self.w))

    def copy(self) -> SolverState:
        return SolverState(
            q=self.q.copy(),
            u=self.u.copy(),
            x=self.x.copy(),
            v=self.v.copy(),
            w=self.w.copy(),
            rho=self.rho,
            tau=self.tau,
            k=self.k,
            p=None if self.p is None else self.p.copy(),
        )


class IterationRecord(BaseModel):
    """单次迭代 trace"""

    iter: int
    sigma: float
    fidelity: float = Field(description="‖y − H T_M x‖₂")
    primal_q: float | None = Field(default=None, description="‖q − T_M x‖")
    primal_x: float | None = Field(default=None, description="‖x − v‖")
    psnr: float | None = Field(
        default=None,
        serialization_alias="psnr_if_truth_given",
        description="给定真值时的 PSNR (dB)",
    )
    loss: float | None = Field(default=None, description="在线损失 ℓ")
    update_event: str | None = Field(default=None, description="在线更新事件")


class ProgressUpdate(BaseModel):
    """进度更新"""

    iteration: int
    phase: Phase
    message: str = ""


# CSV 列名（序列化别名）
TRACE_COLUMNS = ("iter", "sigma", "fidelity", "primal_q", "primal_x", "psnr_if_truth_given")
ADAPTIVE_COLUMNS = (*TRACE_COLUMNS, "loss", "update_event")


@dataclass
class SolveResult:
    """重建结果"""

    cube: VideoCube
    trace: list[IterationRecord] = field(default_factory=list)
    solver: str = ""
    iterations: int = 0
    seconds: float = 0.0
    stopped_early: bool = False
    state: SolverState | None = None

    @property
    def final_fidelity(self) -> float:
        return self.trace[-1].fidelity if self.trace else float("nan")

    def trace_rows(self, adaptive: bool = False) -> list[dict[str, object]]:
        columns = ADAPTIVE_COLUMNS if adaptive else TRACE_COLUMNS
        rows = [r.model_dump(by_alias=True) for r in self.trace]
        return [{c: row[c] for c in columns} for row in rows]
