"""Online-adaptive PnP: fine-tune the plugged prior against measurement consistency."""

from __future__ import annotations

import copy
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from sci_pnp.core.operators import adjoint_h, adjoint_tm, apply_h, apply_tm
from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.priors.base import Demosaicer, Denoiser, TrainablePrior
from sci_pnp.priors.convnet import PriorParams
from sci_pnp.solvers.admm import TwoStageADMM
from sci_pnp.solvers.state import (
    IterationRecord,
    ProgressUpdate,
    Schedule,
    SolveResult,
    SolverConfig,
    SolverState,
)

logger = logging.getLogger(__name__)

EventKind = Literal["update", "backtracked", "skipped", "nonfinite_gradient", "noop"]
UpdateTarget = Literal["denoiser", "demosaicer"]


class OnlineConfig(BaseModel):
    """在线更新配置"""

    interval: int = Field(default=10, ge=1, description="更新间隔 K₀（迭代）")
    warmup: int = Field(default=15, ge=0, description="首次更新前跳过的迭代数")
    lr: float = Field(default=1e-6, ge=0.0, description="学习率（0 时不更新）")
    updates_per_trigger: int = Field(default=1, ge=1, description="每次触发的 SGD 步数")
    backtracking: bool = Field(default=True, description="损失上升时回溯减半学习率")
    max_backtracks: int = Field(default=5, ge=0, description="最大回溯次数")
    adapt_demosaicer: bool = Field(default=False, description="同时更新去马赛克网络")

    def should_update(self, k: int) -> bool:
        """mod(k, K₀) = 0 且 k > warmup"""
        return k % self.interval == 0 and k > self.warmup


@dataclass
class OnlineStepResult:
    """单次 online_step 结果"""

    loss_before: float
    loss_after: float
    event: EventKind
    lr: float = 0.0


@dataclass
class UpdateEvent:
    """在线更新事件记录"""

    iteration: int
    target: UpdateTarget
    event: EventKind
    loss_before: float
    loss_after: float
    lr: float

    def as_dict(self) -> dict[str, object]:
        return {
            "iteration": self.iteration,
            "target": self.target,
            "event": self.event,
            "loss_before": self.loss_before,
            "loss_after": self.loss_after,
            "lr": self.lr,
        }


def online_loss(
    y: Measurement | np.ndarray,
    masks: MaskStack,
    x_k: np.ndarray,
    cfa: CfaOperator | None = None,
) -> float:
    """ℓ = ‖y − H T_M x‖²（灰度时 T_M = I）"""
    plane = y.data if isinstance(y, Measurement) else np.asarray(y, dtype=np.float64)
    residual = plane - apply_h(apply_tm(np.asarray(x_k, dtype=np.float64), cfa), masks)
    return float(np.sum(residual**2))


def loss_gradient(
    y: np.ndarray,
    masks: MaskStack,
    x_k: np.ndarray,
    cfa: CfaOperator | None = None,
) -> np.ndarray:
    """∂ℓ/∂x = −2 T_Mᵀ Hᵀ (y − H T_M x)"""
    residual = y - apply_h(apply_tm(x_k, cfa), masks)
    return -2.0 * adjoint_tm(adjoint_h(residual, masks), cfa)


def _snapshot(params: list[PriorParams]) -> list[list[np.ndarray]]:
    return [[a.copy() for a in p.arrays()] for p in params]


def _restore(params: list[PriorParams], snapshot: list[list[np.ndarray]], steps: list[int]) -> None:
    for p, arrays, step in zip(params, snapshot, steps, strict=True):
        p.load_arrays(arrays)
        p.step = step


def _descend(
    prior: TrainablePrior,
    y: np.ndarray,
    masks: MaskStack,
    inputs: np.ndarray,
    sigma: float,
    lr: float,
    updates: int,
    cfa: CfaOperator | None,
) -> bool:
    """执行 updates 步 SGD；梯度非有限时返回 False（参数未改动）"""
    params = prior.parameters()
    for _ in range(updates):
        out = prior.forward(inputs, sigma)
        prior.zero_grad()
        prior.backward(inputs, sigma, loss_gradient(y, masks, out, cfa))
        if not all(p.grads_finite() for p in params):
            return False
        for p in params:
            p.sgd_step(lr)
    return True


def online_step(
    prior: TrainablePrior,
    y: Measurement | np.ndarray,
    masks: MaskStack,
    inputs: np.ndarray,
    sigma: float,
    lr: float,
    cfa: CfaOperator | None = None,
    updates: int = 1,
    backtracking: bool = True,
    max_backtracks: int = 5,
) -> OnlineStepResult:
    """
    在线更新先验参数

    损失取先验输出处的 ℓ；梯度在先验输入处截断（上游求解变量视为常数）。

    Args:
        prior: 可训练先验（原地更新）
        y: 测量
        masks: 掩模
        inputs: 与 v 子问题相同的输入 x − w/τ（去马赛克器为 q + u/ρ）
        sigma: 噪声水平
        lr: 学习率
        cfa: CFA
        updates: SGD 步数
        backtracking: 损失上升时最多回溯 max_backtracks 次，仍上升则跳过
        max_backtracks: 最大回溯次数

    Returns:
        OnlineStepResult；非有限梯度时保持原参数并标记事件
    """
    plane = y.data if isinstance(y, Measurement) else np.asarray(y, dtype=np.float64)
    loss_before = online_loss(plane, masks, prior.forward(inputs, sigma), cfa)
    if lr == 0.0:
        return OnlineStepResult(loss_before, loss_before, "noop", 0.0)

    params = prior.parameters()
    snapshot = _snapshot(params)
    steps = [p.step for p in params]

    if not _descend(prior, plane, masks, inputs, sigma, lr, updates, cfa):
        _restore(params, snapshot, steps)
        logger.warning("在线更新梯度非有限，保持原参数")
        return OnlineStepResult(loss_before, loss_before, "nonfinite_gradient", 0.0)

    loss_after = online_loss(plane, masks, prior.forward(inputs, sigma), cfa)
    if not backtracking or loss_after <= loss_before:
        return OnlineStepResult(loss_before, loss_after, "update", lr)

    trial_lr = lr
    for _ in range(max_backtracks):
        trial_lr /= 2.0
        _restore(params, snapshot, steps)
        if not _descend(prior, plane, masks, inputs, sigma, trial_lr, updates, cfa):
            break
        loss_after = online_loss(plane, masks, prior.forward(inputs, sigma), cfa)
        if loss_after <= loss_before:
            logger.debug("在线更新回溯至 lr=%.3e", trial_lr)
            return OnlineStepResult(loss_before, loss_after, "backtracked", trial_lr)

    _restore(params, snapshot, steps)
    logger.debug("在线更新未降低损失，跳过")
    return OnlineStepResult(loss_before, loss_before, "skipped", 0.0)


class AdaptivePnP(TwoStageADMM):
    """在线自适应 PnP：每 K₀ 次迭代（预热后）更新一次先验权重"""

    solver_name = "adaptive"

    def __init__(
        self,
        config: SolverConfig | None = None,
        denoiser: Denoiser | None = None,
        demosaicer: Demosaicer | None = None,
        online: OnlineConfig | None = None,
        warm_start_denoiser: Denoiser | None = None,
        on_step_callback: Callable[[IterationRecord], None] | None = None,
        on_progress_callback: Callable[[ProgressUpdate], None] | None = None,
    ) -> None:
        super().__init__(
            config=config,
            denoiser=denoiser,
            demosaicer=demosaicer,
            warm_start_denoiser=warm_start_denoiser,
            on_step_callback=on_step_callback,
            on_progress_callback=on_progress_callback,
        )
        self.online = online or OnlineConfig()
        self.events: list[UpdateEvent] = []
        if not isinstance(self.denoiser, TrainablePrior):
            logger.info("去噪器 %s 不可训练，在线更新仅记录损失", self.denoiser.name)

    def _apply(
        self,
        target: UpdateTarget,
        prior: TrainablePrior,
        inputs: np.ndarray,
        y: np.ndarray,
        masks: MaskStack,
        cfa: CfaOperator | None,
        sigma: float,
        k: int,
    ) -> UpdateEvent:
        result = online_step(
            prior,
            y,
            masks,
            inputs,
            sigma,
            self.online.lr,
            cfa=cfa,
            updates=self.online.updates_per_trigger,
            backtracking=self.online.backtracking,
            max_backtracks=self.online.max_backtracks,
        )
        event = UpdateEvent(
            iteration=k,
            target=target,
            event=result.event,
            loss_before=result.loss_before,
            loss_after=result.loss_after,
            lr=result.lr,
        )
        self.events.append(event)
        logger.info(
            "online %s k=%d %s: ℓ %.4e -> %.4e",
            target,
            k,
            result.event,
            result.loss_before,
            result.loss_after,
        )
        return event

    def _after_iteration(
        self,
        state: SolverState,
        y: np.ndarray,
        masks: MaskStack,
        cfa: CfaOperator | None,
        sigma: float,
        record: IterationRecord,
    ) -> None:
        record.loss = online_loss(y, masks, state.v, cfa)
        k = state.k
        if not self.online.should_update(k):
            return

        self._emit(k, "online")
        kinds: list[str] = []
        if isinstance(self.denoiser, TrainablePrior) and self._denoiser_input is not None:
            event = self._apply(
                "denoiser", self.denoiser, self._denoiser_input, y, masks, cfa, sigma, k
            )
            kinds.append(event.event)
        if (
            self.online.adapt_demosaicer
            and isinstance(self.demosaicer, TrainablePrior)
            and self._demosaic_input is not None
        ):
            event = self._apply(
                "demosaicer", self.demosaicer, self._demosaic_input, y, masks, cfa, sigma, k
            )
            kinds.append(event.event)
        if kinds:
            record.update_event = "+".join(kinds)


@dataclass
class AdaptiveSolveResult(SolveResult):
    """自适应求解结果：附带更新事件与自适应后的先验"""

    events: list[UpdateEvent] = field(default_factory=list)
    denoiser: Denoiser | None = None
    demosaicer: Demosaicer | None = None

    @property
    def update_count(self) -> int:
        return sum(1 for e in self.events if e.event in ("update", "backtracked"))


def _clone_prior(prior: Denoiser | Demosaicer | None) -> Denoiser | Demosaicer | None:
    if prior is None or not isinstance(prior, TrainablePrior):
        return prior
    clone = getattr(prior, "clone", None)
    return clone() if callable(clone) else copy.deepcopy(prior)


def adaptive_solve(
    y: Measurement,
    masks: MaskStack,
    denoiser: Denoiser,
    schedule: Schedule,
    online: OnlineConfig | None = None,
    cfa: CfaOperator | None = None,
    demosaicer: Demosaicer | None = None,
    config: SolverConfig | None = None,
    truth: VideoCube | None = None,
    on_step_callback: Callable[[IterationRecord], None] | None = None,
) -> AdaptiveSolveResult:
    """
    自适应求解

    调用方的先验不会被修改：可训练先验在求解前克隆，自适应后的副本随结果返回。
    """
    engine = AdaptivePnP(
        config=config,
        denoiser=_clone_prior(denoiser),  # type: ignore[arg-type]
        demosaicer=_clone_prior(demosaicer),  # type: ignore[arg-type]
        online=online,
        on_step_callback=on_step_callback,
    )
    result = engine.solve(y, masks, schedule, cfa=cfa, truth=truth)
    return AdaptiveSolveResult(
        cube=result.cube,
        trace=result.trace,
        solver=result.solver,
        iterations=result.iterations,
        seconds=result.seconds,
        stopped_early=result.stopped_early,
        state=result.state,
        events=engine.events,
        denoiser=engine.denoiser,
        demosaicer=engine.demosaicer,
    )
