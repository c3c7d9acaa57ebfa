"""Two-stage PnP-ADMM engine.

外层在 q（SCI 保真）与 x（场景）之间分裂，内层在 x（去马赛克）与 v（去噪）之间分裂。
每次迭代的更新顺序：q → x → v → w → u。
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable

import numpy as np

from sci_pnp.core.operators import (
    adjoint_h,
    adjoint_tm,
    apply_h,
    apply_tm,
    init_estimate,
    sampling_indicator,
)
from sci_pnp.core.types import CfaOperator, MaskStack, Measurement, VideoCube
from sci_pnp.errors import CfaError, ShapeMismatchError
from sci_pnp.metrics.quality import psnr
from sci_pnp.priors.base import Demosaicer, Denoiser
from sci_pnp.priors.demosaic import demosaic_bilinear
from sci_pnp.priors.tv import TvDenoiser

from .gap import gap_iterations, resolve_cfa
from .state import (
    IterationRecord,
    Phase,
    ProgressUpdate,
    Schedule,
    SolveResult,
    SolverConfig,
    SolverState,
)

logger = logging.getLogger(__name__)


def q_update(state: SolverState, y: np.ndarray, masks: MaskStack, cfa: CfaOperator | None = None) -> np.ndarray:
    """p = T_M x − u/ρ；q = p + Hᵀ[(y − Hp)/(ρ + r)]"""
    p = apply_tm(state.x, cfa) - state.u / state.rho
    state.p = p
    return p + adjoint_h((y - apply_h(p, masks)) / (state.rho + masks.gram), masks)


def u_update(state: SolverState, cfa: CfaOperator | None = None) -> np.ndarray:
    """u ← u + (q − T_M x)"""
    return state.u + (state.q - apply_tm(state.x, cfa))


def x_update_closed(state: SolverState, cfa: CfaOperator | None = None) -> np.ndarray:
    """x = [ρ T_MᵀT_M + τI]⁻¹ [ρ T_Mᵀ q + T_Mᵀ u + τ v + w]（逐像素）"""
    s = sampling_indicator(cfa, state.q.shape[-2:])  # type: ignore[arg-type]
    rhs = state.rho * adjoint_tm(state.q, cfa) + adjoint_tm(state.u, cfa) + state.tau * state.v + state.w
    return rhs / (state.rho * s + state.tau)


def x_update_demosaic(state: SolverState, demosaicer: Demosaicer) -> np.ndarray:
    """x = D_M(q + u/ρ)"""
    return demosaicer(state.q + state.u / state.rho)


def denoiser_input(state: SolverState) -> np.ndarray:
    """v 子问题的输入 x − w/τ"""
    return state.x - state.w / state.tau


def v_update(state: SolverState, denoiser: Denoiser, sigma: float) -> np.ndarray:
    """v = D_σ(x − w/τ)"""
    return denoiser(denoiser_input(state), sigma)


def w_update(state: SolverState, as_printed: bool = False) -> np.ndarray:
    """
    内层对偶更新

    as_printed=False: w ← w + (v − x)，与 x、v 子问题的拉格朗日项同号
    as_printed=True:  w ← w + (x − v)，此时对偶以 (1 + 1/τ) 的比例增长
    """
    if as_printed:
        return state.w + (state.x - state.v)
    return state.w + (state.v - state.x)


def measurement_residual(y: np.ndarray, masks: MaskStack, cube: np.ndarray, cfa: CfaOperator | None) -> np.ndarray:
    """y − H T_M x"""
    return y - apply_h(apply_tm(cube, cfa), masks)


class TwoStageADMM:
    """两级 PnP-ADMM 求解器"""

    solver_name = "two_stage_admm"

    def __init__(
        self,
        config: SolverConfig | None = None,
        denoiser: Denoiser | None = None,
        demosaicer: Demosaicer | None = None,
        warm_start_denoiser: Denoiser | None = None,
        on_step_callback: Callable[[IterationRecord], None] | None = None,
        on_progress_callback: Callable[[ProgressUpdate], None] | None = None,
    ) -> None:
        self.config = config or SolverConfig()
        self.denoiser = denoiser or TvDenoiser()
        self.demosaicer = demosaicer
        self.warm_start_denoiser = warm_start_denoiser or TvDenoiser()
        self.on_step_callback = on_step_callback
        self.on_progress_callback = on_progress_callback

        self.state: SolverState | None = None
        self._denoiser_input: np.ndarray | None = None
        self._demosaic_input: np.ndarray | None = None
        self._cancelled = False

    def cancel(self) -> None:
        """取消求解（当前迭代结束后停止）"""
        self._cancelled = True

    def _emit(self, k: int, phase: Phase, message: str = "") -> None:
        if self.on_progress_callback:
            self.on_progress_callback(ProgressUpdate(iteration=k, phase=phase, message=message))

    def initial_state(
        self,
        y: Measurement,
        masks: MaskStack,
        cfa: CfaOperator | None,
        first_sigma: float,
    ) -> SolverState:
        """q₀ = 初值估计（可选 GAP-TV 热启动）；x₀ = v₀ 由 q₀ 得到；u₀ = w₀ = 0"""
        color = cfa is not None
        q0 = init_estimate(y, masks, self.config.eps)
        if self.config.warm_start_iters > 0:
            q0 = gap_iterations(
                q0,
                y.data,
                masks,
                self.warm_start_denoiser,
                [first_sigma] * self.config.warm_start_iters,
                color=color,
                eps=self.config.eps,
            )
        x0 = demosaic_bilinear(q0) if color else q0[:, None].copy()
        return SolverState(
            q=q0,
            u=np.zeros_like(q0),
            x=x0,
            v=x0.copy(),
            w=np.zeros_like(x0),
            rho=self.config.rho,
            tau=self.config.tau,
        )

    def step(
        self,
        state: SolverState,
        y: np.ndarray,
        masks: MaskStack,
        cfa: CfaOperator | None,
        sigma: float,
    ) -> None:
        """执行一次完整迭代（原地更新 state）"""
        state.k += 1
        k = state.k

        state.q = q_update(state, y, masks, cfa)
        self._emit(k, "q")

        if self.demosaicer is None:
            state.x = x_update_closed(state, cfa)
        else:
            self._demosaic_input = state.q + state.u / state.rho
            state.x = x_update_demosaic(state, self.demosaicer)
        self._emit(k, "x")

        self._denoiser_input = denoiser_input(state)
        state.v = self.denoiser(self._denoiser_input, sigma)
        self._emit(k, "v")

        state.w = w_update(state, as_printed=self.config.dual_sign == "as_printed")
        self._emit(k, "w")

        state.u = u_update(state, cfa)
        self._emit(k, "u")

    def _record(
        self,
        state: SolverState,
        y: np.ndarray,
        masks: MaskStack,
        cfa: CfaOperator | None,
        sigma: float,
        truth: VideoCube | None,
    ) -> IterationRecord:
        record = IterationRecord(
            iter=state.k,
            sigma=sigma,
            fidelity=float(np.linalg.norm(measurement_residual(y, masks, state.x, cfa))),
            primal_q=float(np.linalg.norm(state.q - apply_tm(state.x, cfa))),
            primal_x=float(np.linalg.norm(state.x - state.v)),
        )
        if truth is not None:
            record.psnr = psnr(truth.data, np.clip(state.v, 0.0, 1.0))
        return record

    def _after_iteration(
        self,
        state: SolverState,
        y: np.ndarray,
        masks: MaskStack,
        cfa: CfaOperator | None,
        sigma: float,
        record: IterationRecord,
    ) -> None:
        """子类钩子（在线自适应在此更新先验）"""
        pass

    def _check_priors(self, cfa: CfaOperator | None) -> None:
        if self.demosaicer is not None:
            expected = 3 if cfa is not None else 1
            if self.demosaicer.channels != expected:
                raise CfaError(f"去马赛克器输出 {self.demosaicer.channels} 通道，需要 {expected}")

    def solve(
        self,
        y: Measurement,
        masks: MaskStack,
        schedule: Schedule,
        cfa: CfaOperator | None = None,
        truth: VideoCube | None = None,
    ) -> SolveResult:
        """
        运行调度预算内的全部迭代

        Args:
            y: 测量
            masks: 掩模
            schedule: σ 调度
            cfa: CFA（Bayer 测量缺省时推断）
            truth: 真值（给定时记录 PSNR）

        Returns:
            SolveResult，输出为裁剪到 [0, 1] 的 v
        """
        cfa = resolve_cfa(y, masks, cfa)
        self._check_priors(cfa)
        if truth is not None and truth.data.shape[0] != masks.frames:
            raise ShapeMismatchError("真值帧数与掩模不一致")

        self._cancelled = False
        start = time.perf_counter()
        sigmas = schedule.sigmas()
        state = self.initial_state(y, masks, cfa, sigmas[0])
        self.state = state
        trace: list[IterationRecord] = []
        stopped_early = False

        for sigma in sigmas:
            if self._cancelled:
                logger.info("求解已取消 (k=%d)", state.k)
                break

            v_prev = state.v
            self.step(state, y.data, masks, cfa, sigma)
            record = self._record(state, y.data, masks, cfa, sigma, truth)
            self._after_iteration(state, y.data, masks, cfa, sigma, record)
            trace.append(record)

            if self.on_step_callback:
                self.on_step_callback(record)
            logger.debug(
                "admm iter %d σ=%g fidelity %.4e primal_q %.3e primal_x %.3e",
                record.iter,
                sigma,
                record.fidelity,
                record.primal_q,
                record.primal_x,
            )

            if self.config.early_stop:
                change = np.linalg.norm(state.v - v_prev) / max(float(np.linalg.norm(v_prev)), 1e-12)
                if change < self.config.early_stop_tol:
                    logger.info("提前停止于 k=%d（相对变化 %.2e）", state.k, change)
                    stopped_early = True
                    break

        if not state.is_finite():
            logger.warning("求解结束时状态含非有限值")

        seconds = time.perf_counter() - start
        logger.info("%s: %d iterations in %.2fs", self.solver_name, len(trace), seconds)
        return SolveResult(
            cube=VideoCube(np.clip(state.v, 0.0, 1.0)),
            trace=trace,
            solver=self.solver_name,
            iterations=len(trace),
            seconds=seconds,
            stopped_early=stopped_early,
            state=state,
        )


def two_stage_admm(
    y: Measurement,
    masks: MaskStack,
    denoiser: Denoiser,
    schedule: Schedule,
    cfa: CfaOperator | None = None,
    demosaicer: Demosaicer | None = None,
    rho: float = 1.0,
    tau: float = 1.0,
    truth: VideoCube | None = None,
    **options: object,
) -> SolveResult:
    """函数式入口：demosaicer 为 None 时 x 子问题走闭式解"""
    config = SolverConfig.build(rho=rho, tau=tau, **options)
    engine = TwoStageADMM(config=config, denoiser=denoiser, demosaicer=demosaicer)
    return engine.solve(y, masks, schedule, cfa=cfa, truth=truth)
