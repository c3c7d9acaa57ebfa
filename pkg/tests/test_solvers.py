"""GAP and two-stage PnP-ADMM."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from sci_pnp.core import CfaOperator, MaskStack, Measurement, VideoCube, apply_h, apply_tm, encode, mosaic
from sci_pnp.errors import CfaError, ConfigError, ShapeMismatchError
from sci_pnp.io import gen_synthetic, make_masks
from sci_pnp.metrics import psnr
from sci_pnp.priors import BilinearDemosaicer, IdentityDenoiser, MalvarDemosaicer, TvDenoiser
from sci_pnp.solvers import (
    BUILTIN_SCHEDULES,
    Schedule,
    SolverConfig,
    SolverState,
    TwoStageADMM,
    gap_solve,
    get_schedule,
    load_schedules,
    naive_color_pipeline,
    q_update,
    two_stage_admm,
    u_update,
    v_update,
    w_update,
    x_update_closed,
)


def dense_h(masks: MaskStack) -> np.ndarray:
    return np.hstack([np.diag(m.ravel()) for m in masks.data])


def dense_tm(frames: int, frame_shape: tuple[int, int]) -> np.ndarray:
    """块对角 T_M，输入按 (B, 3, H, W) 展开，输出按 (B, H, W) 展开"""
    n_in = frames * 3 * frame_shape[0] * frame_shape[1]
    cols = []
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        cols.append(mosaic(e.reshape(frames, 3, *frame_shape)).ravel())
    return np.stack(cols, axis=1)


def random_state(rng, frames, shape, channels, rho, tau) -> SolverState:
    return SolverState(
        q=rng.standard_normal((frames, *shape)),
        u=rng.standard_normal((frames, *shape)),
        x=rng.standard_normal((frames, channels, *shape)),
        v=rng.standard_normal((frames, channels, *shape)),
        w=rng.standard_normal((frames, channels, *shape)),
        rho=rho,
        tau=tau,
    )


# ==================== 闭式解对照 ====================


def test_q_update_matches_dense_solve(rng):
    for _ in range(200):
        frames = int(rng.integers(1, 4))
        shape = (2 * int(rng.integers(1, 3)), 2 * int(rng.integers(1, 3)))
        color = bool(rng.integers(0, 2))
        masks = MaskStack(rng.random((frames, *shape)))
        cfa = CfaOperator.for_shape(shape) if color else None
        state = random_state(rng, frames, shape, 3 if color else 1, rho=float(rng.uniform(0.1, 5)), tau=1.0)
        y = rng.standard_normal(shape)

        q = q_update(state, y, masks, cfa)

        h = dense_h(masks)
        p = state.p.ravel()
        lhs = h.T @ h + state.rho * np.eye(h.shape[1])
        expected = np.linalg.solve(lhs, h.T @ y.ravel() + state.rho * p)
        np.testing.assert_allclose(q.ravel(), expected, rtol=1e-8, atol=1e-10)


def test_x_update_closed_matches_dense_solve(rng):
    for _ in range(200):
        frames = int(rng.integers(1, 3))
        shape = (2, 2 * int(rng.integers(1, 3)))
        cfa = CfaOperator.for_shape(shape)
        state = random_state(
            rng, frames, shape, 3, rho=float(rng.uniform(0.1, 5)), tau=float(rng.uniform(0.1, 5))
        )

        x = x_update_closed(state, cfa)

        tm = dense_tm(frames, shape)
        lhs = state.rho * tm.T @ tm + state.tau * np.eye(tm.shape[1])
        rhs = state.rho * tm.T @ state.q.ravel() + tm.T @ state.u.ravel() + state.tau * state.v.ravel() + state.w.ravel()
        np.testing.assert_allclose(x.ravel(), np.linalg.solve(lhs, rhs), rtol=1e-8, atol=1e-10)


def test_x_update_closed_gray_average(rng):
    state = random_state(rng, 2, (4, 4), 1, rho=2.0, tau=0.5)
    expected = (2.0 * state.q[:, None] + state.u[:, None] + 0.5 * state.v + state.w) / 2.5
    np.testing.assert_allclose(x_update_closed(state, None), expected, rtol=1e-14)


def test_dual_updates(rng):
    state = random_state(rng, 2, (4, 4), 1, rho=1.0, tau=1.0)
    np.testing.assert_array_equal(w_update(state), state.w + (state.v - state.x))
    np.testing.assert_array_equal(w_update(state, as_printed=True), state.w + (state.x - state.v))
    np.testing.assert_array_equal(u_update(state, None), state.u + (state.q - state.x[:, 0]))


def test_state_rejects_nonpositive_penalties(rng):
    with pytest.raises(ConfigError):
        random_state(rng, 1, (2, 2), 1, rho=0.0, tau=1.0)
    with pytest.raises(ConfigError):
        SolverConfig.build(tau=-1.0)



# ==================== 子问题最优性 ====================


def perturbations(rng, shape, count=20, scale=1e-3):
    for _ in range(count):
        yield rng.uniform(-scale, scale, size=shape)


def test_q_update_is_minimizer(rng):
    masks = MaskStack(rng.random((3, 4, 6)))
    state = random_state(rng, 3, (4, 6), 1, rho=1.7, tau=1.0)
    y = rng.standard_normal((4, 6))
    q = q_update(state, y, masks)

    def objective(candidate):
        return 0.5 * np.sum((y - apply_h(candidate, masks)) ** 2) + 0.5 * state.rho * np.sum((candidate - state.p) ** 2)

    best = objective(q)
    for delta in perturbations(rng, q.shape):
        assert objective(q + delta) >= best - 1e-12 * max(best, 1.0)


def test_x_update_closed_is_minimizer(rng):
    cfa = CfaOperator.for_shape((4, 4))
    state = random_state(rng, 2, (4, 4), 3, rho=0.8, tau=2.5)
    x = x_update_closed(state, cfa)

    def objective(candidate):
        outer = np.sum((apply_tm(candidate, cfa) - state.q - state.u / state.rho) ** 2)
        inner = np.sum((candidate - state.v - state.w / state.tau) ** 2)
        return 0.5 * state.rho * outer + 0.5 * state.tau * inner

    best = objective(x)
    for delta in perturbations(rng, x.shape):
        assert objective(x + delta) >= best - 1e-12 * max(best, 1.0)


def test_v_update_identity_prior_is_minimizer(rng):
    # 恒等去噪器对应零先验，v 子问题只剩 τ/2‖v − (x − w/τ)‖²
    state = random_state(rng, 2, (4, 4), 3, rho=1.0, tau=0.4)
    v = v_update(state, IdentityDenoiser(), 25.0)

    def objective(candidate):
        return 0.5 * state.tau * np.sum((candidate - state.x + state.w / state.tau) ** 2)

    best = objective(v)
    for delta in perturbations(rng, v.shape):
        assert objective(v + delta) >= best - 1e-12 * max(best, 1.0)


# ==================== 迭代行为 ====================


def test_update_order_is_q_x_v_w_u(gray_instance):
    _, masks, y = gray_instance
    phases: list[tuple[int, str]] = []
    engine = TwoStageADMM(
        denoiser=TvDenoiser(),
        on_progress_callback=lambda p: phases.append((p.iteration, p.phase)),
    )
    engine.solve(y, masks, Schedule.from_pairs([(25.0, 3)]))
    assert phases == [(k, ph) for k in (1, 2, 3) for ph in ("q", "x", "v", "w", "u")]


def test_updates_read_latest_variables(gray_instance):
    _, masks, y = gray_instance
    snapshots: dict[tuple[int, str], dict[str, np.ndarray]] = {}
    engine = TwoStageADMM(config=SolverConfig(rho=2.0, tau=0.5), denoiser=TvDenoiser())

    def grab(update):
        state = engine.state
        snapshots[(update.iteration, update.phase)] = {n: getattr(state, n).copy() for n in "quxvw"}

    engine.on_progress_callback = grab
    engine.solve(y, masks, Schedule.from_pairs([(25.0, 3)]))

    for k in (1, 2, 3):
        # q 阶段的快照里 u, x, v, w 仍是上一轮的值
        prev = snapshots[(k, "q")]
        q_new = prev["q"]
        x_new = snapshots[(k, "x")]["x"]
        v_new = snapshots[(k, "v")]["v"]
        w_new = snapshots[(k, "w")]["w"]
        u_new = snapshots[(k, "u")]["u"]

        before = SolverState(q=q_new, u=prev["u"], x=prev["x"], v=prev["v"], w=prev["w"], rho=2.0, tau=0.5)
        np.testing.assert_allclose(q_update(before.copy(), y.data, masks), q_new, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(x_update_closed(before), x_new, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(v_new, TvDenoiser()(x_new - prev["w"] / 0.5, 25.0))
        np.testing.assert_allclose(w_new, prev["w"] + (v_new - x_new), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(u_new, prev["u"] + (q_new - x_new[:, 0]), rtol=1e-12, atol=1e-14)


def test_gap_identity_fidelity_is_non_increasing(rng):
    truth = VideoCube(rng.random((3, 1, 8, 8)))
    masks_data = rng.uniform(0.1, 1.0, size=(3, 8, 8))
    masks_data[:, :2, :2] = 0.0
    masks = MaskStack(masks_data)
    y = encode(truth, masks, noise_std=0.05, seed=3)
    result = gap_solve(y, masks, IdentityDenoiser(), Schedule.from_pairs([(25.0, 10)]))
    fidelity = [r.fidelity for r in result.trace]
    assert all(b <= a + 1e-12 for a, b in zip(fidelity, fidelity[1:]))


def test_admm_final_fidelity_not_above_initial():
    truth = gen_synthetic("moving_square", 32, 32, 8, seed=0)
    masks = make_masks(32, 32, 8, seed=0)
    y = encode(truth, masks)
    config = SolverConfig.build(warm_start_iters=10)
    schedule = Schedule.from_pairs([(25.0, 5), (6.0, 25)])

    engine = TwoStageADMM(config=config, denoiser=TvDenoiser())
    initial = engine.initial_state(y, masks, None, 25.0)
    initial_fidelity = float(np.linalg.norm(y.data - apply_h(initial.x[:, 0], masks)))
    result = engine.solve(y, masks, schedule)

    assert initial_fidelity > 0.0
    assert result.trace[-1].fidelity <= initial_fidelity


def test_exact_recovery_gap_and_admm(rng):
    truth = VideoCube(rng.random((1, 1, 8, 8)))
    masks = MaskStack(rng.uniform(0.2, 1.0, size=(1, 8, 8)))
    y = encode(truth, masks)
    schedule = Schedule.from_pairs([(25.0, 50)])

    gap = gap_solve(y, masks, IdentityDenoiser(), schedule)
    admm = two_stage_admm(y, masks, IdentityDenoiser(), schedule)
    assert np.max(np.abs(gap.cube.data - truth.data)) <= 1e-6
    assert np.max(np.abs(admm.cube.data - truth.data)) <= 1e-6
    assert admm.iterations == 50


def test_trace_records_psnr_and_fidelity(gray_instance):
    truth, masks, y = gray_instance
    result = two_stage_admm(y, masks, TvDenoiser(), Schedule.from_pairs([(25.0, 4)]), truth=truth)
    assert [r.iter for r in result.trace] == [1, 2, 3, 4]
    assert all(r.psnr is not None and r.fidelity >= 0.0 for r in result.trace)
    assert set(result.trace_rows()[0]) == {"iter", "sigma", "fidelity", "primal_q", "primal_x", "psnr_if_truth_given"}
    assert result.trace_rows()[0]["psnr_if_truth_given"] == result.trace[0].psnr


def test_early_stop_at_fixed_point(rng):
    truth = VideoCube(rng.random((1, 1, 4, 4)))
    masks = MaskStack(np.ones((1, 4, 4)))
    result = two_stage_admm(
        encode(truth, masks), masks, IdentityDenoiser(), Schedule.from_pairs([(25.0, 10)]), early_stop=True
    )
    assert result.stopped_early
    assert result.iterations == 1


def test_cancel_stops_after_current_iteration(gray_instance):
    _, masks, y = gray_instance
    engine = TwoStageADMM(denoiser=TvDenoiser())
    engine.on_step_callback = lambda record: engine.cancel()
    result = engine.solve(y, masks, Schedule.from_pairs([(25.0, 10)]))
    assert result.iterations == 1


def test_solver_output_is_clipped(gray_instance):
    _, masks, y = gray_instance
    loud = Measurement(y.data * 5.0)
    result = gap_solve(loud, masks, TvDenoiser(), Schedule.from_pairs([(25.0, 3)]))
    assert result.cube.data.min() >= 0.0 and result.cube.data.max() <= 1.0


def test_shape_and_cfa_errors(gray_instance):
    _, masks, y = gray_instance
    with pytest.raises(ShapeMismatchError):
        gap_solve(Measurement(np.zeros((4, 4))), masks, TvDenoiser(), Schedule.from_pairs([(25.0, 1)]))
    engine = TwoStageADMM(demosaicer=BilinearDemosaicer())
    with pytest.raises(CfaError):
        engine.solve(y, masks, Schedule.from_pairs([(25.0, 1)]))


def test_color_solvers_return_rgb(color_scene):
    truth, masks, y, cfa = color_scene
    schedule = Schedule.from_pairs([(25.0, 3)])
    gap = gap_solve(y, masks, TvDenoiser(), schedule)
    admm = two_stage_admm(y, masks, TvDenoiser(), schedule, demosaicer=MalvarDemosaicer())
    closed = two_stage_admm(y, masks, TvDenoiser(), schedule, cfa=cfa)
    for result in (gap, admm, closed):
        assert result.cube.data.shape == truth.data.shape


def test_warm_start_is_not_worse(color_scene):
    truth, masks, y, _ = color_scene
    schedule = Schedule.from_pairs([(25.0, 5)])
    cold = two_stage_admm(y, masks, TvDenoiser(), schedule, demosaicer=MalvarDemosaicer(), truth=truth)
    warm = two_stage_admm(
        y, masks, TvDenoiser(), schedule, demosaicer=MalvarDemosaicer(), truth=truth, warm_start_iters=10
    )
    assert warm.trace[-1].psnr >= cold.trace[-1].psnr - 0.5
    assert warm.final_fidelity == pytest.approx(warm.trace[-1].fidelity)


def test_gap_tv_moving_square_reaches_25db():
    truth = gen_synthetic("moving_square", 64, 64, 8, seed=0)
    masks = make_masks(64, 64, 8, seed=0)
    y = encode(truth, masks)
    result = gap_solve(y, masks, TvDenoiser(), get_schedule("A"), truth=truth)
    assert psnr(truth.data, result.cube.data) >= 25.0
    assert result.seconds < 10.0


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_two_stage_not_worse_than_naive_pipeline(seed):
    truth = gen_synthetic("texture_pan", 64, 64, 8, seed=seed, channels=3)
    masks = make_masks(64, 64, 8, seed=seed)
    cfa = CfaOperator.for_shape(truth.frame_shape)
    y = encode(truth, masks, cfa=cfa)
    schedule = get_schedule("A")

    naive = naive_color_pipeline(y, masks, TvDenoiser(), schedule)
    two_stage = two_stage_admm(
        y, masks, TvDenoiser(), schedule, demosaicer=MalvarDemosaicer(), warm_start_iters=25
    )
    assert psnr(truth.data, two_stage.cube.data) >= psnr(truth.data, naive.cube.data)


# ==================== 调度 ====================


def test_builtin_schedules():
    schedules = load_schedules(None)
    assert {n: s.total_iters for n, s in schedules.items()} == {
        "A": 25,
        "B": 45,
        "C": 36,
        "D": 42,
        "long80": 80,
    }
    a = schedules["A"]
    assert a.sigma_at(1) == 25.0 and a.sigma_at(16) == 12.0 and a.sigma_at(25) == 6.0
    with pytest.raises(IndexError):
        a.sigma_at(26)
    assert set(BUILTIN_SCHEDULES) == set(schedules)


def test_schedule_yaml_overrides(tmp_path):
    path = tmp_path / "schedules.yaml"
    path.write_text("schedules:\n  A:\n    - {sigma: 30, iters: 2}\n  quick:\n    - {sigma: 10, iters: 1}\n", encoding="utf-8")
    schedules = load_schedules(path)
    assert schedules["A"].sigmas() == [30.0, 30.0]
    assert schedules["quick"].total_iters == 1
    assert schedules["long80"].total_iters == 80


def test_unknown_schedule_is_config_error():
    with pytest.raises(ConfigError):
        get_schedule("Z")


def test_increasing_schedule_warns(caplog, monkeypatch):
    monkeypatch.setattr(logging.getLogger("sci_pnp"), "propagate", True)
    with caplog.at_level(logging.WARNING, logger="sci_pnp"):
        Schedule.from_pairs([(6.0, 2), (25.0, 2)], name="up")
    assert any("up" in r.getMessage() for r in caplog.records)
