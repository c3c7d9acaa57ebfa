"""PSNR / SSIM, report manager and benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from sci_pnp.config import RunConfig
from sci_pnp.core import VideoCube, encode
from sci_pnp.errors import DigestMismatchError, EmptyDatasetError, MissingFileError, ShapeMismatchError
from sci_pnp.io import gen_synthetic, make_masks, save_cube, save_masks, save_measurements
from sci_pnp.metrics import (
    CSV_COLUMNS,
    PSNR_CAP_DB,
    EvalReport,
    ReportManager,
    benchmark_run,
    dataset_exists,
    evaluate_cube,
    frame_psnr,
    load_dataset,
    psnr,
    ssim,
)

C1 = 0.01**2
C2 = 0.03**2


def ssim_oracle(a: np.ndarray, b: np.ndarray, sigma: float = 1.5, radius: int = 5) -> float:
    """逐像素显式 11x11 高斯窗，仅取不触边的内部像素"""
    offsets = np.arange(-radius, radius + 1)
    g = np.exp(-(offsets**2) / (2 * sigma**2))
    window = np.outer(g, g)
    window /= window.sum()
    values = []
    for i in range(radius, a.shape[0] - radius):
        for j in range(radius, a.shape[1] - radius):
            pa = a[i - radius : i + radius + 1, j - radius : j + radius + 1]
            pb = b[i - radius : i + radius + 1, j - radius : j + radius + 1]
            mu_a = np.sum(window * pa)
            mu_b = np.sum(window * pb)
            var_a = np.sum(window * pa * pa) - mu_a**2
            var_b = np.sum(window * pb * pb) - mu_b**2
            cov = np.sum(window * pa * pb) - mu_a * mu_b
            values.append(
                ((2 * mu_a * mu_b + C1) * (2 * cov + C2))
                / ((mu_a**2 + mu_b**2 + C1) * (var_a + var_b + C2))
            )
    return float(np.mean(values))


# ==================== PSNR ====================


def test_psnr_identical_is_capped(rng):
    x = rng.random((3, 8, 8))
    assert psnr(x, x) == PSNR_CAP_DB


def test_psnr_uniform_error():
    a = np.zeros((2, 1, 4, 4))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-10)


def test_psnr_averages_per_frame():
    a = np.zeros((2, 4, 4))
    b = np.stack([np.full((4, 4), 0.1), np.full((4, 4), 0.01)])
    assert frame_psnr(a, b) == pytest.approx([20.0, 40.0])
    assert psnr(a, b) == pytest.approx(30.0)


def test_psnr_matches_direct_formula(rng):
    a = rng.random((4, 3, 6, 6))
    b = np.clip(a + 0.05 * rng.standard_normal(a.shape), 0, 1)
    expected = np.mean([10 * np.log10(1.0 / np.mean((a[i] - b[i]) ** 2)) for i in range(4)])
    assert psnr(a, b) == pytest.approx(expected, rel=1e-12)
    assert psnr(b, a) == psnr(a, b)


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        psnr(np.zeros((2, 4, 4)), np.zeros((2, 4, 5)))


# ==================== SSIM ====================


def test_ssim_identical_is_one(rng):
    x = rng.random((16, 16))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_frames():
    a = np.zeros((16, 16))
    b = np.ones((16, 16))
    assert ssim(a, b) == pytest.approx(C1 / (1 + C1), rel=1e-9)


def test_ssim_matches_windowed_oracle(rng):
    base = gaussian_filter(rng.random((24, 20)), 1.0)
    other = np.clip(base + 0.05 * rng.standard_normal(base.shape), 0, 1)
    assert ssim(base, other) == pytest.approx(ssim_oracle(base, other), abs=1e-8)


def test_ssim_color_is_channel_mean(rng):
    a = rng.random((3, 16, 16))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(np.mean([ssim(a[c], b[c]) for c in range(3)]))
    assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_rejects_cubes(rng):
    with pytest.raises(ShapeMismatchError):
        ssim(rng.random((2, 3, 8, 8)), rng.random((2, 3, 8, 8)))


@pytest.mark.parametrize("size", [6, 8, 10])
def test_ssim_small_frames(rng, size):
    x = rng.random((size, size))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    assert ssim(np.zeros((size, size)), np.ones((size, size))) == pytest.approx(C1 / (1 + C1), rel=1e-9)
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    assert -1.0 <= ssim(x, y) < 1.0


def test_evaluate_cube_on_small_frames(rng):
    truth = VideoCube(rng.random((2, 3, 8, 8)))
    report = evaluate_cube(truth, VideoCube(np.clip(truth.data + 0.05, 0, 1)), scene="tiny", solver="gap_tv")
    assert len(report.frames) == 2
    assert 0.0 < report.ssim < 1.0


# ==================== 报告 ====================


def _report(scene: str, solver: str, psnr_db: float, ssim_value: float, measurement: int = 0) -> EvalReport:
    return EvalReport(
        scene=scene, solver=solver, measurement=measurement, psnr_db=psnr_db, ssim=ssim_value, seconds=1.0, iterations=25
    )


def test_evaluate_cube_per_frame(rng):
    truth = VideoCube(rng.random((3, 1, 12, 12)))
    recon = VideoCube(np.clip(truth.data + 0.02, 0, 1))
    report = evaluate_cube(truth, recon, scene="s", solver="gap_tv", iterations=5)
    assert len(report.frames) == 3
    assert report.psnr_db == pytest.approx(np.mean([f.psnr_db for f in report.frames]))
    assert report.psnr_method == "per_frame_mean"


def test_report_manager_csv_and_summary():
    manager = ReportManager(config_digest="abc")
    manager.record(_report("kobe", "gap_tv", 26.0, 0.80))
    manager.record(_report("kobe", "gap_tv", 28.0, 0.90, measurement=1))
    manager.record(_report("traffic", "gap_tv", 20.0, 0.70))

    rows = list(csv.reader(io.StringIO(manager.export_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1][:4] == ["kobe", "gap_tv", "27.0000", "0.8500"]
    assert rows[-1][:4] == ["average", "gap_tv", "23.5000", "0.7750"]
    assert rows[1][6] == "False"

    summary = manager.get_summary()
    assert summary.scene_count == 2
    assert summary.measurement_count == 3
    assert summary.mean_psnr_db == pytest.approx(23.5)
    assert json.loads(manager.export_report("json"))["config_digest"] == "abc"

    table = manager.render_table()
    assert [c.header for c in table.columns] == ["Algorithm", "kobe", "traffic", "Average"]

    manager.reset()
    assert manager.get_summary().scene_count == 0


def test_export_csv_writes_file(tmp_path: Path):
    manager = ReportManager()
    manager.record(_report("a", "two_stage_admm", 30.0, 0.9))
    target = tmp_path / "out" / "bench.csv"
    text = manager.export_csv(target)
    assert target.read_text(encoding="utf-8") == text


# ==================== Benchmark ====================


def _write_dataset(root: Path, official: bool = True) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    save_cube(root / "square", gen_synthetic("moving_square", 32, 32, 8, seed=0))
    save_cube(root / "pan", gen_synthetic("texture_pan", 32, 32, 8, seed=1))
    save_masks(root / "masks", make_masks(32, 32, 4, seed=2), official=official)
    return root


def test_benchmark_is_deterministic(tmp_path: Path, cli_env):
    dataset = _write_dataset(tmp_path / "data")
    config = RunConfig(solver="gap_tv", B=4)
    first = benchmark_run(dataset, config, threads=2)
    second = benchmark_run(dataset, config, threads=1)
    assert [(r.scene, r.measurement) for r in first.reports] == [
        ("pan", 0),
        ("pan", 1),
        ("square", 0),
        ("square", 1),
    ]
    assert [r.psnr_db for r in first.reports] == [r.psnr_db for r in second.reports]
    summary = first.get_summary()
    assert summary.official
    assert summary.config_digest == config.digest()


def test_benchmark_without_masks_is_not_official(tmp_path: Path):
    root = tmp_path / "data"
    root.mkdir()
    save_cube(root / "square", gen_synthetic("moving_square", 32, 32, 8, seed=0))
    dataset = load_dataset(root, B=4, seed=0)
    assert not dataset.official
    assert dataset.masks.frames == 4
    assert set(np.unique(dataset.masks.data)) <= {0.0, 1.0}


def test_benchmark_rejects_measurements_for_other_masks(tmp_path: Path):
    root = _write_dataset(tmp_path / "data")
    cube = gen_synthetic("moving_square", 32, 32, 4, seed=0)
    stray = encode(cube, make_masks(32, 32, 4, seed=99))
    save_measurements(root / "square_meas", stray)
    with pytest.raises(DigestMismatchError):
        load_dataset(root)


def test_benchmark_uses_supplied_measurements(tmp_path: Path):
    root = _write_dataset(tmp_path / "data")
    masks = make_masks(32, 32, 4, seed=2)
    cube = gen_synthetic("texture_pan", 32, 32, 8, seed=1)
    y = encode(VideoCube(cube.data[:4]), masks)
    save_measurements(root / "pan_meas", y, extra={"scene": "pan"})
    scenes = {s.name: s for s in load_dataset(root).scenes}
    assert scenes["pan"].measurements is not None and len(scenes["pan"].measurements) == 1
    assert scenes["square"].measurements is None


def test_benchmark_dataset_errors(tmp_path: Path):
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path / "nope")
    (tmp_path / "empty").mkdir()
    with pytest.raises(EmptyDatasetError):
        load_dataset(tmp_path / "empty")
    assert not dataset_exists(tmp_path / "empty")
    assert dataset_exists(_write_dataset(tmp_path / "data"))


def _official_dir(name: str) -> Path | None:
    root = os.environ.get("SCI_PNP_DATA_DIR")
    if not root:
        return None
    path = Path(root) / name
    return path if dataset_exists(path) else None


@pytest.mark.slow
@pytest.mark.parametrize(
    ("suite", "anchor_psnr", "anchor_ssim"),
    [("gray", 26.94, 0.833), ("color", 28.47, 0.8636)],
)
def test_official_gap_tv_anchor(suite, anchor_psnr, anchor_ssim):
    path = _official_dir(suite)
    if path is None or not load_dataset(path).official:
        pytest.skip(f"官方 {suite} 数据或掩模不可用")
    summary = benchmark_run(path, RunConfig(solver="gap_tv")).get_summary()
    assert summary.mean_psnr_db == pytest.approx(anchor_psnr, abs=0.5)
    assert summary.mean_ssim == pytest.approx(anchor_ssim, abs=0.02)
