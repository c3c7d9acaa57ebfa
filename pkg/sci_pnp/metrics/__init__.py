"""Quality metrics, evaluation reports and the benchmark harness."""

from .benchmark import BenchmarkDataset, SceneData, benchmark_run, dataset_exists, load_dataset, scene_measurements
from .manager import CSV_COLUMNS, ReportManager, evaluate_cube
from .models import BenchmarkSummary, EvalReport, FrameScore, SceneRow
from .quality import PSNR_CAP_DB, PSNR_METHOD, cube_ssim, frame_psnr, frame_ssim, psnr, ssim

__all__ = [
    "psnr",
    "ssim",
    "frame_psnr",
    "frame_ssim",
    "cube_ssim",
    "PSNR_CAP_DB",
    "PSNR_METHOD",
    "EvalReport",
    "FrameScore",
    "SceneRow",
    "BenchmarkSummary",
    "ReportManager",
    "evaluate_cube",
    "CSV_COLUMNS",
    "BenchmarkDataset",
    "SceneData",
    "benchmark_run",
    "load_dataset",
    "scene_measurements",
    "dataset_exists",
]
