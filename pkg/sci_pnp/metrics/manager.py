"""Report manager: collects EvalReports and renders the benchmark table."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np
from rich.table import Table

from sci_pnp.core.types import VideoCube

from .models import BenchmarkSummary, EvalReport, FrameScore, SceneRow
from .quality import frame_psnr, frame_ssim

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("scene", "solver", "psnr_db", "ssim", "seconds", "iterations", "official")
AVERAGE_ROW = "average"


def evaluate_cube(
    truth: VideoCube,
    recon: VideoCube,
    scene: str,
    solver: str,
    measurement: int = 0,
    seconds: float = 0.0,
    iterations: int = 0,
    official: bool = False,
    config_digest: str | None = None,
) -> EvalReport:
    """按帧计算 PSNR / SSIM 并生成 EvalReport"""
    psnrs = frame_psnr(truth.data, recon.data)
    ssims = frame_ssim(truth.data, recon.data)
    return EvalReport(
        scene=scene,
        solver=solver,
        measurement=measurement,
        psnr_db=float(np.mean(psnrs)),
        ssim=float(np.mean(ssims)),
        seconds=seconds,
        iterations=iterations,
        official=official,
        config_digest=config_digest,
        frames=[FrameScore(frame=i, psnr_db=p, ssim=s) for i, (p, s) in enumerate(zip(psnrs, ssims))],
    )


class ReportManager:
    """评估报告管理器"""

    def __init__(self, config_digest: str | None = None) -> None:
        self.config_digest = config_digest
        self._reports: list[EvalReport] = []

    def record(self, report: EvalReport) -> EvalReport:
        """记录一条评估结果"""
        self._reports.append(report)
        logger.debug(
            "%s/%s #%d: %.2f dB, %.4f",
            report.scene,
            report.solver,
            report.measurement,
            report.psnr_db,
            report.ssim,
        )
        return report

    @property
    def reports(self) -> list[EvalReport]:
        return list(self._reports)

    def scene_rows(self) -> list[SceneRow]:
        """按 (solver, scene) 聚合测量，保持首次出现的顺序"""
        groups: dict[tuple[str, str], list[EvalReport]] = {}
        for r in self._reports:
            groups.setdefault((r.solver, r.scene), []).append(r)
        return [
            SceneRow(
                scene=scene,
                solver=solver,
                psnr_db=float(np.mean([r.psnr_db for r in items])),
                ssim=float(np.mean([r.ssim for r in items])),
                seconds=float(sum(r.seconds for r in items)),
                iterations=int(sum(r.iterations for r in items)),
                official=all(r.official for r in items),
            )
            for (solver, scene), items in groups.items()
        ]

    def get_summary(self) -> BenchmarkSummary:
        """汇总：场景平均的平均"""
        rows = self.scene_rows()
        if not rows:
            return BenchmarkSummary(
                solver="N/A",
                scene_count=0,
                measurement_count=0,
                mean_psnr_db=0.0,
                mean_ssim=0.0,
                total_seconds=0.0,
                official=False,
                config_digest=self.config_digest,
            )
        return BenchmarkSummary(
            solver="+".join(dict.fromkeys(r.solver for r in rows)),
            scene_count=len({r.scene for r in rows}),
            measurement_count=len(self._reports),
            mean_psnr_db=float(np.mean([r.psnr_db for r in rows])),
            mean_ssim=float(np.mean([r.ssim for r in rows])),
            total_seconds=float(sum(r.seconds for r in rows)),
            official=all(r.official for r in rows),
            config_digest=self.config_digest,
            rows=rows,
            reports=self.reports,
        )

    def reset(self) -> None:
        self._reports.clear()

    def export_csv(self, path: str | Path | None = None) -> str:
        """
        导出 CSV（场景行 + 每个求解器的 average 行）

        Returns:
            CSV 文本；给定 path 时同时写入文件
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        rows = self.scene_rows()
        for row in rows:
            writer.writerow(
                [row.scene, row.solver, f"{row.psnr_db:.4f}", f"{row.ssim:.4f}", f"{row.seconds:.3f}", row.iterations, row.official]
            )
        for solver in dict.fromkeys(r.solver for r in rows):
            mine = [r for r in rows if r.solver == solver]
            writer.writerow(
                [
                    AVERAGE_ROW,
                    solver,
                    f"{np.mean([r.psnr_db for r in mine]):.4f}",
                    f"{np.mean([r.ssim for r in mine]):.4f}",
                    f"{sum(r.seconds for r in mine):.3f}",
                    sum(r.iterations for r in mine),
                    all(r.official for r in mine),
                ]
            )
        text = buffer.getvalue()
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return text

    def export_report(self, format: str = "json") -> str:
        """导出汇总报告"""
        summary = self.get_summary()
        if format == "json":
            return summary.model_dump_json(indent=2)
        return str(summary)

    def render_table(self, title: str = "Benchmark") -> Table:
        """行为求解器、列为场景，单元格为 `PSNR, SSIM`，末列为平均"""
        rows = self.scene_rows()
        scenes = list(dict.fromkeys(r.scene for r in rows))
        table = Table(title=title)
        table.add_column("Algorithm", style="cyan")
        for scene in scenes:
            table.add_column(scene, justify="right")
        table.add_column("Average", justify="right", style="bold")

        for solver in dict.fromkeys(r.solver for r in rows):
            cells = {r.scene: r for r in rows if r.solver == solver}
            values = [
                f"{cells[s].psnr_db:.2f}, {cells[s].ssim:.4f}" if s in cells else "-"
                for s in scenes
            ]
            mean_psnr = np.mean([c.psnr_db for c in cells.values()])
            mean_ssim = np.mean([c.ssim for c in cells.values()])
            table.add_row(solver, *values, f"{mean_psnr:.2f}, {mean_ssim:.4f}")
        return table
