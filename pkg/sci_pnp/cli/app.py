"""Command-line interface: simulate, reconstruct, train, evaluate, benchmark, sweep."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.table import Table

from sci_pnp import __version__
from sci_pnp.config import PresetManager, RunConfig, get_settings, read_config_file
from sci_pnp.core import CfaOperator, MaskStack, Measurement, VideoCube, encode
from sci_pnp.errors import MissingFileError, MissingMasksError, SciPnpError
from sci_pnp.io import (
    SCENE_KINDS,
    export_frames,
    gen_synthetic,
    load_cube,
    load_masks,
    load_measurements,
    make_masks,
    save_checkpoint,
    save_cube,
    save_masks,
    save_measurements,
    tensor_paths,
)
from sci_pnp.log import setup_logging
from sci_pnp.metrics import ReportManager, benchmark_run, evaluate_cube
from sci_pnp.pipeline import output_dir, save_adapted_checkpoints, solve, solve_many
from sci_pnp.priors import DdnetSpec, train_demosaic, train_denoiser
from sci_pnp.solvers import SolveResult

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_ERROR = 2

TRUTH_NAME = "truth"
MASKS_NAME = "masks"
MEASUREMENT_NAME = "measurement"
MANIFEST_NAME = "run.json"

# RunConfig 字段对应的命令行参数（未给出时为 None，不覆盖）
CONFIG_FLAGS = (
    "solver",
    "denoiser",
    "demosaicer",
    "schedule",
    "rho",
    "tau",
    "dual_sign",
    "warm_start_iters",
    "tv_weight",
    "tv_iters",
    "online_interval",
    "online_warmup",
    "online_lr",
    "online_adapt_demosaicer",
    "denoiser_checkpoint",
    "demosaicer_checkpoint",
    "B",
    "noise_std",
    "seed",
)


# ==================== 配置 ====================


def build_config(args: argparse.Namespace) -> RunConfig:
    """preset → --config JSON → 显式参数"""
    settings = get_settings()
    presets = PresetManager()
    if Path(settings.presets_config_path).exists():
        presets.load_from_yaml(settings.presets_config_path)
    elif args.preset:
        raise MissingFileError(f"Preset 配置文件不存在: {settings.presets_config_path}")

    file_overrides = read_config_file(args.config) if args.config else None
    flags = {name: getattr(args, name, None) for name in CONFIG_FLAGS}
    return presets.build(args.preset, file_overrides, flags)


def write_manifest(out: Path, command: str, config: RunConfig, extra: dict[str, Any] | None = None) -> Path:
    """写入配置全文、摘要与种子（足以重现输出目录中的全部产物）"""
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "config_digest": config.digest(),
        "seed": config.seed,
        "config": config.model_dump(mode="json"),
    }
    manifest.update(extra or {})
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8")
    config.save(out / "config.json")
    return path


def write_trace_csv(path: Path, result: SolveResult) -> Path:
    adaptive = result.solver == "adaptive"
    rows = result.trace_rows(adaptive=adaptive)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()) if rows else ["iter"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
    return path


# ==================== 数据 ====================


def _exists(path: Path) -> bool:
    payload, sidecar = tensor_paths(path)
    return payload.exists() and sidecar.exists()


def load_inputs(
    args: argparse.Namespace,
) -> tuple[list[Measurement], MaskStack, list[VideoCube] | None, CfaOperator | None]:
    """读取测量、掩模与（可选）真值；--input 目录为 simulate 的输出"""
    base = Path(args.input) if getattr(args, "input", None) else None
    masks_path = Path(args.masks) if args.masks else (base / MASKS_NAME if base else None)
    if masks_path is None or not _exists(masks_path):
        raise MissingMasksError(f"缺少掩模: {masks_path or '未指定 --masks'}")
    masks = load_masks(masks_path)

    meas_path = Path(args.measurement) if args.measurement else (base / MEASUREMENT_NAME if base else None)
    if meas_path is None:
        raise MissingFileError("未指定 --measurement")
    measurements = load_measurements(meas_path)

    truth_path = Path(args.truth) if args.truth else (base / TRUTH_NAME if base else None)
    truths = None
    if truth_path is not None and _exists(truth_path):
        cube = load_cube(truth_path)
        B = masks.frames
        truths = [VideoCube(cube.data[m * B : (m + 1) * B]) for m in range(len(measurements))]

    cfa = CfaOperator.for_shape(masks.frame_shape) if measurements[0].bayer else None
    return measurements, masks, truths, cfa


def synthetic_dataset(
    count: int,
    nx: int,
    ny: int,
    frames: int,
    seed: int,
    channels: int,
) -> list[VideoCube]:
    """训练 / benchmark 用的合成场景（种类轮换，种子递增）"""
    kinds = [k for k in SCENE_KINDS if channels == 3 or k != "color_orbits"]
    return [
        gen_synthetic(kinds[i % len(kinds)], nx, ny, frames, seed=seed + i, channels=channels)
        for i in range(count)
    ]


def _load_dataset_cubes(dataset: str) -> list[VideoCube]:
    directory = Path(dataset)
    if not directory.is_dir():
        raise MissingFileError(f"数据目录不存在: {directory}")
    cubes = []
    for sidecar in sorted(directory.glob("*.json")):
        try:
            cubes.append(load_cube(sidecar))
        except SciPnpError:
            continue
    return cubes


# ==================== 命令 ====================


def cmd_simulate(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = output_dir(config, args.output)
    color = args.kind == "color_orbits" or args.channels == 3
    frames = config.B * args.measurements

    cube = gen_synthetic(
        args.kind,
        args.nx,
        args.ny,
        frames,
        seed=config.seed,
        channels=3 if color else 1,
    )
    masks = make_masks(args.nx, args.ny, config.B, seed=config.seed, kind=args.mask_kind)
    cfa = CfaOperator.for_shape(cube.frame_shape) if color else None
    measurements = [
        encode(
            VideoCube(cube.data[m * config.B : (m + 1) * config.B]),
            masks,
            cfa=cfa,
            noise_std=config.noise_std,
            seed=config.seed + m,
        )
        for m in range(args.measurements)
    ]

    save_cube(out / TRUTH_NAME, cube)
    save_masks(out / MASKS_NAME, masks)
    save_measurements(out / MEASUREMENT_NAME, measurements, extra={"scene": args.kind})
    write_manifest(
        out,
        "simulate",
        config,
        {"kind": args.kind, "nx": args.nx, "ny": args.ny, "measurements": args.measurements, "mask_kind": args.mask_kind},
    )
    console.print(f"[green]simulate[/green] {args.kind} B={config.B} x{args.measurements} -> {out}")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    config = build_config(args)
    measurements, masks, truths, cfa = load_inputs(args)
    out = output_dir(config, args.output)

    results = solve_many(config, measurements, masks, cfa=cfa, truths=truths)
    manager = ReportManager(config_digest=config.digest())
    for m, result in enumerate(results):
        tag = f"{m:03d}"
        save_cube(out / f"recon_{tag}", result.cube)
        export_frames(result.cube, out / "frames", prefix=f"m{tag}", fmt=args.frame_format)
        write_trace_csv(out / f"trace_{tag}.csv", result)
        save_adapted_checkpoints(out, m, result, config)
        if truths is not None:
            manager.record(
                evaluate_cube(
                    truths[m],
                    result.cube,
                    scene=f"measurement_{tag}",
                    solver=result.solver,
                    measurement=m,
                    seconds=result.seconds,
                    iterations=result.iterations,
                    config_digest=config.digest(),
                )
            )
    write_manifest(out, "reconstruct", config, {"measurements": len(results)})

    if manager.reports:
        (out / "eval.json").write_text(manager.export_report("json"), encoding="utf-8")
        console.print(manager.render_table(title="Reconstruction"))
    console.print(f"[green]reconstruct[/green] {config.solver}: {len(results)} measurement(s) -> {out}")
    return EXIT_OK


def cmd_train_demosaic(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = output_dir(config, args.output)
    dataset = (
        _load_dataset_cubes(args.dataset)
        if args.dataset
        else synthetic_dataset(args.scenes, args.nx, args.ny, args.frames, config.seed, channels=3)
    )
    model, log = train_demosaic(
        DdnetSpec(depth=config.ddnet_depth, width=config.ddnet_width),
        dataset,
        steps=args.steps,
        lr=args.lr,
        batch=args.batch,
        patch=args.patch,
        seed=config.seed,
    )
    ckpt = save_checkpoint(
        out / "ddnet",
        model.parameters(),
        extras={"kind": "ddnet", "steps": args.steps, "lr": args.lr, "config_digest": config.digest()},
    )
    _write_losses(out / "train_demosaic_loss.csv", log.losses)
    write_manifest(out, "train-demosaic", config, {"steps": args.steps, "scenes": len(dataset)})
    console.print(f"[green]train-demosaic[/green] loss {log.initial:.4e} -> {log.final:.4e}, checkpoint {ckpt}")
    return EXIT_OK


def cmd_train_denoiser(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = output_dir(config, args.output)
    dataset = (
        _load_dataset_cubes(args.dataset)
        if args.dataset
        else synthetic_dataset(args.scenes, args.nx, args.ny, args.frames, config.seed, channels=args.channels)
    )
    sigmas = sorted(set(get_schedule_sigmas(config)), reverse=True)
    model, log = train_denoiser(
        dataset,
        sigmas=sigmas,
        steps=args.steps,
        lr=args.lr,
        batch=args.batch,
        patch=args.patch,
        seed=config.seed,
        depth=config.cnn_depth,
        width=config.cnn_width,
    )
    ckpt = save_checkpoint(
        out / "denoiser",
        model.parameters(),
        extras={"kind": "cnn", "sigmas": sigmas, "steps": args.steps, "config_digest": config.digest()},
    )
    _write_losses(out / "train_denoiser_loss.csv", log.losses)
    write_manifest(out, "train-denoiser", config, {"steps": args.steps, "scenes": len(dataset)})
    console.print(f"[green]train-denoiser[/green] loss {log.initial:.4e} -> {log.final:.4e}, checkpoint {ckpt}")
    return EXIT_OK


def get_schedule_sigmas(config: RunConfig) -> list[float]:
    return config.schedule_obj(get_settings().schedules_config_path).sigmas()


def _write_losses(path: Path, losses: Sequence[float]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss"])
        writer.writerows(enumerate(losses))


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = output_dir(config, args.output)
    truth = load_cube(args.truth)
    recon = load_cube(args.recon)
    manager = ReportManager(config_digest=config.digest())
    manager.record(
        evaluate_cube(truth, recon, scene=args.scene, solver=args.label, config_digest=config.digest())
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(manager.export_report("json"), encoding="utf-8")
    manager.export_csv(out / "eval.csv")
    console.print(manager.render_table(title="Evaluation"))
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = build_config(args)
    out = output_dir(config, args.output)
    dataset = args.dataset or get_settings().data_dir
    if dataset is None:
        # 无官方数据时在输出目录下生成合成场景（非官方）
        dataset = out / "synthetic_dataset"
        channels = 3 if args.color else 1
        for i, cube in enumerate(
            synthetic_dataset(args.scenes, args.nx, args.ny, config.B * args.measurements, config.seed, channels)
        ):
            save_cube(Path(dataset) / f"scene_{i:02d}", cube)

    manager = benchmark_run(dataset, config, threads=args.threads)
    manager.export_csv(out / "benchmark.csv")
    (out / "benchmark.json").write_text(manager.export_report("json"), encoding="utf-8")
    write_manifest(out, "benchmark", config, {"dataset": str(dataset)})

    summary = manager.get_summary()
    tag = "official" if summary.official else "non-official"
    console.print(manager.render_table(title=f"Benchmark ({tag})"))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    measurements, masks, truths, cfa = load_inputs(args)
    if truths is None:
        raise MissingFileError("sweep 需要真值以记录 PSNR 曲线")
    out = output_dir(config, args.output)

    schedules = args.schedules or [config.schedule]
    rhos = args.rhos or [config.rho]
    taus = args.taus or [config.tau]
    grid = [
        config.with_overrides(schedule=s, rho=r, tau=t)
        for s, r, t in itertools.product(schedules, rhos, taus)
    ]

    def run_one(run: RunConfig) -> tuple[RunConfig, SolveResult]:
        return run, solve(run, measurements[0], masks, cfa=cfa, truth=truths[0])

    threads = args.threads or get_settings().threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        finished = list(pool.map(run_one, grid))

    table = Table(title="Sweep")
    for column in ("schedule", "rho", "tau", "iters", "final PSNR"):
        table.add_column(column, justify="right")
    long_rows: list[dict[str, Any]] = []
    for run, result in finished:
        name = f"trace_{run.schedule}_rho{run.rho:g}_tau{run.tau:g}.csv"
        write_trace_csv(out / name, result)
        for record in result.trace:
            long_rows.append(
                {
                    "schedule": run.schedule,
                    "rho": run.rho,
                    "tau": run.tau,
                    "iter": record.iter,
                    "sigma": record.sigma,
                    "psnr_if_truth_given": record.psnr,
                    "fidelity": record.fidelity,
                }
            )
        final = result.trace[-1].psnr if result.trace else float("nan")
        table.add_row(run.schedule, f"{run.rho:g}", f"{run.tau:g}", str(result.iterations), f"{final:.2f}")

    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["schedule", "rho", "tau", "iter", "sigma", "psnr_if_truth_given", "fidelity"])
        writer.writeheader()
        writer.writerows(long_rows)
    write_manifest(out, "sweep", config, {"schedules": schedules, "rhos": rhos, "taus": taus})
    console.print(table)
    return EXIT_OK


# ==================== 参数解析 ====================


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", default=None, help="config/presets.yaml 中的 Preset")
    parser.add_argument("--config", default=None, help="扁平 JSON 配置文件")
    parser.add_argument("--seed", type=int, default=None, help="随机种子")
    parser.add_argument("-o", "--output", default=None, help="输出目录")
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--solver", choices=["gap_tv", "two_stage_admm", "adaptive"], default=None)
    parser.add_argument("--denoiser", choices=["tv", "tv3d", "cnn", "identity"], default=None)
    parser.add_argument("--demosaicer", choices=["closed", "bilinear", "malvar", "ddnet"], default=None)
    parser.add_argument("--schedule", default=None, help="σ 调度名称 (A/B/C/D/long80)")
    parser.add_argument("--rho", type=float, default=None)
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--dual-sign", dest="dual_sign", choices=["consistent", "as_printed"], default=None)
    parser.add_argument("--warm-start-iters", dest="warm_start_iters", type=int, default=None)
    parser.add_argument("--tv-weight", dest="tv_weight", type=float, default=None)
    parser.add_argument("--tv-iters", dest="tv_iters", type=int, default=None)
    parser.add_argument("--online-interval", dest="online_interval", type=int, default=None)
    parser.add_argument("--online-warmup", dest="online_warmup", type=int, default=None)
    parser.add_argument("--online-lr", dest="online_lr", type=float, default=None)
    parser.add_argument(
        "--adapt-demosaicer", dest="online_adapt_demosaicer", action="store_const", const=True, default=None
    )
    parser.add_argument("--denoiser-checkpoint", dest="denoiser_checkpoint", default=None)
    parser.add_argument("--demosaicer-checkpoint", dest="demosaicer_checkpoint", default=None)


def _add_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", default=None, help="simulate 输出目录")
    parser.add_argument("--measurement", default=None)
    parser.add_argument("--masks", default=None)
    parser.add_argument("--truth", default=None)


def _add_training(parser: argparse.ArgumentParser, steps: int, batch: int, patch: int) -> None:
    parser.add_argument("--dataset", default=None, help="立方体目录（缺省时使用合成场景）")
    parser.add_argument("--scenes", type=int, default=6)
    parser.add_argument("--nx", type=int, default=64)
    parser.add_argument("--ny", type=int, default=64)
    parser.add_argument("--frames", type=int, default=8)
    parser.add_argument("--steps", type=int, default=steps)
    parser.add_argument("--lr", type=float, default=0.05)
    parser.add_argument("--batch", type=int, default=batch)
    parser.add_argument("--patch", type=int, default=patch)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sci-pnp", description="Video snapshot compressive imaging reconstruction")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="生成合成场景、掩模与测量")
    _add_common(p)
    p.add_argument("--kind", choices=list(SCENE_KINDS), default="moving_square")
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)
    p.add_argument("--B", dest="B", type=int, default=None)
    p.add_argument("--channels", type=int, choices=[1, 3], default=None)
    p.add_argument("--measurements", type=int, default=1)
    p.add_argument("--mask-kind", dest="mask_kind", choices=["binary", "gray"], default="binary")
    p.add_argument("--noise-std", dest="noise_std", type=float, default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("reconstruct", help="重建测量")
    _add_common(p)
    _add_solver_flags(p)
    _add_inputs(p)
    p.add_argument("--frame-format", dest="frame_format", choices=["png", "pgm"], default="png")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("train-demosaic", help="训练 DDNet-lite 去马赛克器")
    _add_common(p)
    _add_training(p, steps=2000, batch=64, patch=64)
    p.set_defaults(handler=cmd_train_demosaic)

    p = sub.add_parser("train-denoiser", help="预训练 CNN 去噪器")
    _add_common(p)
    _add_training(p, steps=200, batch=16, patch=32)
    p.add_argument("--schedule", default=None, help="σ 水平取自该调度")
    p.add_argument("--channels", type=int, choices=[1, 3], default=3)
    p.set_defaults(handler=cmd_train_denoiser)

    p = sub.add_parser("evaluate", help="计算 PSNR / SSIM")
    _add_common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--scene", default="scene")
    p.add_argument("--label", default="recon", help="报告中的求解器标签")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("benchmark", help="在数据集上评估求解器")
    _add_common(p)
    _add_solver_flags(p)
    p.add_argument("--dataset", default=None, help="数据目录（缺省时使用 SCI_PNP_DATA_DIR 或合成场景）")
    p.add_argument("--B", dest="B", type=int, default=None)
    p.add_argument("--noise-std", dest="noise_std", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--color", action="store_true", help="合成场景使用彩色 Bayer")
    p.add_argument("--scenes", type=int, default=3)
    p.add_argument("--measurements", type=int, default=1, help="合成场景每个的测量数")
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("sweep", help="ρ / τ / σ 调度网格，输出 PSNR-迭代曲线")
    _add_common(p)
    _add_solver_flags(p)
    _add_inputs(p)
    p.add_argument("--schedules", nargs="+", default=None)
    p.add_argument("--rhos", nargs="+", type=float, default=None)
    p.add_argument("--taus", nargs="+", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(handler=cmd_sweep)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """解析参数并执行命令，返回退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = get_settings()
    if args.log_level:
        settings = settings.model_copy(update={"log_level": args.log_level})
    setup_logging(settings)

    try:
        return int(args.handler(args))
    except SciPnpError as e:
        err_console.print(e.one_line(), markup=False, highlight=False, soft_wrap=True)
        return EXIT_ERROR
    except Exception as e:
        logger.exception("未预期的错误")
        err_console.print(f"E_INTERNAL: {e}", markup=False, highlight=False, soft_wrap=True)
        return EXIT_INTERNAL


def main(argv: Sequence[str] | None = None) -> None:
    """命令行入口点"""
    from dotenv import find_dotenv, load_dotenv

    # 加载环境变量（与 Settings 一样从当前目录查找 .env）
    load_dotenv(find_dotenv(usecwd=True))

    sys.exit(run(argv))
