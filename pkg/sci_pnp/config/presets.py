"""Run configuration (flat, versioned JSON) and YAML-backed presets."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sci_pnp.errors import ConfigError, MissingFileError
from sci_pnp.priors.base import DdnetSpec, DenoiserSpec

if TYPE_CHECKING:
    from sci_pnp.adaptive.online import OnlineConfig
    from sci_pnp.solvers.state import Schedule, SolverConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SolverId = Literal["gap_tv", "two_stage_admm", "adaptive"]
DenoiserId = Literal["tv", "tv3d", "cnn", "identity"]
DemosaicerId = Literal["closed", "bilinear", "malvar", "ddnet"]


class RunConfig(BaseModel):
    """一次运行的完整配置；摘要写入每个输出"""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = Field(default=SCHEMA_VERSION, description="配置 schema 版本")

    # 求解器与先验
    solver: SolverId = Field(default="gap_tv", description="求解器")
    denoiser: DenoiserId = Field(default="tv", description="去噪器")
    demosaicer: DemosaicerId = Field(default="malvar", description="去马赛克器（仅彩色）")
    schedule: str = Field(default="A", description="σ 调度名称")
    rho: float = Field(default=1.0, gt=0.0, description="外层罚参数 ρ")
    tau: float = Field(default=1.0, gt=0.0, description="内层罚参数 τ")
    dual_sign: Literal["consistent", "as_printed"] = Field(default="consistent")
    warm_start_iters: int = Field(default=0, ge=0, description="ADMM 前的 GAP-TV 热启动迭代")
    early_stop: bool = Field(default=False)

    # TV / CNN / DDNet
    tv_weight: float = Field(default=0.1, gt=0.0)
    tv_iters: int = Field(default=10, ge=1)
    cnn_depth: int = Field(default=5, ge=1)
    cnn_width: int = Field(default=32, ge=1)
    ddnet_depth: int = Field(default=4, ge=1)
    ddnet_width: int = Field(default=32, ge=1)
    denoiser_checkpoint: str | None = Field(default=None, description="去噪器检查点")
    demosaicer_checkpoint: str | None = Field(default=None, description="DDNet 检查点")

    # 在线自适应
    online_interval: int = Field(default=10, ge=1, description="更新间隔 K₀")
    online_warmup: int = Field(default=15, ge=0)
    online_lr: float = Field(default=1e-6, ge=0.0)
    online_updates: int = Field(default=1, ge=1)
    online_backtracking: bool = Field(default=True)
    online_adapt_demosaicer: bool = Field(default=False)

    # 数据
    B: int = Field(default=8, ge=1, description="每个测量压缩的帧数")
    noise_std: float = Field(default=0.0, ge=0.0, description="仿真测量噪声标准差")
    seed: int = Field(default=0, ge=0)
    output_dir: str | None = Field(default=None)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """规范 JSON（键排序）的 SHA-256"""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def denoiser_spec(self) -> DenoiserSpec:
        return DenoiserSpec(
            kind="tv" if self.denoiser == "tv3d" else self.denoiser,
            tv_weight=self.tv_weight,
            tv_iters=self.tv_iters,
            tv_axes="spatiotemporal" if self.denoiser == "tv3d" else "spatial",
            cnn_depth=self.cnn_depth,
            cnn_width=self.cnn_width,
        )

    def ddnet_spec(self) -> DdnetSpec:
        return DdnetSpec(depth=self.ddnet_depth, width=self.ddnet_width)

    def solver_config(self) -> SolverConfig:
        from sci_pnp.solvers.state import SolverConfig

        return SolverConfig(
            rho=self.rho,
            tau=self.tau,
            dual_sign=self.dual_sign,
            early_stop=self.early_stop,
            warm_start_iters=self.warm_start_iters,
        )

    def online_config(self) -> OnlineConfig:
        from sci_pnp.adaptive.online import OnlineConfig

        return OnlineConfig(
            interval=self.online_interval,
            warmup=self.online_warmup,
            lr=self.online_lr,
            updates_per_trigger=self.online_updates,
            backtracking=self.online_backtracking,
            adapt_demosaicer=self.online_adapt_demosaicer,
        )

    def schedule_obj(self, config_path: str | Path | None = None) -> Schedule:
        from sci_pnp.solvers.schedules import get_schedule

        return get_schedule(self.schedule, config_path)

    def with_overrides(self, **overrides: Any) -> RunConfig:
        """返回应用覆盖项后重新校验的副本（None 值忽略）"""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return build_run_config(data)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path


def build_run_config(data: dict[str, Any]) -> RunConfig:
    """校验配置字典；失败时抛出 ConfigError"""
    try:
        return RunConfig(**data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"配置非法: {problems}") from e


def read_config_file(path: str | Path) -> dict[str, Any]:
    """读取扁平 JSON 配置（未校验）"""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"配置文件不存在: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {path} ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"配置文件必须是 JSON 对象: {path}")
    return data


def load_run_config(path: str | Path) -> RunConfig:
    return build_run_config(read_config_file(path))


class PresetManager:
    """Preset 管理器：YAML 中的命名部分配置"""

    def __init__(self) -> None:
        self._presets: dict[str, dict[str, Any]] = {}
        self._default_preset_name: str | None = None

    def load_from_yaml(self, path: str | Path) -> None:
        """从 YAML 文件加载 Presets"""
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"Preset 配置文件不存在: {path}")

        with open(path, encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}

        self._default_preset_name = config.get("default_preset")

        for name, preset_data in (config.get("presets") or {}).items():
            # 处理环境变量引用 ${VAR_NAME}
            preset_data = self._expand_env_vars(preset_data or {})
            try:
                build_run_config(preset_data)
            except ConfigError as e:
                logger.warning("加载 Preset '%s' 失败: %s", name, e.message)
                continue
            self._presets[name] = preset_data

    def _expand_env_vars(self, data: dict[str, Any]) -> dict[str, Any]:
        """展开字典中的环境变量引用"""
        result: dict[str, Any] = {}
        pattern = re.compile(r"\$\{([^}]+)\}")

        def replacer(match: re.Match[str]) -> str:
            env_var = match.group(1)
            return os.environ.get(env_var, f"${{{env_var}}}")

        for key, value in data.items():
            if isinstance(value, str):
                result[key] = pattern.sub(replacer, value)
            elif isinstance(value, dict):
                result[key] = self._expand_env_vars(value)
            else:
                result[key] = value
        return result

    def get_preset(self, name: str) -> dict[str, Any] | None:
        preset = self._presets.get(name)
        return dict(preset) if preset is not None else None

    def list_presets(self) -> list[str]:
        return list(self._presets.keys())

    @property
    def default_preset_name(self) -> str | None:
        return self._default_preset_name

    def build(
        self,
        name: str | None = None,
        file_overrides: dict[str, Any] | None = None,
        flag_overrides: dict[str, Any] | None = None,
    ) -> RunConfig:
        """
        按优先级合并：preset → 配置文件 → 命令行参数

        Args:
            name: preset 名称（None 时用默认 preset，均无则从空配置开始）
            file_overrides: --config JSON 内容
            flag_overrides: 显式给出的命令行参数（None 值忽略）
        """
        data: dict[str, Any] = {}
        name = name or self._default_preset_name
        if name is not None:
            preset = self.get_preset(name)
            if preset is None:
                raise ConfigError(f"未知 Preset: {name}（可用: {', '.join(self.list_presets())}）")
            data.update(preset)
        data.update(file_overrides or {})
        data.update({k: v for k, v in (flag_overrides or {}).items() if v is not None})
        return build_run_config(data)

    def __len__(self) -> int:
        return len(self._presets)

    def __contains__(self, name: str) -> bool:
        return name in self._presets
