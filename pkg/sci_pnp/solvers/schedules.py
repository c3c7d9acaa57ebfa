"""Named σ schedules loaded from YAML with built-in fallbacks."""

from __future__ import annotations

import logging
from pathlib import Path

import yaml

from sci_pnp.errors import ConfigError

from .state import Schedule

logger = logging.getLogger(__name__)

# 未找到 config/schedules.yaml 时使用
BUILTIN_SCHEDULES: dict[str, list[tuple[float, int]]] = {
    "A": [(25.0, 15), (12.0, 7), (6.0, 3)],
    "B": [(25.0, 15), (12.0, 15), (6.0, 15)],
    "C": [(12.0, 24), (6.0, 12)],
    "D": [(25.0, 24), (12.0, 12), (6.0, 6)],
    "long80": [(50.0, 20), (25.0, 20), (12.0, 20), (6.0, 20)],
}

DEFAULT_SCHEDULE = "A"


def builtin_schedules() -> dict[str, Schedule]:
    return {name: Schedule.from_pairs(pairs, name=name) for name, pairs in BUILTIN_SCHEDULES.items()}


def load_schedules(config_path: str | Path | None = None) -> dict[str, Schedule]:
    """从 YAML 加载调度；文件缺失时返回内置调度，文件中的同名项覆盖内置项"""
    schedules = builtin_schedules()
    if config_path is None:
        return schedules

    config_path = Path(config_path)
    if not config_path.exists():
        logger.debug("调度配置文件不存在，使用内置调度: %s", config_path)
        return schedules

    with open(config_path, encoding="utf-8") as f:
        config = yaml.safe_load(f) or {}

    for name, phases in (config.get("schedules") or {}).items():
        try:
            schedules[name] = Schedule(name=name, phases=phases)
        except ValueError as e:
            raise ConfigError(f"调度 '{name}' 非法: {e}") from e
    return schedules


def get_schedule(name: str, config_path: str | Path | None = None) -> Schedule:
    """按名称获取调度"""
    schedules = load_schedules(config_path)
    if name not in schedules:
        raise ConfigError(f"未知调度: {name}（可用: {', '.join(sorted(schedules))}）")
    return schedules[name]
