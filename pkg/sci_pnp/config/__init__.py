"""Configuration module for SCI PnP."""

from .presets import (
    SCHEMA_VERSION,
    PresetManager,
    RunConfig,
    build_run_config,
    load_run_config,
    read_config_file,
)
from .settings import Settings, get_settings

__all__ = [
    "Settings",
    "get_settings",
    "SCHEMA_VERSION",
    "RunConfig",
    "PresetManager",
    "build_run_config",
    "load_run_config",
    "read_config_file",
]
