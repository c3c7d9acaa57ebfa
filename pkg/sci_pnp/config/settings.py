"""Global settings for SCI PnP."""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="SCI_PNP_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # 预设配置
    default_preset: str = Field(default="gap_tv", description="默认使用的 Preset 名称")
    presets_config_path: Path = Field(
        default=Path("config/presets.yaml"),
        description="Preset 配置文件路径",
    )
    schedules_config_path: Path = Field(
        default=Path("config/schedules.yaml"),
        description="σ 调度配置文件路径",
    )

    # 输出与数据
    output_dir: Path = Field(default=Path("runs"), description="默认输出目录")
    data_dir: Path | None = Field(default=None, description="官方 benchmark 数据目录")

    # 并行
    threads: int = Field(default=1, ge=1, description="benchmark / sweep 并行线程数")

    # 日志配置
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO",
        description="日志级别",
    )
    log_file: Path | None = Field(
        default=None,
        description="日志文件路径",
    )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
