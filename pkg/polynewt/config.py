from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Any

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

_LOG_LEVELS = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}


class Settings(BaseSettings):
    """Toolkit configuration sourced from environment variables."""

    model_config = SettingsConfigDict(env_prefix="POLYNEWT_", env_file=".env", extra="ignore")

    threads: int = Field(default=1)
    log_level: str = Field(default="INFO")
    json_logs: bool | None = Field(default=None)
    suites_path: Path = Field(default=Path("config/suites.yaml"))
    out_dir: Path = Field(default=Path("runs"))
    debug_certify: bool = Field(default=False)

    @field_validator("threads", mode="before")
    @classmethod
    def _normalize_threads(cls, value: Any) -> Any:
        if value in ("", None):
            return 1
        try:
            number = int(value)
        except (TypeError, ValueError):
            raise ValueError("threads must be an integer") from None
        if number < 1:
            raise ValueError("threads must be at least 1")
        return number

    @field_validator("log_level", mode="before")
    @classmethod
    def _normalize_level(cls, value: Any) -> Any:
        if isinstance(value, str):
            level = value.strip().upper() or "INFO"
            if level not in _LOG_LEVELS:
                raise ValueError(f"unknown log level: {value}")
            return level
        return value

    @field_validator("json_logs", mode="before")
    @classmethod
    def _normalize_optional_flag(cls, value: Any) -> Any:
        if isinstance(value, str) and not value.strip():
            return None
        return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


settings = get_settings()

THREADS = settings.threads
LOG_LEVEL = settings.log_level
SUITES_PATH = settings.suites_path


__all__ = [
    "LOG_LEVEL",
    "SUITES_PATH",
    "Settings",
    "THREADS",
    "get_settings",
    "settings",
]
