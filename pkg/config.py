"""
Configuration management for stain-learn
"""
from pathlib import Path

import psutil
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _default_workers() -> int:
    return max(1, psutil.cpu_count(logical=False) or 1)


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(env_prefix="NSL_", env_file=".env", case_sensitive=False, extra="ignore")

    # Logging
    log_level: str = Field("INFO")
    log_format: str = Field("console")  # console or json

    # Runs
    output_dir: Path = Field(Path("runs"))
    workers: int = Field(default_factory=_default_workers)
    seed: int = Field(0)

    # Optical density floor shared by every model
    epsilon: float = Field(1e-6)

    @field_validator("log_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in ("console", "json"):
            raise ValueError(f"log_format must be 'console' or 'json', got {value!r}")
        return value

    @field_validator("workers")
    @classmethod
    def _positive_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be at least 1")
        return value


# Global settings instance
settings = Settings()


def create_directories(*directories: Path) -> None:
    """Create run output directories"""
    for directory in directories or (settings.output_dir,):
        Path(directory).mkdir(parents=True, exist_ok=True)
