"""Process-level runtime settings read from the environment / .env."""

from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="NOISE_BUDGET_", env_file=".env", extra="ignore")

    # Cap on joblib workers for voltage sweeps, optimizer seeding and oracle batches
    threads: int = 1
    log_level: str = "INFO"

    @field_validator("threads")
    @classmethod
    def _threads(cls, value: int) -> int:
        if value == 0 or value < -1:
            raise ValueError("threads must be positive or -1 (all cores)")
        return value

    @field_validator("log_level")
    @classmethod
    def _level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value}")
        return level


@lru_cache()
def get_settings() -> RuntimeSettings:
    return RuntimeSettings()
