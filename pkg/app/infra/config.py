from __future__ import annotations

from functools import lru_cache
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    """Process-wide settings loaded from environment variables and .env files."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    environment: str = Field(default="development", validation_alias="BITALLOC_ENV")
    log_level: str = Field(default="WARNING", validation_alias="BITALLOC_LOG_LEVEL")

    # Enumeration and sweep caps
    grid_point_cap: int = Field(default=10_000_000, validation_alias="BITALLOC_GRID_POINT_CAP")
    weight_lattice_cap: int = Field(
        default=2_000_000, validation_alias="BITALLOC_WEIGHT_LATTICE_CAP"
    )
    support_lattice_cap: int = Field(
        default=20_000, validation_alias="BITALLOC_SUPPORT_LATTICE_CAP"
    )

    # Iterative solvers
    pgd_max_iterations: int = Field(default=100_000, validation_alias="BITALLOC_PGD_MAX_ITER")
    bisection_max_iterations: int = Field(
        default=200, validation_alias="BITALLOC_BISECTION_MAX_ITER"
    )

    output_directory: str = Field(default="results", validation_alias="BITALLOC_OUTPUT_DIR")

    @property
    def solver_limits(self) -> Dict[str, int]:
        return {
            "pgd_max_iterations": self.pgd_max_iterations,
            "bisection_max_iterations": self.bisection_max_iterations,
        }

    def cap_payload(self) -> Dict[str, Any]:
        return {
            "grid_point_cap": self.grid_point_cap,
            "weight_lattice_cap": self.weight_lattice_cap,
            "support_lattice_cap": self.support_lattice_cap,
        }


@lru_cache
def get_settings() -> AppSettings:
    load_dotenv()
    return AppSettings()


__all__ = ["AppSettings", "get_settings"]
