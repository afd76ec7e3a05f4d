"""
Application configuration settings.
"""
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application
    APP_NAME: str = "Driven Qubit GP Simulator"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"
    LOG_DIR: Optional[str] = None  # file logging is off unless set

    # Run defaults
    DEFAULT_WORKERS: int = 1
    DEFAULT_SAMPLES_PER_CYCLE: int = 256
    DEFAULT_DEPTH: tuple[int, int] = (25, 25)
    DEFAULT_FORMAT: str = "csv"

    # Pseudomode oracle
    ORACLE_INITIAL_FOCK: int = 4
    ORACLE_MAX_FOCK: int = 64
    ORACLE_TOP_POPULATION_TOL: float = 1e-8

    # Sweeps
    SHOW_PROGRESS: bool = False
    CONFIG_SCHEMA_VERSION: int = 1

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore",  # Ignore extra fields in .env
    )


settings = Settings()
