import logging
import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, field_validator

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class Settings(BaseModel):
    """Process-level settings read from the environment (and an optional .env file)."""

    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"
    host: str = "0.0.0.0"
    port: int = 8000

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"unknown log level {value!r}")
        return value


@lru_cache
def get_settings() -> Settings:
    return Settings(
        log_level=os.getenv("NUA_LOG_LEVEL", "INFO"),
        host=os.getenv("HOST", "0.0.0.0"),
        port=int(os.getenv("PORT", "8000")),
    )


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for an entry point."""
    logging.basicConfig(level=level or get_settings().log_level, format=LOG_FORMAT)
