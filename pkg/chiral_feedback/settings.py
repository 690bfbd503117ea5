import os
import logging
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from .errors import ConfigError


# Variables already exported in the shell take precedence over .env
load_dotenv(override=False)


class Settings(BaseModel):
    threads: int = Field(1, ge=1)
    history_path: str = "run_history.json"
    history_limit: int = Field(10, ge=1)
    log_level: str = "INFO"
    app_version: str = "1.0.0"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    raw = {
        "threads": os.getenv("SIM_THREADS", "1"),
        "history_path": os.getenv("SIM_HISTORY_PATH", "run_history.json"),
        "history_limit": os.getenv("SIM_HISTORY_LIMIT", "10"),
        "log_level": os.getenv("SIM_LOG_LEVEL", "INFO").upper(),
        "app_version": os.getenv("APP_VERSION", "1.0.0"),
    }
    try:
        settings = Settings(**raw)
    except ValidationError as e:
        raise ConfigError(
            "Invalid SIM_* environment settings. Check your .env file.",
            [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()],
        ) from e

    if logging.getLevelName(settings.log_level) == f"Level {settings.log_level}":
        raise ConfigError(f"Unknown SIM_LOG_LEVEL '{settings.log_level}'")
    return settings
