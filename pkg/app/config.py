# app/config.py
from pydantic_settings import BaseSettings
from typing import Optional

class Settings(BaseSettings):
    # App
    APP_NAME: str = "GoGePo Policy Service"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Runs
    RUNS_DIR: str = "runs"
    CHECKPOINT_PATH: Optional[str] = None  # checkpoint served by the API

    # API guards
    MAX_EVAL_EPISODES: int = 100
    MAX_SWEEP_COMMANDS: int = 200

    class Config:
        env_file = ".env"
        case_sensitive = False

settings = Settings()
