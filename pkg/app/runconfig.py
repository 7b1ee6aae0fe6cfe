# app/runconfig.py
"""Flat key = value run config files (python-dotenv syntax)."""
import io
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from app.errors import ConfigFileNotFound, ConfigParseError, ConfigValidationError
from app.schemas.config import ArsConfig, RunConfig, TrainingConfig

logger = logging.getLogger(__name__)

CONFIG_TYPES = {"gogepo": TrainingConfig, "ars": ArsConfig}


def _read_pairs(path: Path) -> Dict[str, Optional[str]]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigFileNotFound(str(path)) from None
    # dotenv skips malformed lines silently; reject them here so typos surface
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigParseError(str(path), number, stripped)
    return dict(dotenv_values(stream=io.StringIO(text), interpolate=False))


def parse_config(path: Union[str, Path], algorithm: Optional[str] = None) -> RunConfig:
    """Typed config with defaults applied; unknown keys are rejected"""
    path = Path(path)
    pairs = {key.strip().lower(): value for key, value in _read_pairs(path).items()}
    empty = [key for key, value in pairs.items() if value is None or value.strip() == ""]
    if empty:
        raise ConfigValidationError(str(path), [(key, "value is missing") for key in empty])
    chosen = algorithm or pairs.get("algorithm") or "gogepo"
    if pairs.get("algorithm", chosen) != chosen:
        raise ConfigValidationError(str(path), [("algorithm", f"expected {chosen!r}, file says {pairs['algorithm']!r}")])
    if chosen not in CONFIG_TYPES:
        raise ConfigValidationError(str(path), [("algorithm", f"unknown algorithm {chosen!r}")])
    pairs["algorithm"] = chosen
    try:
        config = CONFIG_TYPES[chosen].model_validate(pairs)
    except ValidationError as exc:
        problems = [(".".join(str(part) for part in err["loc"]) or "config", err["msg"]) for err in exc.errors()]
        raise ConfigValidationError(str(path), problems) from None
    logger.debug("config %s parsed as %s", path, type(config).__name__)
    return config


def format_config(config: RunConfig) -> str:
    lines = []
    for key, value in config.model_dump().items():
        if value is None:
            continue
        if isinstance(value, Enum):
            value = value.value
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_config(path: Union[str, Path], config: RunConfig) -> Path:
    """Resolved config (seed included) for exact replay"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_config(config), encoding="utf-8")
    return path
