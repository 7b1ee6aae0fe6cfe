# app/schemas/__init__.py

# Run configs
from .config import ArsConfig, EnvName, OutputActivation, RunConfig, TrainingConfig

# Analysis rows
from .analysis import FingerprintPoint, SweepRow

# API payloads
from .policy import (
    EvaluateRequest, EvaluateResponse, GenerateRequest, ModelInfo,
    PolicyResponse, SweepRequest, SweepResponse
)

__all__ = [
    # Config
    "ArsConfig", "EnvName", "OutputActivation", "RunConfig", "TrainingConfig",

    # Analysis
    "FingerprintPoint", "SweepRow",

    # API
    "EvaluateRequest", "EvaluateResponse", "GenerateRequest", "ModelInfo",
    "PolicyResponse", "SweepRequest", "SweepResponse",
]
