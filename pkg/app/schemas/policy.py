# app/schemas/policy.py
from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Optional

from .analysis import SweepRow


class GenerateRequest(BaseModel):
    command: float = Field(..., description="Desired return")
    noise: float = Field(0.0, ge=0, description="Std of parameter noise added to the policy")
    seed: Optional[int] = Field(None, ge=0, description="Seed for the noise")


class PolicyResponse(BaseModel):
    command: float
    obs_dim: int
    act_dim: int
    hidden: int
    flat_size: int
    params: Dict[str, List]


class EvaluateRequest(BaseModel):
    command: float
    episodes: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)


class EvaluateResponse(BaseModel):
    command: float
    mean_return: float
    std_return: float
    returns: List[float]


class SweepRequest(BaseModel):
    c_min: float
    c_max: float
    num: int = Field(20, ge=2)
    episodes: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def validate_range(self):
        if not self.c_min < self.c_max:
            raise ValueError("c_min must be smaller than c_max")
        return self


class SweepResponse(BaseModel):
    rows: List[SweepRow]
    spearman: Optional[float] = None


class ModelInfo(BaseModel):
    path: str
    version: int
    metadata: Dict[str, object]
