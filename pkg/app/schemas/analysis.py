# app/schemas/analysis.py
import math
from pydantic import BaseModel, Field, field_validator


class SweepRow(BaseModel):
    command: float
    mean_return: float
    std_return: float
    episodes: int = Field(..., ge=1)


class FingerprintPoint(BaseModel):
    x: float
    y: float
    ret: float = Field(..., description="Achieved return")
    source: str = Field(..., description="buffer | generator@<interactions>")

    @field_validator("x", "y")
    @classmethod
    def validate_coordinate(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("coordinates must be finite")
        return v
