# app/schemas/config.py
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator
from typing import Literal, Optional
from enum import Enum


class EnvName(str, Enum):
    MOUNTAINCAR = "mountaincar"
    POINTREACHER = "pointreacher"


class OutputActivation(str, Enum):
    LINEAR = "linear"
    TANH = "tanh"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=True, validate_default=True)

    env: EnvName = Field(EnvName.MOUNTAINCAR, description="Built-in environment")
    seed: int = Field(0, ge=0, description="Master seed")
    slice_size: int = Field(16, ge=1, description="Slice size f of generated matrices")
    hidden: int = Field(256, ge=1, description="Hidden width of the generated policy")
    output_activation: OutputActivation = Field(OutputActivation.LINEAR, description="Policy output layer")
    total_interactions: int = Field(100_000, ge=1, description="Environment step budget")
    eval_interval: int = Field(1000, ge=1, description="Environment steps between evaluations")
    eval_episodes: int = Field(10, ge=1, description="Episodes per evaluation")

    @field_validator("hidden")
    @classmethod
    def validate_hidden(cls, v: int, info: ValidationInfo) -> int:
        f = info.data.get("slice_size")
        if f and v % f != 0:
            raise ValueError(f"hidden width {v} must be divisible by slice_size {f}")
        return v


class TrainingConfig(RunConfig):
    """GoGePo run; defaults follow the published hyperparameter table"""

    algorithm: Literal["gogepo"] = "gogepo"
    embedding_dim: int = Field(8, ge=1, description="Size d of slice embeddings")
    head_hidden: int = Field(256, ge=1, description="Hidden width of generator heads")
    value_hidden: int = Field(256, ge=1, description="Hidden width of the value MLP U")
    n_probing_states: int = Field(200, ge=1, description="Number of probing states")
    noise_sigma: float = Field(0.1, ge=0, description="Parameter-space exploration noise")
    drive: float = Field(20.0, description="Offset added to the best return for the next command")
    batch_size: int = Field(16, ge=1)
    generator_lr: float = Field(2e-6, gt=0)
    evaluator_lr: float = Field(5e-3, gt=0)
    generator_updates: int = Field(20, ge=1, description="Generator Adam steps per episode")
    evaluator_updates: int = Field(5, ge=1, description="Evaluator Adam steps per episode")
    buffer_capacity: int = Field(10_000, ge=1)
    recency_exponent: float = Field(1.1, ge=0, description="0 samples the buffer uniformly")
    command_scale: float = Field(1.0, gt=0, description="Multiplier on commands fed to the generator")
    output_scaling: bool = Field(True, description="Scale generated layers by 2/sqrt(fan_in)")
    bias_command: bool = Field(True, description="Feed the command to the bias heads")
    save_stages: bool = Field(False, description="Write a generator checkpoint at every evaluation")
    max_episodes: Optional[int] = Field(None, ge=1, description="Stop after this many training episodes")


class ArsConfig(RunConfig):
    """Augmented Random Search baseline; defaults are the MountainCar tuning"""

    algorithm: Literal["ars"] = "ars"
    step_size: float = Field(0.01, gt=0)
    n_directions: int = Field(1, ge=1)
    n_elite: int = Field(1, ge=1)
    noise: float = Field(0.05, gt=0, description="Exploration noise nu")

    @field_validator("n_elite")
    @classmethod
    def validate_elite(cls, v: int, info: ValidationInfo) -> int:
        n = info.data.get("n_directions")
        if n is not None and v > n:
            raise ValueError(f"n_elite ({v}) cannot exceed n_directions ({n})")
        return v
