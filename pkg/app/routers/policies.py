from fastapi import APIRouter, Depends, HTTPException, Request, status
import numpy as np

from app import schemas
from app.analysis import identity_sweep, sweep_correlation
from app.checkpoint import Model
from app.config import settings
from app.envs import evaluate_policy, make_env
from app.hypergen import NoiseSpec, generate, sample_policy
from app.policy import PolicyParams

router = APIRouter(prefix="/api/v1/policies", tags=["policies"])


def get_model(request: Request) -> Model:
    """Checkpoint loaded at startup"""
    model = getattr(request.app.state, "model", None)
    if model is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No checkpoint loaded; set CHECKPOINT_PATH",
        )
    return model


def _policy_response(command: float, policy: PolicyParams) -> schemas.PolicyResponse:
    return schemas.PolicyResponse(
        command=command,
        obs_dim=policy.obs_dim,
        act_dim=policy.act_dim,
        hidden=policy.hidden,
        flat_size=PolicyParams.flat_size(policy.obs_dim, policy.act_dim, policy.hidden),
        params={name: array.tolist() for name, array in policy.arrays().items()},
    )


@router.get("/info", response_model=schemas.ModelInfo)
def model_info(request: Request, model: Model = Depends(get_model)):
    """Metadata of the served checkpoint"""
    return schemas.ModelInfo(
        path=str(request.app.state.checkpoint_path),
        version=request.app.state.checkpoint_version,
        metadata=model.metadata,
    )


@router.post("/generate", response_model=schemas.PolicyResponse)
def generate_policy(payload: schemas.GenerateRequest, model: Model = Depends(get_model)):
    """Policy parameters for a return command, optionally perturbed"""
    if payload.noise > 0:
        rng = np.random.default_rng(payload.seed)
        policy = sample_policy(model.generator, payload.command, NoiseSpec(payload.noise), rng)
    else:
        policy = generate(model.generator, payload.command)
    return _policy_response(payload.command, policy)


@router.post("/evaluate", response_model=schemas.EvaluateResponse)
def evaluate_command(payload: schemas.EvaluateRequest, model: Model = Depends(get_model)):
    if payload.episodes > settings.MAX_EVAL_EPISODES:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"episodes must be at most {settings.MAX_EVAL_EPISODES}",
        )
    policy = generate(model.generator, payload.command)
    returns = evaluate_policy(make_env(model.env), policy, model.stat, payload.episodes,
                              np.random.default_rng(payload.seed), model.output_activation)
    return schemas.EvaluateResponse(
        command=payload.command,
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        returns=[float(r) for r in returns],
    )


@router.post("/sweep", response_model=schemas.SweepResponse)
def sweep_commands(payload: schemas.SweepRequest, model: Model = Depends(get_model)):
    """Commanded vs achieved return over evenly spaced commands"""
    if payload.num > settings.MAX_SWEEP_COMMANDS:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"num must be at most {settings.MAX_SWEEP_COMMANDS}",
        )
    if payload.episodes > settings.MAX_EVAL_EPISODES:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"episodes must be at most {settings.MAX_EVAL_EPISODES}",
        )
    rows = identity_sweep(model, payload.c_min, payload.c_max, payload.num, payload.episodes,
                          np.random.default_rng(payload.seed))
    return schemas.SweepResponse(rows=rows, spearman=sweep_correlation(rows))
