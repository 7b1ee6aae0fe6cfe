import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.checkpoint import load_checkpoint, restore_model
from app.config import settings
from app.errors import GoGePoError
from app.logging_setup import configure_logging
from app.routers import policies

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Load the served checkpoint once per worker"""
    configure_logging()
    logger.info("🚀 Starting %s...", settings.APP_NAME)
    app.state.model = None
    app.state.checkpoint_path = settings.CHECKPOINT_PATH
    app.state.checkpoint_version = None
    if settings.CHECKPOINT_PATH:
        try:
            checkpoint = load_checkpoint(settings.CHECKPOINT_PATH)
            app.state.model = restore_model(checkpoint)
            app.state.checkpoint_version = checkpoint.version
            logger.info("✅ Checkpoint loaded: %s (env %s)", settings.CHECKPOINT_PATH, app.state.model.env)
        except GoGePoError as exc:
            logger.error("❌ Could not load checkpoint: %s", exc)
    else:
        logger.warning("⚠️ CHECKPOINT_PATH is not set; policy endpoints return 503")

    yield

    logger.info("👋 Shutting down %s...", settings.APP_NAME)


app = FastAPI(
    title=settings.APP_NAME,
    description="Return-conditioned policy generation",
    version=__version__,
    docs_url="/api/docs",
    redoc_url="/api/redoc",
    openapi_url="/api/openapi.json",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(GoGePoError)
async def gogepo_error_handler(request: Request, exc: GoGePoError):
    return JSONResponse(status_code=status.HTTP_400_BAD_REQUEST, content={"detail": str(exc)})


@app.get("/health")
async def health_check(request: Request):
    model = getattr(request.app.state, "model", None)
    return {
        "status": "healthy" if model is not None else "degraded",
        "service": settings.APP_NAME,
        "version": __version__,
        "components": {
            "checkpoint": {
                "status": "loaded" if model is not None else "missing",
                "path": settings.CHECKPOINT_PATH,
                "env": model.env if model is not None else None,
            },
        },
        "links": {"documentation": "/api/docs", "info": "/api/v1/policies/info"},
    }


app.include_router(policies.router)
