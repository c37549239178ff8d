"""FastAPI application exposing training, evaluation and the self-checks.

Domain errors (bad datasets, contract violations, missing files) map to
HTTP 400 with the message in ``detail``; request-shape errors are
FastAPI's usual 422.  Run outcomes that are not errors (a diverged
training run, a failed geometry check) come back as 200 with a status
field, so clients can distinguish "the run told you something" from
"the request was wrong".
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import HygraphError
from .. import runners
from .schemas import (
    AblateRequest,
    AblateResponse,
    CurvatureDumpRequest,
    CurvatureDumpResponse,
    EvalRequest,
    EvalResponse,
    GeometryCheckRequest,
    GeometryCheckResponse,
    HealthResponse,
    TrainRequest,
    TrainResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="hygraph",
        version=__version__,
        description="Multi-order hyperbolic graph convolution with curvature attention",
    )

    @app.exception_handler(HygraphError)
    async def domain_error(request: Request, exc: HygraphError) -> JSONResponse:
        return JSONResponse(status_code=400, content={
            "detail": str(exc), "error_type": type(exc).__name__,
        })

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=400, content={
            "detail": str(exc), "error_type": "FileNotFoundError",
        })

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        return runners.run_train(req)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        return runners.run_eval(req)

    @app.post("/ablate", response_model=AblateResponse)
    def ablate(req: AblateRequest) -> AblateResponse:
        return runners.run_ablate(req)

    @app.post("/geometry-check", response_model=GeometryCheckResponse)
    def geometry_check(req: GeometryCheckRequest) -> GeometryCheckResponse:
        return runners.run_geometry_check(req)

    @app.post("/curvature-dump", response_model=CurvatureDumpResponse)
    def curvature_dump(req: CurvatureDumpRequest) -> CurvatureDumpResponse:
        return runners.run_curvature_dump(req)

    return app
