"""HTTP service exposing the pipeline.

Each endpoint wraps one pipeline stage (plus gate approval and a combined
run). Errors surface as JSON bodies {"error": kind, "message": ...} with the
status code implied by the kind, so thin clients can map them to exit codes
without parsing messages.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import pipeline
from .errors import BenchforgeError, GatePendingError

STATUS_BY_KIND = {
    "config": 400,
    "validation": 422,
    "generation": 422,
    "gate_pending": 409,
    "backend": 502,
    "error": 500,
}


class RunRequest(BaseModel):
    """Run configuration shared by every stage endpoint."""

    task: str = "calendar"
    seed: int = 0
    count: int = 50
    mode: str = "deterministic"
    gates: str = "auto"
    out: str = "run"
    backend: str | None = None
    judge_backend: str | None = None
    target_backend: str | None = None
    planner_backend: str | None = None
    auth_env: str = "BENCHFORGE_API_KEY"
    p_infeasible: float = Field(default=0.2)
    bucket_width: float = Field(default=0.1)
    granularity: int = 15
    target_model: str = "target"

    def to_config(self) -> pipeline.RunConfig:
        return pipeline.RunConfig.from_dict(self.model_dump())


class StageResponse(BaseModel):
    stage: str
    detail: dict


class ApproveRequest(BaseModel):
    out: str
    stage: str


class GateResponse(BaseModel):
    stage: str
    status: str
    edit_distance: float | None = None
    artifact: str


class PipelineResponse(BaseModel):
    stages: list[dict]
    manifest: str


def create_app() -> FastAPI:
    app = FastAPI(title="benchforge", version="1.0")

    @app.exception_handler(BenchforgeError)
    async def _benchforge_error(request: Request, exc: BenchforgeError):
        status = STATUS_BY_KIND.get(exc.kind, 500)
        body = {"error": exc.kind, "message": str(exc)}
        if isinstance(exc, GatePendingError):
            body["stage"] = exc.stage
            body["artifact"] = exc.artifact
        return JSONResponse(status_code=status, content=body)

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok"}

    @app.post("/plan", response_model=StageResponse)
    async def plan(request: RunRequest) -> StageResponse:
        result = pipeline.stage_plan(request.to_config())
        return StageResponse(stage="plan", detail=result)

    @app.post("/generate", response_model=StageResponse)
    async def generate(request: RunRequest) -> StageResponse:
        result = pipeline.stage_generate(request.to_config())
        return StageResponse(stage="generate", detail=result)

    @app.post("/verify", response_model=StageResponse)
    async def verify(request: RunRequest) -> StageResponse:
        result = pipeline.stage_verify(request.to_config())
        return StageResponse(stage="verify", detail=result)

    @app.post("/evaluate", response_model=StageResponse)
    async def evaluate(request: RunRequest) -> StageResponse:
        result = pipeline.stage_evaluate(request.to_config())
        return StageResponse(stage="evaluate", detail=result)

    @app.post("/report", response_model=StageResponse)
    async def report(request: RunRequest) -> StageResponse:
        result = pipeline.stage_report(request.to_config())
        return StageResponse(stage="report", detail=result)

    @app.post("/pipeline", response_model=PipelineResponse)
    async def run(request: RunRequest) -> PipelineResponse:
        result = pipeline.run_pipeline(request.to_config())
        return PipelineResponse(stages=result["stages"], manifest=result["manifest"])

    @app.post("/gates/approve", response_model=GateResponse)
    async def approve(request: ApproveRequest) -> GateResponse:
        gate = pipeline.approve_gate(request.out, request.stage)
        return GateResponse(
            stage=gate["stage"],
            status=gate["status"],
            edit_distance=gate.get("edit_distance"),
            artifact=gate["artifact"],
        )

    return app


app = create_app()
