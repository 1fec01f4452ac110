"""HTTP facade over the simulator.

POST /run and POST /check take scenario source and return the machine
report; the CLI is a thin client of the same request/response models,
either in-process or against a remote instance.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI
from pydantic import BaseModel, Field

from .simulator import run_source


class ScenarioRequest(BaseModel):
    source: str
    name: str = "scenario"
    deterministic_reductions: bool = False


class ScenarioResponse(BaseModel):
    exit_code: int
    report: dict[str, Any] = Field(default_factory=dict)


def execute(request: ScenarioRequest, mode: str) -> ScenarioResponse:
    report = run_source(
        request.source, name=request.name, mode=mode,
        deterministic_reductions=request.deterministic_reductions)
    return ScenarioResponse(exit_code=report.exit_code,
                            report=report.to_dict())


app = FastAPI(title="ddsim", version="0.1.0")


@app.post("/run", response_model=ScenarioResponse)
def run_endpoint(request: ScenarioRequest) -> ScenarioResponse:
    return execute(request, "run")


@app.post("/check", response_model=ScenarioResponse)
def check_endpoint(request: ScenarioRequest) -> ScenarioResponse:
    return execute(request, "check")


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}
