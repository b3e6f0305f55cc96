from typing import List, Optional

from fastapi import APIRouter, HTTPException, status
from pydantic import BaseModel

from services.nua_service.app.core import baselines, experiments
from services.nua_service.app.core.errors import (
    DomainError,
    InfeasibleAssociationError,
    NuaError,
    ScenarioError,
    UncoveredLocationError,
)
from services.nua_service.app.core.radio import Network
from services.nua_service.app.core.report import coverage_map
from services.nua_service.app.core.scenario import generate_scenario
from services.nua_service.app.schemas.results import CoverageMap, RunReport, SweepRow
from services.nua_service.app.schemas.run import RunOptions, Scheme, SweepSpec
from services.nua_service.app.schemas.scenario import GenerationParams, Scenario

router = APIRouter()


class GenerateRequest(BaseModel):
    seed: int = 0
    params: GenerationParams = GenerationParams()


class RunRequest(BaseModel):
    scenario: Scenario
    scheme: Scheme = Scheme.NUA
    kappa: Optional[float] = None
    options: RunOptions = RunOptions()
    bias_grid: Optional[List[float]] = None


class RunResponse(BaseModel):
    report: RunReport
    coverage: CoverageMap


class SweepRequest(RunRequest):
    sweep: SweepSpec
    sweep_bs: Optional[int] = None


def _http_error(e: NuaError) -> HTTPException:
    if isinstance(e, (ScenarioError, DomainError)):
        code = status.HTTP_422_UNPROCESSABLE_ENTITY
    elif isinstance(e, (InfeasibleAssociationError, UncoveredLocationError)):
        code = status.HTTP_409_CONFLICT
    else:
        code = status.HTTP_500_INTERNAL_SERVER_ERROR
    return HTTPException(status_code=code, detail=str(e))


def _network(request: RunRequest) -> Network:
    network = Network.from_scenario(request.scenario)
    if request.kappa is not None:
        network = network.with_kappa(request.kappa)
    return network


@router.get("/health")
async def health():
    return {"status": "ok"}


@router.post("/scenarios/generate", response_model=Scenario)
def generate(request: GenerateRequest):
    """Generate a random scenario"""
    try:
        return generate_scenario(request.seed, request.params)
    except NuaError as e:
        raise _http_error(e)


@router.post("/runs", response_model=RunResponse)
def create_run(request: RunRequest):
    """Run one association scheme on the submitted scenario"""
    bias_grid = request.bias_grid or baselines.DEFAULT_BIAS_GRID
    try:
        network = _network(request)
        outcome = experiments.run_scheme(network, request.scheme, request.options, bias_grid)
        return RunResponse(report=outcome.report(), coverage=coverage_map(outcome.association, network))
    except NuaError as e:
        raise _http_error(e)


@router.post("/sweeps", response_model=List[SweepRow])
def create_sweep(request: SweepRequest):
    """Run one scheme over a parameter grid on the submitted scenario"""
    bias_grid = request.bias_grid or baselines.DEFAULT_BIAS_GRID
    try:
        return experiments.sweep(
            _network(request), request.sweep, request.scheme, request.options, sweep_bs=request.sweep_bs, bias_grid=bias_grid
        )
    except NuaError as e:
        raise _http_error(e)
