from enum import Enum
from typing import List, Optional

from pydantic import BaseModel

from services.nua_service.app.schemas.run import Scheme

RESULTS_SCHEMA_VERSION = 1


class RunStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"


class PerBsMetrics(BaseModel):
    bs_id: int
    kind: str
    rho: float
    rho_tilde: float
    w: float
    mu: float
    mu_tilde: float
    power_w: float
    brown_w: float
    point_count: int
    area_share: float


class MetricsBundle(BaseModel):
    psi: float
    latency_index: float
    brown_power_total: float
    per_bs: List[PerBsMetrics]


class IterationRecord(BaseModel):
    iteration: int
    psi: float
    delta: Optional[float] = None
    max_eta_change: float
    rho: List[float]
    rho_tilde: List[float]
    ad_change: Optional[float] = None
    descent_product: Optional[float] = None


class IterationTrace(BaseModel):
    records: List[IterationRecord] = []
    status: RunStatus = RunStatus.MAX_ITERATIONS
    iterations: int = 0
    witness_bs: Optional[int] = None

    def psi_sequence(self) -> List[float]:
        return [record.psi for record in self.records]


class BsPosition(BaseModel):
    bs_id: int
    x: float
    y: float


class CoverageMap(BaseModel):
    nx: int
    ny: int
    cells: List[List[int]]
    bs_positions: List[BsPosition] = []


class DrbSweepPoint(BaseModel):
    bias: float
    psi: float
    latency_index: Optional[float] = None
    brown_power_w: Optional[float] = None


class DrbSweepResult(BaseModel):
    best_bias: float
    best_psi: float
    curve: List[DrbSweepPoint]


class RunReport(BaseModel):
    """Content of metrics.json."""

    schema_version: int = RESULTS_SCHEMA_VERSION
    scheme: Scheme
    status: RunStatus
    iterations: int
    witness_bs: Optional[int] = None
    psi: float
    relaxed_psi: Optional[float] = None
    planned_psi: Optional[float] = None
    best_bias: Optional[float] = None
    metrics: Optional[MetricsBundle] = None


class SweepRow(BaseModel):
    value: float
    psi: Optional[float] = None
    latency_index: Optional[float] = None
    brown_power_w: Optional[float] = None
    iterations: Optional[int] = None
    status: Optional[RunStatus] = None
    error: str = ""


class CompareRow(BaseModel):
    scheme: Scheme
    psi: Optional[float] = None
    latency_index: Optional[float] = None
    brown_power_w: Optional[float] = None
    iterations: Optional[int] = None
    status: Optional[RunStatus] = None
    error: str = ""
