from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.nua_service.app.schemas.scenario import GenerationParams


class Scheme(str, Enum):
    NUA = "nua"
    NUA_NC = "nua_nc"
    DRB = "drb"


class SweepVariable(str, Enum):
    KAPPA = "kappa"
    BACKHAUL_RATE = "backhaul_rate"
    SOLAR_EFFICIENCY = "solar_efficiency"
    DRB_BIAS = "drb_bias"


class RunOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(100, ge=1)
    tol: float = Field(1e-6, gt=0)
    delta0: float = Field(0.5, gt=0, lt=1)
    max_backtracks: int = Field(40, ge=1)
    line_search: bool = True
    polish: bool = True
    max_round_combinations: int = Field(8192, ge=1)
    check_descent: bool = False


class BiasConfig(BaseModel):
    """Per-tier data-rate bias; the macro tier is the reference with bias 1."""

    model_config = ConfigDict(frozen=True)

    small: float = Field(gt=0)

    @property
    def macro(self) -> float:
        return 1.0


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variable: SweepVariable
    start: Optional[float] = None
    stop: Optional[float] = None
    n: Optional[int] = Field(None, ge=1)
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_form(self) -> "SweepSpec":
        ranged = None not in (self.start, self.stop, self.n)
        if ranged == (self.values is not None):
            raise ValueError("give either start/stop/n or an explicit list of values")
        if self.values is not None and not self.values:
            raise ValueError("sweep grid must not be empty")
        return self

    def grid(self) -> List[float]:
        """Grid values in ascending order."""
        if self.values is not None:
            return sorted(float(v) for v in self.values)
        return sorted(np.linspace(self.start, self.stop, self.n).tolist())

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """Parse ``var:start:stop:n`` or ``var:v1,v2,...``."""
        parts = text.split(":")
        if len(parts) == 2:
            return cls(variable=parts[0], values=[float(v) for v in parts[1].split(",") if v])
        if len(parts) == 4:
            return cls(variable=parts[0], start=float(parts[1]), stop=float(parts[2]), n=int(parts[3]))
        raise ValueError(f"sweep spec {text!r} is not var:start:stop:n or var:v1,v2,...")


class RunConfig(BaseModel):
    """Everything a CLI or HTTP run needs; exactly one scenario source."""

    model_config = ConfigDict(frozen=True)

    scenario_path: Optional[str] = None
    generation: Optional[GenerationParams] = None
    seed: int = 0
    scheme: Scheme = Scheme.NUA
    kappa: Optional[float] = Field(None, ge=0)
    sweep: Optional[SweepSpec] = None
    sweep_bs: Optional[int] = None
    bias_grid: Optional[List[float]] = None
    out_dir: str = "results"
    workers: int = Field(1, ge=1)
    options: RunOptions = RunOptions()

    @model_validator(mode="after")
    def _one_source(self) -> "RunConfig":
        if (self.scenario_path is None) == (self.generation is None):
            raise ValueError("give exactly one of scenario_path or generation")
        if self.bias_grid is not None and (not self.bias_grid or min(self.bias_grid) <= 0):
            raise ValueError("bias grid must be non-empty and positive")
        return self
