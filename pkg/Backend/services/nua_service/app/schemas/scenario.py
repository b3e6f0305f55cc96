from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

SCHEMA_VERSION = 1

# Average cache hit ratios for BS ids 1..10 (three macros, then seven small cells).
TABLE_CACHE_HIT_RATIOS: Tuple[float, ...] = (0.27, 0.12, 0.28, 0.12, 0.17, 0.22, 0.22, 0.24, 0.24, 0.19)


class BsKind(str, Enum):
    MACRO = "Macro"
    SMALL = "Small"


class Location(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float


class Area(BaseModel):
    """Axis-aligned rectangle in meters."""

    model_config = ConfigDict(frozen=True)

    x_min: float = 0.0
    y_min: float = 0.0
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def _non_empty(self) -> "Area":
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("area must have positive width and height")
        return self

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, loc: Location) -> bool:
        return self.x_min <= loc.x <= self.x_max and self.y_min <= loc.y <= self.y_max


class RadioConfig(BaseModel):
    """Channel constants shared by every base station."""

    model_config = ConfigDict(frozen=True)

    bandwidth_hz: float = Field(10e6, gt=0)
    noise_power_dbm: float = -174.0
    receiver_sensitivity_dbm: float = -123.0
    shadowing_db: float = Field(5.0, ge=0)
    fading_db: float = Field(9.0, ge=0)
    solar_irradiance_w_m2: float = Field(1000.0, gt=0)


class AlgorithmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kappa: float = Field(2.0, ge=0)
    epsilon: float = Field(1e-3, gt=0, lt=0.5)


class BaseStation(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    kind: BsKind
    position: Location
    tx_power_dbm: float
    static_power_w: float = Field(gt=0)
    load_power_coeff: float = Field(gt=0)
    green_supply_w: float = Field(ge=0)
    backhaul_rate_bps: float = Field(gt=0)
    cache_hit_ratio: float = Field(ge=0, le=1)
    antenna_gain_db: float = 15.0
    panel_area_m2: float = Field(0.0, ge=0)


class TrafficPoint(BaseModel):
    """One quadrature cell of the demand field.

    ``arrival_rate`` is a density (arrivals per second per square meter), so the
    demand carried by the cell is ``arrival_rate * mean_size * cell_area`` bits/s.
    """

    model_config = ConfigDict(frozen=True)

    location: Location
    arrival_rate: float = Field(ge=0)
    mean_size: float = Field(gt=0)
    cell_area: float = Field(gt=0)

    @property
    def demand_bps(self) -> float:
        return self.arrival_rate * self.mean_size * self.cell_area


class TrafficGrid(BaseModel):
    """Row-major grid of traffic points: index = row * nx + column, rows along y."""

    model_config = ConfigDict(frozen=True)

    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    points: List[TrafficPoint]

    @model_validator(mode="after")
    def _shape_matches(self) -> "TrafficGrid":
        if len(self.points) != self.nx * self.ny:
            raise ValueError(f"traffic grid {self.nx}x{self.ny} holds {len(self.points)} points")
        return self


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    rng_seed: int = 0
    area: Area
    radio: RadioConfig = RadioConfig()
    algorithm: AlgorithmConfig = AlgorithmConfig()
    base_stations: List[BaseStation]
    traffic_grid: TrafficGrid

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        if not self.base_stations:
            raise ValueError("scenario needs at least one base station")
        ids = [bs.id for bs in self.base_stations]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate base station ids in {ids}")
        for bs in self.base_stations:
            if not self.area.contains(bs.position):
                raise ValueError(f"BS {bs.id} lies outside the area")
        seen = set()
        for index, point in enumerate(self.traffic_grid.points):
            if not self.area.contains(point.location):
                raise ValueError(f"traffic point {index} lies outside the area")
            key = (point.location.x, point.location.y)
            if key in seen:
                raise ValueError(f"traffic point {index} repeats a location")
            seen.add(key)
        return self

    @property
    def traffic(self) -> List[TrafficPoint]:
        return self.traffic_grid.points

    @property
    def kappa(self) -> float:
        return self.algorithm.kappa

    @property
    def epsilon(self) -> float:
        return self.algorithm.epsilon

    @property
    def bandwidth(self) -> float:
        return self.radio.bandwidth_hz

    def station(self, bs_id: int) -> BaseStation:
        for bs in self.base_stations:
            if bs.id == bs_id:
                return bs
        raise KeyError(bs_id)


class GenerationParams(BaseModel):
    """Inputs of the random deployment generator; defaults reproduce the reference setup."""

    model_config = ConfigDict(frozen=True)

    n_macro: int = Field(3, ge=0)
    n_small: int = Field(7, ge=0)
    width_m: float = 2000.0
    height_m: float = 2000.0
    grid_nx: int = Field(50, ge=1)
    grid_ny: int = Field(50, ge=1)
    arrival_rate_range: Tuple[float, float] = (0.5e-5, 1.5e-5)
    mean_size_bits: float = Field(1e5, gt=0)
    macro_tx_power_dbm: float = 43.0
    small_tx_power_dbm: float = 33.0
    macro_static_power_w: float = Field(750.0, gt=0)
    small_static_power_w: float = Field(37.0, gt=0)
    macro_load_power_coeff: float = Field(500.0, gt=0)
    small_load_power_coeff: float = Field(4.0, gt=0)
    macro_backhaul_bps: float = Field(1e9, gt=0)
    small_backhaul_bps: float = Field(5e6, gt=0)
    macro_green_range_w: Tuple[float, float] = (750.0, 1300.0)
    small_green_range_w: Tuple[float, float] = (37.0, 48.0)
    solar_efficiency: float = Field(0.174, gt=0, le=1)
    cache_hit_ratios: List[float] = list(TABLE_CACHE_HIT_RATIOS)
    extra_cache_hit_range: Tuple[float, float] = (0.1, 0.3)
    antenna_gain_db: float = 15.0
    radio: RadioConfig = RadioConfig()
    algorithm: AlgorithmConfig = AlgorithmConfig()

    @model_validator(mode="after")
    def _ranges(self) -> "GenerationParams":
        for name in ("arrival_rate_range", "macro_green_range_w", "small_green_range_w", "extra_cache_hit_range"):
            low, high = getattr(self, name)
            if low < 0 or high < low:
                raise ValueError(f"{name} must satisfy 0 <= low <= high")
        if self.extra_cache_hit_range[1] > 1 or any(not 0 <= a <= 1 for a in self.cache_hit_ratios):
            raise ValueError("cache hit ratios must lie in [0, 1]")
        return self


class ScenarioSummary(BaseModel):
    n_base_stations: int
    n_points: int
    total_demand_bps: float
    seed: Optional[int] = None
