import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from services.nua_service.app.core.errors import ScenarioError
from services.nua_service.app.core.radio import Network
from services.nua_service.app.schemas.scenario import (
    SCHEMA_VERSION,
    AlgorithmConfig,
    Area,
    BaseStation,
    BsKind,
    GenerationParams,
    Location,
    Scenario,
    TrafficGrid,
    TrafficPoint,
)

logger = logging.getLogger(__name__)


def _grid_points(params: GenerationParams, arrival_rates: np.ndarray):
    dx = params.width_m / params.grid_nx
    dy = params.height_m / params.grid_ny
    cell_area = dx * dy
    points = []
    for row in range(params.grid_ny):
        for col in range(params.grid_nx):
            points.append(
                TrafficPoint(
                    location=Location(x=(col + 0.5) * dx, y=(row + 0.5) * dy),
                    arrival_rate=float(arrival_rates[row * params.grid_nx + col]),
                    mean_size=params.mean_size_bits,
                    cell_area=cell_area,
                )
            )
    return points


def generate_scenario(seed: int, params: GenerationParams = GenerationParams()) -> Scenario:
    """Random deployment over a rectangular area with a uniform traffic grid.

    Draw order is fixed (BS x, BS y, arrival rates, green supplies, extra hit
    ratios), so the result is a pure function of ``(seed, params)``.
    """
    n_bs = params.n_macro + params.n_small
    if n_bs == 0:
        raise ScenarioError("generation needs at least one base station")
    if not (params.width_m > 0 and params.height_m > 0):
        raise ScenarioError(f"area {params.width_m} x {params.height_m} m is empty")

    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, params.width_m, size=n_bs)
    ys = rng.uniform(0.0, params.height_m, size=n_bs)
    n_points = params.grid_nx * params.grid_ny
    arrival_rates = rng.uniform(*params.arrival_rate_range, size=n_points)
    green = np.concatenate(
        [
            rng.uniform(*params.macro_green_range_w, size=params.n_macro),
            rng.uniform(*params.small_green_range_w, size=params.n_small),
        ]
    )
    n_extra = max(0, n_bs - len(params.cache_hit_ratios))
    extra_ratios = rng.uniform(*params.extra_cache_hit_range, size=n_extra)
    hit_ratios = list(params.cache_hit_ratios[:n_bs]) + extra_ratios.tolist()
    green_rate = params.solar_efficiency * params.radio.solar_irradiance_w_m2

    stations = []
    for index in range(n_bs):
        macro = index < params.n_macro
        stations.append(
            BaseStation(
                id=index + 1,
                kind=BsKind.MACRO if macro else BsKind.SMALL,
                position=Location(x=float(xs[index]), y=float(ys[index])),
                tx_power_dbm=params.macro_tx_power_dbm if macro else params.small_tx_power_dbm,
                static_power_w=params.macro_static_power_w if macro else params.small_static_power_w,
                load_power_coeff=params.macro_load_power_coeff if macro else params.small_load_power_coeff,
                green_supply_w=float(green[index]),
                backhaul_rate_bps=params.macro_backhaul_bps if macro else params.small_backhaul_bps,
                cache_hit_ratio=float(hit_ratios[index]),
                antenna_gain_db=params.antenna_gain_db,
                panel_area_m2=float(green[index] / green_rate),
            )
        )

    try:
        scenario = Scenario(
            schema_version=SCHEMA_VERSION,
            rng_seed=seed,
            area=Area(x_max=params.width_m, y_max=params.height_m),
            radio=params.radio,
            algorithm=params.algorithm,
            base_stations=stations,
            traffic_grid=TrafficGrid(
                nx=params.grid_nx, ny=params.grid_ny, points=_grid_points(params, arrival_rates)
            ),
        )
    except ValidationError as e:
        raise ScenarioError(str(e)) from e

    uncovered = Network.from_scenario(scenario).uncovered_points()
    if uncovered.size:
        raise ScenarioError(
            f"{uncovered.size} traffic points are not covered by any BS (first: point {int(uncovered[0])})"
        )
    logger.info(f"Generated scenario seed={seed} with {n_bs} BSs and {n_points} traffic points")
    return scenario


def scenario_to_json(scenario: Scenario) -> str:
    return scenario.model_dump_json(indent=2)


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scenario_to_json(scenario), encoding="utf-8")
    logger.info(f"Scenario written to {path}")
    return path


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}") from e
    version = raw.get("schema_version", SCHEMA_VERSION) if isinstance(raw, dict) else None
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported scenario schema_version {version!r}")
    try:
        scenario = Scenario.model_validate(raw)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario file {path}: {e}") from e
    logger.info(f"Loaded scenario from {path}")
    return scenario


def with_kappa(scenario: Scenario, kappa: float) -> Scenario:
    """Copy of ``scenario`` with a different kappa."""
    try:
        algorithm = AlgorithmConfig(kappa=kappa, epsilon=scenario.epsilon)
    except ValidationError as e:
        raise ScenarioError(str(e)) from e
    return scenario.model_copy(update={"algorithm": algorithm})
