import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from services.nua_service.app.core import nua
from services.nua_service.app.core.energy import energy_state
from services.nua_service.app.core.errors import DomainError, SweepError, UncoveredLocationError
from services.nua_service.app.core.queueing import Association, load_state
from services.nua_service.app.core.radio import Network
from services.nua_service.app.core.report import latency_index
from services.nua_service.app.schemas.results import DrbSweepPoint, DrbSweepResult, RunStatus
from services.nua_service.app.schemas.run import BiasConfig, RunOptions

logger = logging.getLogger(__name__)

DEFAULT_BIAS_GRID = tuple(np.geomspace(0.5, 16.0, 60).tolist())


def drb_associate(network: Network, bias: BiasConfig) -> Association:
    """Every point picks the BS with the largest tier-biased rate; ties go to the lowest id."""
    uncovered = network.uncovered_points()
    if uncovered.size:
        raise UncoveredLocationError(int(uncovered[0]))
    tier_bias = np.where(network.is_small, bias.small, bias.macro)
    scores = np.where(network.reachable, network.rates * tier_bias[None, :], -np.inf)
    return Association.one_hot(np.argmax(scores, axis=1), network.n_bs)


def max_rate_association(network: Network) -> Association:
    return drb_associate(network, BiasConfig(small=1.0))


def evaluate_bias(network: Network, bias: float) -> DrbSweepPoint:
    loads = load_state(drb_associate(network, BiasConfig(small=bias)), network)
    psi = nua.psi_from_loads(loads, network)
    if not math.isfinite(psi):
        return DrbSweepPoint(bias=bias, psi=psi)
    return DrbSweepPoint(
        bias=bias,
        psi=psi,
        latency_index=latency_index(loads),
        brown_power_w=energy_state(loads, network).total_brown_power,
    )


def drb_sweep(network: Network, bias_grid: Sequence[float] = DEFAULT_BIAS_GRID, workers: int = 1) -> DrbSweepResult:
    """Score every bias of the grid by the objective and keep the best (first on ties)."""
    grid = [float(b) for b in bias_grid]
    if not grid:
        raise DomainError("bias grid is empty")
    if min(grid) <= 0:
        raise DomainError("biases must be positive")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        curve = list(executor.map(lambda b: evaluate_bias(network, b), grid))
    finite = [point for point in curve if math.isfinite(point.psi)]
    if not finite:
        raise SweepError(f"all {len(grid)} biases saturate some BS")
    best = min(finite, key=lambda point: point.psi)
    logger.info(f"DRB sweep: best bias {best.bias:.4g} with psi={best.psi:.10g}")
    return DrbSweepResult(best_bias=best.bias, best_psi=best.psi, curve=curve)


def nua_nc_run(network: Network, options: RunOptions = RunOptions(), initial: Optional[Association] = None) -> nua.RunResult:
    """Plan with every cache hit ratio set to zero, then score the plan against the real caches."""
    planned = nua.run(network.with_cache_ratios(0.0), options, initial)
    loads = load_state(planned.association, network)
    psi = nua.psi_from_loads(loads, network)
    trace = planned.trace
    if not math.isfinite(psi):
        witness = int(network.bs_ids[int(np.argmax(loads.overflow_per_bs(network.epsilon)))])
        trace = trace.model_copy(update={"status": RunStatus.INFEASIBLE, "witness_bs": witness})
    logger.info(f"NUA-NC: planned psi={planned.psi:.10g}, true psi={psi:.10g}")
    return replace(
        planned,
        loads=loads,
        energy=energy_state(loads, network),
        trace=trace,
        psi=psi,
        relaxed_psi=nua.objective(planned.relaxed, network),
        planned_psi=planned.psi,
    )
