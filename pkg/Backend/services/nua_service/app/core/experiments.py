import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence

from services.nua_service.app.core import baselines, nua
from services.nua_service.app.core.errors import DomainError, NuaError
from services.nua_service.app.core.queueing import Association, load_state
from services.nua_service.app.core.radio import Network
from services.nua_service.app.core.report import compute_metrics
from services.nua_service.app.schemas.results import (
    CompareRow,
    DrbSweepResult,
    MetricsBundle,
    RunReport,
    RunStatus,
    SweepRow,
)
from services.nua_service.app.schemas.run import BiasConfig, RunOptions, Scheme, SweepSpec, SweepVariable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Outcome:
    """A finished run of one scheme with its metrics (``None`` when infeasible)."""

    scheme: Scheme
    status: RunStatus
    iterations: int
    association: Association
    psi: float
    metrics: Optional[MetricsBundle]
    run: Optional[nua.RunResult] = None
    drb: Optional[DrbSweepResult] = None

    def report(self) -> RunReport:
        return RunReport(
            scheme=self.scheme,
            status=self.status,
            iterations=self.iterations,
            witness_bs=self.run.trace.witness_bs if self.run is not None else None,
            psi=self.psi,
            relaxed_psi=self.run.relaxed_psi if self.run is not None else None,
            planned_psi=self.run.planned_psi if self.run is not None else None,
            best_bias=self.drb.best_bias if self.drb is not None else None,
            metrics=self.metrics,
        )


def _metrics_or_none(assoc: Association, network: Network, psi: float) -> Optional[MetricsBundle]:
    return compute_metrics(assoc, network) if math.isfinite(psi) else None


def _drb_outcome(network: Network, bias: float, drb: Optional[DrbSweepResult] = None) -> Outcome:
    if not bias > 0:
        raise DomainError(f"bias must be positive, got {bias}")
    assoc = baselines.drb_associate(network, BiasConfig(small=bias))
    psi = nua.psi_from_loads(load_state(assoc, network), network)
    status = RunStatus.CONVERGED if math.isfinite(psi) else RunStatus.INFEASIBLE
    return Outcome(Scheme.DRB, status, 0, assoc, psi, _metrics_or_none(assoc, network, psi), drb=drb)


def run_scheme(
    network: Network,
    scheme: Scheme,
    options: RunOptions = RunOptions(),
    bias_grid: Sequence[float] = baselines.DEFAULT_BIAS_GRID,
    workers: int = 1,
) -> Outcome:
    if scheme is Scheme.DRB:
        sweep = baselines.drb_sweep(network, bias_grid, workers)
        return _drb_outcome(network, sweep.best_bias, sweep)
    runner = nua.run if scheme is Scheme.NUA else baselines.nua_nc_run
    result = runner(network, options)
    return Outcome(
        scheme,
        result.status,
        result.iterations,
        result.association,
        result.psi,
        _metrics_or_none(result.association, network, result.psi),
        run=result,
    )


def _apply(network: Network, variable: SweepVariable, value: float, sweep_bs: Optional[int]) -> Network:
    if variable is SweepVariable.KAPPA:
        return network.with_kappa(value)
    if variable is SweepVariable.BACKHAUL_RATE:
        if sweep_bs is not None:
            return network.with_backhaul(sweep_bs, value)
        return network.with_small_backhaul(value)
    if variable is SweepVariable.SOLAR_EFFICIENCY:
        return network.with_solar_efficiency(value)
    return network


def _sweep_row(
    network: Network,
    spec: SweepSpec,
    value: float,
    scheme: Scheme,
    options: RunOptions,
    sweep_bs: Optional[int],
    bias_grid: Sequence[float],
) -> SweepRow:
    try:
        if spec.variable is SweepVariable.DRB_BIAS:
            outcome = _drb_outcome(network, value)
        else:
            outcome = run_scheme(_apply(network, spec.variable, value, sweep_bs), scheme, options, bias_grid)
    except NuaError as e:
        logger.warning(f"Sweep {spec.variable.value}={value:.6g} failed: {e}")
        return SweepRow(value=value, error=str(e))
    metrics = outcome.metrics
    if metrics is None:
        logger.warning(f"Sweep {spec.variable.value}={value:.6g} is infeasible")
    return SweepRow(
        value=value,
        psi=outcome.psi,
        latency_index=metrics.latency_index if metrics else None,
        brown_power_w=metrics.brown_power_total if metrics else None,
        iterations=outcome.iterations,
        status=outcome.status,
    )


def sweep(
    network: Network,
    spec: SweepSpec,
    scheme: Scheme = Scheme.NUA,
    options: RunOptions = RunOptions(),
    workers: int = 1,
    sweep_bs: Optional[int] = None,
    bias_grid: Sequence[float] = baselines.DEFAULT_BIAS_GRID,
) -> List[SweepRow]:
    """One full run per grid value on the same network; rows come back in ascending grid order."""
    grid = spec.grid()
    logger.info(f"Sweeping {spec.variable.value} over {len(grid)} values with {workers} worker(s)")
    task = partial(_sweep_row, network, spec, scheme=scheme, options=options, sweep_bs=sweep_bs, bias_grid=bias_grid)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(task, grid))


def compare(
    network: Network,
    options: RunOptions = RunOptions(),
    bias_grid: Sequence[float] = baselines.DEFAULT_BIAS_GRID,
    workers: int = 1,
) -> List[Outcome]:
    """Run NUA, NUA-NC and DRB-NU on the same network."""
    schemes = [Scheme.NUA, Scheme.NUA_NC, Scheme.DRB]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda s: run_scheme(network, s, options, bias_grid), schemes))


def compare_rows(outcomes: Sequence[Outcome]) -> List[CompareRow]:
    return [
        CompareRow(
            scheme=o.scheme,
            psi=o.psi,
            latency_index=o.metrics.latency_index if o.metrics else None,
            brown_power_w=o.metrics.brown_power_total if o.metrics else None,
            iterations=o.iterations,
            status=o.status,
        )
        for o in outcomes
    ]
