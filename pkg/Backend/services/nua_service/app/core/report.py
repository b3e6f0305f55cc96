import csv
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
from pydantic import BaseModel

from services.nua_service.app.core.energy import energy_state
from services.nua_service.app.core.errors import DomainError, ExportError, SaturationError
from services.nua_service.app.core.queueing import Association, LoadState, load_state
from services.nua_service.app.core.radio import Network
from services.nua_service.app.schemas.results import (
    BsPosition,
    CoverageMap,
    IterationTrace,
    MetricsBundle,
    PerBsMetrics,
    RunReport,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_number(value: float) -> str:
    """Twelve significant digits; ``inf``/``nan`` spelled out."""
    return f"{value:.12g}"


def _round(value: float):
    if not math.isfinite(value):
        return None
    return float(format_number(value))


def latency_index(loads: LoadState) -> float:
    """Unweighted sum of BS and backhaul latency ratios."""
    rho, rho_t = loads.bs_load, loads.backhaul_load
    return float((rho / (1.0 - rho) + rho_t / (1.0 - rho_t)).sum())


def compute_metrics(assoc: Association, network: Network) -> MetricsBundle:
    loads = load_state(assoc, network)
    limit = 1.0 - network.epsilon
    saturated = loads.saturated(network.epsilon)
    if saturated.any():
        j = int(np.argmax(saturated))
        bs_id = int(network.bs_ids[j])
        load = float(max(loads.bs_load[j], loads.backhaul_load[j]))
        raise SaturationError(f"BS {bs_id} load {load:.6g} exceeds {limit}", bs_id=bs_id, load=load)

    energy = energy_state(loads, network)
    mu = loads.bs_load / (1.0 - loads.bs_load)
    mu_t = loads.backhaul_load / (1.0 - loads.backhaul_load)
    counts = np.bincount(assoc.serving_indices(), minlength=network.n_bs)
    per_bs = [
        PerBsMetrics(
            bs_id=int(network.bs_ids[j]),
            kind=network.kinds[j].value,
            rho=float(loads.bs_load[j]),
            rho_tilde=float(loads.backhaul_load[j]),
            w=float(energy.latency_weight[j]),
            mu=float(mu[j]),
            mu_tilde=float(mu_t[j]),
            power_w=float(energy.power[j]),
            brown_w=float(energy.brown_power[j]),
            point_count=int(counts[j]),
            area_share=float(counts[j] / network.n_points),
        )
        for j in range(network.n_bs)
    ]
    return MetricsBundle(
        psi=float((energy.latency_weight * (mu + mu_t)).sum()),
        latency_index=float((mu + mu_t).sum()),
        brown_power_total=energy.total_brown_power,
        per_bs=per_bs,
    )


def coverage_map(assoc: Association, network: Network) -> CoverageMap:
    if network.grid_shape is None:
        raise DomainError("network has no traffic grid geometry")
    ny, nx = network.grid_shape
    ids = assoc.serving_ids(network).reshape(ny, nx)
    positions = []
    if network.bs_positions is not None:
        positions = [
            BsPosition(bs_id=int(bs_id), x=float(x), y=float(y))
            for bs_id, (x, y) in zip(network.bs_ids, network.bs_positions)
        ]
    return CoverageMap(nx=nx, ny=ny, cells=ids.tolist(), bs_positions=positions)


def _plain(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _plain(value.model_dump())
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return _round(value)
    return value


def _open_for_write(path: PathLike):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="", encoding="utf-8")
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e}") from e


def write_json(model: BaseModel, path: PathLike) -> Path:
    with _open_for_write(path) as f:
        json.dump(_plain(model), f, indent=2)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return Path(path)


def write_metrics_json(report: RunReport, path: PathLike) -> Path:
    return write_json(report, path)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (float, np.floating)):
        return format_number(float(value))
    return str(value)


def write_rows_csv(rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str], path: PathLike) -> Path:
    with _open_for_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})
    logger.info(f"Wrote {path}")
    return Path(path)


METRICS_FIELDS = (
    "bs_id", "kind", "rho", "rho_tilde", "w", "mu", "mu_tilde", "power_w", "brown_w", "point_count", "area_share",
)


def write_metrics_csv(metrics: MetricsBundle, path: PathLike) -> Path:
    """One row per BS followed by a ``total`` row."""
    rows: List[Dict[str, Any]] = [item.model_dump() for item in metrics.per_bs]
    rows.append(
        {
            "bs_id": "total",
            "mu": sum(item.mu for item in metrics.per_bs),
            "mu_tilde": sum(item.mu_tilde for item in metrics.per_bs),
            "power_w": sum(item.power_w for item in metrics.per_bs),
            "brown_w": metrics.brown_power_total,
            "point_count": sum(item.point_count for item in metrics.per_bs),
            "area_share": 1.0,
        }
    )
    return write_rows_csv(rows, METRICS_FIELDS, path)


def write_trace_csv(trace: IterationTrace, bs_ids: Sequence[int], path: PathLike) -> Path:
    fields = ["iter", "psi", "delta", "max_eta_change", "ad_change", "descent_product"]
    fields += [f"rho_{i}" for i in bs_ids] + [f"rho_tilde_{i}" for i in bs_ids]
    rows = []
    for record in trace.records:
        row: Dict[str, Any] = {
            "iter": record.iteration,
            "psi": record.psi,
            "delta": record.delta,
            "max_eta_change": record.max_eta_change,
            "ad_change": record.ad_change,
            "descent_product": record.descent_product,
        }
        row.update({f"rho_{i}": v for i, v in zip(bs_ids, record.rho)})
        row.update({f"rho_tilde_{i}": v for i, v in zip(bs_ids, record.rho_tilde)})
        rows.append(row)
    return write_rows_csv(rows, fields, path)


def write_coverage_csv(coverage: CoverageMap, path: PathLike) -> Path:
    """``ny`` lines of ``nx`` BS ids; the first line is the row with the smallest y."""
    with _open_for_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerows(coverage.cells)
    logger.info(f"Wrote {path}")
    return Path(path)


def export(results: Union[RunReport, MetricsBundle], fmt: str, path: PathLike) -> Path:
    """Write a run report as JSON or a metrics bundle as the per-BS CSV table."""
    if fmt == "json":
        return write_json(results, path)
    if fmt == "csv":
        metrics = results.metrics if isinstance(results, RunReport) else results
        if metrics is None:
            raise ExportError("report carries no metrics to tabulate")
        return write_metrics_csv(metrics, path)
    raise DomainError(f"unknown export format {fmt!r}")
