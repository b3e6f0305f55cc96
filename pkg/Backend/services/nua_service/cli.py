"""
Command-line entry point: scenario generation, single runs, sweeps and scheme comparisons.

Run from ``Backend/`` as ``python -m services.nua_service.cli <command> ...``.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from services.nua_service.app.core import baselines, experiments
from services.nua_service.app.core.config import configure_logging
from services.nua_service.app.core.errors import NuaError
from services.nua_service.app.core.radio import Network
from services.nua_service.app.core.report import (
    coverage_map,
    write_coverage_csv,
    write_metrics_csv,
    write_metrics_json,
    write_rows_csv,
    write_trace_csv,
)
from services.nua_service.app.core.scenario import generate_scenario, load_scenario, save_scenario
from services.nua_service.app.schemas.results import RunStatus
from services.nua_service.app.schemas.run import RunConfig, SweepSpec
from services.nua_service.app.schemas.scenario import GenerationParams

__all__ = ['main', 'cmd_generate', 'cmd_run', 'cmd_sweep', 'cmd_compare']

logger = logging.getLogger(__name__)

EXIT_CODES = {RunStatus.CONVERGED: 0, RunStatus.INFEASIBLE: 2, RunStatus.MAX_ITERATIONS: 3}
EXIT_ERROR = 1

SWEEP_FIELDS = ("value", "psi", "latency_index", "brown_power_w", "iterations", "status", "error")
COMPARE_FIELDS = ("scheme", "psi", "latency_index", "brown_power_w", "iterations", "status", "error")
DRB_FIELDS = ("bias", "psi", "latency_index", "brown_power_w")


def _bias_grid(text: str) -> List[float]:
    spec = SweepSpec.parse(f"drb_bias:{text}")
    return spec.grid()


def _load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise NuaError(f"cannot read config file {path}: {e}") from e


def _generation_params(args: argparse.Namespace, overrides: Dict[str, Any]) -> GenerationParams:
    values: Dict[str, Any] = {}
    if args.grid is not None:
        values.update(grid_nx=args.grid, grid_ny=args.grid)
    if args.macro is not None:
        values["n_macro"] = args.macro
    if args.small is not None:
        values["n_small"] = args.small
    values.update(overrides)
    return GenerationParams.model_validate(values)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge command-line flags with the optional JSON config file (file wins)."""
    file_values = _load_config_file(args.config)
    options = {
        "max_iters": args.max_iters,
        "tol": args.tol,
        "line_search": not args.no_line_search,
        "polish": not args.no_polish,
        "check_descent": args.debug_descent,
    }
    values: Dict[str, Any] = {
        "seed": args.seed,
        "scheme": args.scheme,
        "kappa": args.kappa,
        "out_dir": args.out,
        "workers": args.workers,
        "sweep_bs": args.sweep_bs,
        "bias_grid": args.bias_grid,
        "options": {key: value for key, value in options.items() if value is not None},
    }
    if getattr(args, "sweep", None) is not None:
        values["sweep"] = args.sweep
    if args.scenario is not None:
        values["scenario_path"] = args.scenario
    file_options = file_values.pop("options", {})
    values["options"].update(file_options)
    values.update(file_values)
    if values.get("scenario_path") is None and values.get("generation") is None:
        values["generation"] = _generation_params(args, {})
    return RunConfig.model_validate(values)


def _network(config: RunConfig) -> Network:
    if config.scenario_path is not None:
        scenario = load_scenario(config.scenario_path)
    else:
        scenario = generate_scenario(config.seed, config.generation)
    network = Network.from_scenario(scenario)
    if config.kappa is not None:
        network = network.with_kappa(config.kappa)
    return network


def _bias(config: RunConfig):
    return config.bias_grid if config.bias_grid is not None else baselines.DEFAULT_BIAS_GRID


def cmd_generate(params: GenerationParams, seed: int, out_path: str) -> Path:
    scenario = generate_scenario(seed, params)
    path = save_scenario(scenario, out_path)
    print(f'Scenario with {len(scenario.base_stations)} BSs and {len(scenario.traffic)} traffic points saved to {path}')
    return path


def cmd_run(config: RunConfig) -> int:
    network = _network(config)
    outcome = experiments.run_scheme(network, config.scheme, config.options, _bias(config), config.workers)
    out = Path(config.out_dir)
    write_metrics_json(outcome.report(), out / "metrics.json")
    if outcome.metrics is not None:
        write_metrics_csv(outcome.metrics, out / "metrics.csv")
    if outcome.run is not None:
        write_trace_csv(outcome.run.trace, network.bs_ids.tolist(), out / "trace.csv")
    if outcome.drb is not None:
        write_rows_csv([p.model_dump() for p in outcome.drb.curve], DRB_FIELDS, out / "drb_sweep.csv")
    if network.grid_shape is not None:
        write_coverage_csv(coverage_map(outcome.association, network), out / "coverage.csv")

    summary = f'{config.scheme.value}: {outcome.status.value} after {outcome.iterations} iterations, psi={outcome.psi:.6g}'
    if outcome.drb is not None:
        summary += f', best bias={outcome.drb.best_bias:.4g}'
    if outcome.status is RunStatus.INFEASIBLE and outcome.run is not None:
        summary += f' (BS {outcome.run.trace.witness_bs} saturated)'
    print(summary)
    print(f'Results saved to {out}')
    return EXIT_CODES[outcome.status]


def cmd_sweep(config: RunConfig) -> int:
    if config.sweep is None:
        raise NuaError("sweep needs --sweep <var>:<start>:<stop>:<n>")
    network = _network(config)
    rows = experiments.sweep(
        network, config.sweep, config.scheme, config.options, config.workers, config.sweep_bs, _bias(config)
    )
    path = write_rows_csv([row.model_dump() for row in rows], SWEEP_FIELDS, Path(config.out_dir) / "sweep.csv")
    failed = sum(1 for row in rows if row.error or row.status is not RunStatus.CONVERGED)
    print(f'Sweep of {config.sweep.variable.value}: {len(rows)} values, {failed} not converged; saved to {path}')
    return 0


def cmd_compare(config: RunConfig) -> int:
    network = _network(config)
    outcomes = experiments.compare(network, config.options, _bias(config), config.workers)
    out = Path(config.out_dir)
    rows = experiments.compare_rows(outcomes)
    write_rows_csv([row.model_dump() for row in rows], COMPARE_FIELDS, out / "compare.csv")
    if network.grid_shape is not None:
        for outcome in outcomes:
            write_coverage_csv(coverage_map(outcome.association, network), out / f"coverage_{outcome.scheme.value}.csv")
    for row in rows:
        print(f'{row.scheme.value:>7}: psi={row.psi:.6g} status={row.status.value}')
    print(f'Results saved to {out}')
    return 0


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=int, default=0, help='Seed for scenario generation (default: 0)')
    parser.add_argument('--grid', type=int, default=None, help='Traffic grid resolution per side (default: 50)')
    parser.add_argument('--macro', type=int, default=None, help='Number of macro BSs (default: 3)')
    parser.add_argument('--small', type=int, default=None, help='Number of small-cell BSs (default: 7)')
    parser.add_argument('--config', default=None, help='JSON file whose keys override the flags')


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    _add_scenario_flags(parser)
    parser.add_argument('--scenario', default=None, help='Scenario JSON file (otherwise one is generated from --seed)')
    parser.add_argument('--scheme', choices=['nua', 'nua_nc', 'drb'], default='nua', help='Association scheme')
    parser.add_argument('--kappa', type=float, default=None, help='Override the energy-latency coefficient')
    parser.add_argument('--out', default='results', help='Output directory (default: results)')
    parser.add_argument('--max-iters', type=int, default=None, help='Iteration cap (default: 100)')
    parser.add_argument('--tol', type=float, default=None, help='Relative objective change for convergence (default: 1e-6)')
    parser.add_argument('--bias-grid', type=_bias_grid, default=None,
                        help='DRB bias grid as start:stop:n or v1,v2,... (default: 60 log-spaced values in [0.5, 16])')
    parser.add_argument('--workers', type=int, default=1, help='Worker threads for sweeps and comparisons')
    parser.add_argument('--sweep-bs', type=int, default=None, help='Restrict a backhaul_rate sweep to one BS id')
    parser.add_argument('--no-polish', action='store_true', help='Keep the bare rounding: no enumeration or single-point moves afterwards')
    parser.add_argument('--no-line-search', action='store_true',
                        help='Take the first backtracking weight that lowers the objective instead of the best one')
    parser.add_argument('--debug-descent', action='store_true', help='Record the descent inner product every iteration')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Network-utility-aware load balancing simulator')
    commands = parser.add_subparsers(dest='command', required=True)

    generate = commands.add_parser('generate', help='Write a random scenario file')
    _add_scenario_flags(generate)
    generate.add_argument('--out', required=True, help='Scenario file to write')

    run = commands.add_parser('run', help='Run one scheme and write metrics, trace and coverage map')
    _add_run_flags(run)

    sweep = commands.add_parser('sweep', help='Run one scheme over a parameter grid')
    _add_run_flags(sweep)
    sweep.add_argument('--sweep', type=SweepSpec.parse, required=True,
                       help='var:start:stop:n or var:v1,v2,... with var in kappa, backhaul_rate, solar_efficiency, drb_bias')

    compare = commands.add_parser('compare', help='Run nua, nua_nc and drb on the same scenario')
    _add_run_flags(compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors share the library error code; 2 is reserved for infeasible runs
        return EXIT_ERROR if e.code else 0
    try:
        if args.command == 'generate':
            params = _generation_params(args, _load_config_file(args.config))
            cmd_generate(params, args.seed, args.out)
            return 0
        config = build_run_config(args)
        handler = {'run': cmd_run, 'sweep': cmd_sweep, 'compare': cmd_compare}[args.command]
        return handler(config)
    except (NuaError, ValidationError) as e:
        logger.error(str(e))
        print(f'error: {e}', file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
