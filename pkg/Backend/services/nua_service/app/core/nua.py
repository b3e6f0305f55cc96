"""Network-utility-aware user association.

BSs advertise two scalars computed from their current loads; every traffic
point then picks the BS with the best rate-to-cost ratio, and the BSs blend
that choice into their intermediate association with an exponential average
whose weight comes from a line search.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from services.nua_service.app.core.energy import EnergyState, energy_state, green_capacities, latency_weight
from services.nua_service.app.core.errors import DomainError, SaturationError, StagnationError, UncoveredLocationError
from services.nua_service.app.core.queueing import Association, LoadState, load_state, service_weights
from services.nua_service.app.core.radio import Network
from services.nua_service.app.schemas.results import IterationRecord, IterationTrace, RunStatus
from services.nua_service.app.schemas.run import RunOptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Advertisement:
    theta_a: np.ndarray
    theta_b: np.ndarray

    def max_change(self, other: "Advertisement") -> float:
        return float(
            max(np.max(np.abs(self.theta_a - other.theta_a)), np.max(np.abs(self.theta_b - other.theta_b)))
        )


@dataclass(frozen=True)
class RunResult:
    association: Association
    loads: LoadState
    energy: EnergyState
    trace: IterationTrace
    psi: float
    relaxed_psi: float
    final_ad_change: float
    relaxed: Association
    planned_psi: Optional[float] = None

    @property
    def status(self) -> RunStatus:
        return self.trace.status

    @property
    def iterations(self) -> int:
        return self.trace.iterations


def _bs_costs(rho: np.ndarray, rho_t: np.ndarray, network: Network, capacity: np.ndarray) -> np.ndarray:
    w = latency_weight(rho, capacity, network.kappa)
    return w * (rho / (1.0 - rho) + rho_t / (1.0 - rho_t))


def psi_from_loads(loads: LoadState, network: Network) -> float:
    """Weighted latency objective; +inf once any load exceeds 1 - epsilon."""
    if loads.overflow(network.epsilon) > 0:
        return math.inf
    costs = _bs_costs(loads.bs_load, loads.backhaul_load, network, green_capacities(network))
    return float(costs.sum())


def objective(assoc: Association, network: Network) -> float:
    return psi_from_loads(load_state(assoc, network), network)


def merit(loads: LoadState, network: Network) -> Tuple[float, float]:
    """Saturation overflow first, objective second; compared lexicographically."""
    return loads.overflow(network.epsilon), psi_from_loads(loads, network)


def advertise(loads: LoadState, network: Network) -> Advertisement:
    clamped = loads.clamped(network.epsilon)
    rho, rho_t = clamped.bs_load, clamped.backhaul_load
    w = latency_weight(rho, green_capacities(network), network.kappa)
    kappa = network.kappa
    theta_a = w * (kappa * rho / (1.0 - rho) + kappa * rho_t / (1.0 - rho_t) + 1.0 / (1.0 - rho) ** 2)
    theta_b = w * (1.0 - network.cache_hit_ratio) / (network.backhaul_rate * (1.0 - rho_t) ** 2)
    return Advertisement(theta_a=theta_a, theta_b=theta_b)


def _unit_costs(ads: Advertisement, network: Network) -> np.ndarray:
    """theta_a / r + theta_b per point and BS; +inf where the BS does not reach."""
    per_bit = np.divide(
        ads.theta_a[None, :],
        network.rates,
        out=np.full(network.rates.shape, np.inf),
        where=network.reachable,
    )
    return per_bit + ads.theta_b[None, :]


def gradient_matrix(assoc: Association, network: Network) -> np.ndarray:
    loads = load_state(assoc, network)
    if loads.overflow(network.epsilon) > 0:
        raise SaturationError("gradient is undefined on a saturated association")
    unit = _unit_costs(advertise(loads, network), network)
    return np.multiply(
        network.demand[:, None], unit, out=np.full(unit.shape, np.inf), where=network.reachable
    )


def gradient(assoc: Association, network: Network, point: int, bs_id: int) -> float:
    """Partial derivative of the objective with respect to eta[point, bs_id]."""
    return float(gradient_matrix(assoc, network)[point, network.index_of(bs_id)])


def descent_product(assoc: Association, eta_new: Association, delta: float, network: Network) -> float:
    """Inner product of the gradient at ``assoc`` with the averaged step toward ``eta_new``.

    ``eta_new`` minimises the linearisation at ``assoc``, so the product is
    written as a sum of non-positive terms.
    """
    grad = gradient_matrix(assoc, network)
    best = np.min(grad, axis=1, keepdims=True)
    excess = np.where(assoc.eta > 0, grad - best, 0.0)
    chosen_excess = np.where(eta_new.eta > 0, grad - best, 0.0)
    gap = (assoc.eta * excess).sum() - (eta_new.eta * chosen_excess).sum()
    return -(1.0 - delta) * float(gap)


def select_bs(rates: np.ndarray, ads: Advertisement, bs_ids: Optional[Sequence[int]] = None, point: int = 0) -> int:
    """BS maximising r / (theta_a + r * theta_b); ties go to the lowest id."""
    rates = np.asarray(rates, dtype=float)
    ids = np.arange(1, rates.size + 1) if bs_ids is None else np.asarray(bs_ids)
    reachable = rates > 0
    if not reachable.any():
        raise UncoveredLocationError(point)
    scores = np.full(rates.shape, -np.inf)
    scores[reachable] = rates[reachable] / (ads.theta_a[reachable] + rates[reachable] * ads.theta_b[reachable])
    return int(ids[int(np.argmax(scores))])


def association_step(network: Network, ads: Advertisement) -> Association:
    uncovered = network.uncovered_points()
    if uncovered.size:
        raise UncoveredLocationError(int(uncovered[0]))
    scores = np.divide(
        network.rates,
        ads.theta_a[None, :] + network.rates * ads.theta_b[None, :],
        out=np.full(network.rates.shape, -np.inf),
        where=network.reachable,
    )
    return Association.one_hot(np.argmax(scores, axis=1), network.n_bs)


def intermediate_update(eta_new: Association, eta_bar_prev: Association, delta: float) -> Association:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"averaging weight must lie in (0, 1), got {delta}")
    return Association((1.0 - delta) * eta_new.eta + delta * eta_bar_prev.eta)


def choose_delta(
    eta_new: Association,
    eta_bar_prev: Association,
    network: Network,
    delta0: float = 0.5,
    max_backtracks: int = 40,
) -> float:
    """First delta in delta0, 1-(1-delta0)/2, 1-(1-delta0)/4, ... that lowers the merit."""
    if eta_new.equals(eta_bar_prev):
        raise DomainError("step direction is zero")
    current = merit(load_state(eta_bar_prev, network), network)
    for i in range(max_backtracks):
        delta = 1.0 - (1.0 - delta0) / 2.0**i
        candidate = merit(load_state(intermediate_update(eta_new, eta_bar_prev, delta), network), network)
        if candidate < current:
            return delta
    raise StagnationError(f"no decrease found after {max_backtracks} backtracks")


def _feasible_floor(target: LoadState, start: LoadState, epsilon: float) -> float:
    """Smallest averaging weight keeping every load of the blend within 1 - epsilon."""
    limit = 1.0 - epsilon
    floor = 0.0
    for new, old in ((target.bs_load, start.bs_load), (target.backhaul_load, start.backhaul_load)):
        over = new > limit
        if np.any(over):
            floor = max(floor, float(np.max((new[over] - limit) / (new[over] - old[over]))))
    return floor


def line_search_delta(
    eta_new: Association,
    eta_bar_prev: Association,
    network: Network,
    delta0: float = 0.5,
    max_backtracks: int = 40,
) -> float:
    """Averaging weight with the lowest merit along the segment toward ``eta_new``.

    Every weight of the backtracking schedule is scored. When the current
    association is feasible, the bounded minimiser of the objective over the
    feasible part of the segment is scored as well. Only weights that strictly
    lower the merit qualify; ties keep the earliest schedule entry.
    """
    if eta_new.equals(eta_bar_prev):
        raise DomainError("step direction is zero")
    start = load_state(eta_bar_prev, network)
    current = merit(start, network)

    def merit_at(delta: float) -> Tuple[float, float]:
        return merit(load_state(intermediate_update(eta_new, eta_bar_prev, delta), network), network)

    candidates = [1.0 - (1.0 - delta0) / 2.0**i for i in range(max_backtracks)]
    floor = _feasible_floor(load_state(eta_new, network), start, network.epsilon) if current[0] == 0 else 1.0
    if floor < 1.0:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            found = minimize_scalar(
                lambda delta: merit_at(delta)[1],
                bounds=(floor, 1.0),
                method="bounded",
                options={"xatol": 1e-10},
            )
        if 0.0 < found.x < 1.0:
            candidates.append(float(found.x))

    best_delta, best = None, current
    for delta in candidates:
        value = merit_at(delta)
        if value < best:
            best_delta, best = delta, value
    if best_delta is None:
        raise StagnationError(f"no decrease found among {len(candidates)} averaging weights")
    return best_delta


def max_sinr_association(network: Network) -> Association:
    uncovered = network.uncovered_points()
    if uncovered.size:
        raise UncoveredLocationError(int(uncovered[0]))
    signal = network.sinr if network.sinr is not None else network.rates
    scores = np.where(network.reachable, signal, -np.inf)
    return Association.one_hot(np.argmax(scores, axis=1), network.n_bs)


def refine_rounding(
    relaxed: Association, rounded: Association, network: Network, max_combinations: int = 8192
) -> Association:
    """Best binary association among the choices the rounding leaves open.

    When every reachable choice of every point fits in ``max_combinations``
    they are all enumerated. Otherwise only points with a split relaxed row
    are reopened, over the stations carrying part of their traffic, and the
    other points keep their rounded station. Ties keep the first combination
    in enumeration order.
    """
    serving = rounded.serving_indices().copy()
    options = [np.flatnonzero(network.reachable[x]) for x in range(network.n_points)]
    if math.prod(len(o) for o in options) > max_combinations:
        split = relaxed.eta.max(axis=1) < 1.0
        options = [
            np.union1d(np.flatnonzero(network.reachable[x] & (relaxed.eta[x] > 0)), [serving[x]])
            if split[x] else np.array([serving[x]])
            for x in range(network.n_points)
        ]
        if math.prod(len(o) for o in options) > max_combinations:
            return rounded
    open_rows = [x for x in range(network.n_points) if len(options[x]) > 1]
    if not open_rows or any(len(o) == 0 for o in options):
        return rounded

    weights = service_weights(network)
    backhaul_share = network.demand[:, None] * ((1.0 - network.cache_hit_ratio) / network.backhaul_rate)[None, :]
    fixed = np.ones(network.n_points, dtype=bool)
    fixed[open_rows] = False
    fixed_rows = np.flatnonzero(fixed)
    base_rho = np.zeros(network.n_bs)
    base_rho_t = np.zeros(network.n_bs)
    np.add.at(base_rho, serving[fixed_rows], weights[fixed_rows, serving[fixed_rows]])
    np.add.at(base_rho_t, serving[fixed_rows], backhaul_share[fixed_rows, serving[fixed_rows]])

    choices = np.array(list(itertools.product(*(options[x] for x in open_rows))))
    combos = np.arange(len(choices))
    rho = np.tile(base_rho, (len(choices), 1))
    rho_t = np.tile(base_rho_t, (len(choices), 1))
    for column, x in enumerate(open_rows):
        picks = choices[:, column]
        rho[combos, picks] += weights[x, picks]
        rho_t[combos, picks] += backhaul_share[x, picks]

    limit = 1.0 - network.epsilon
    overflow = (np.maximum(rho - limit, 0.0) + np.maximum(rho_t - limit, 0.0)).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        psi = _bs_costs(rho, rho_t, network, green_capacities(network)).sum(axis=1)
    psi = np.where(overflow > 0, np.inf, psi)
    best = int(np.lexsort((psi, overflow))[0])
    serving[open_rows] = choices[best]
    logger.debug(f"Rounding refined over {len(choices)} combinations of {len(open_rows)} points")
    return Association.one_hot(serving, network.n_bs)


def polish(assoc: Association, network: Network, max_passes: int = 100) -> Association:
    """Single-point moves on a binary association while they lower the merit.

    Points are visited in grid order and each takes its best strictly improving
    move, so the result is deterministic.
    """
    serving = assoc.serving_indices().copy()
    weights = service_weights(network)
    miss = (1.0 - network.cache_hit_ratio) / network.backhaul_rate
    capacity = green_capacities(network)
    limit = 1.0 - network.epsilon
    loads = load_state(Association.one_hot(serving, network.n_bs), network)
    rho, rho_t = loads.bs_load.copy(), loads.backhaul_load.copy()

    def cost(r, rt, cap=capacity):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            c = _bs_costs(r, rt, network, cap)
        return np.where((r > limit) | (rt > limit), np.inf, c)

    def overflow(r, rt):
        return np.maximum(r - limit, 0.0) + np.maximum(rt - limit, 0.0)

    moves = 0
    for _ in range(max_passes):
        improved = False
        for x in range(network.n_points):
            a = serving[x]
            candidates = network.reachable[x].copy()
            candidates[a] = False
            if not candidates.any():
                continue
            d = network.demand[x]
            add_rho = rho + weights[x]
            add_rt = rho_t + d * miss
            rem_rho = rho[a] - weights[x, a]
            rem_rt = rho_t[a] - d * miss[a]
            total_overflow = overflow(rho, rho_t).sum()
            d_overflow = (
                overflow(add_rho, add_rt) - overflow(rho, rho_t)
                + (overflow(rem_rho, rem_rt) - overflow(rho[a], rho_t[a]))
            )
            if total_overflow > 0:
                gain = np.where(candidates, d_overflow, np.inf)
                j = int(np.argmin(gain))
                if not gain[j] < -1e-15:
                    continue
            else:
                current = cost(rho, rho_t)
                d_psi = cost(add_rho, add_rt) - current + (cost(rem_rho, rem_rt, capacity[a]) - current[a])
                feasible = candidates & (d_overflow <= 0)
                with np.errstate(invalid="ignore"):
                    gain = np.where(feasible, d_psi, np.inf)
                j = int(np.argmin(gain))
                if not gain[j] < -1e-13 * max(1.0, float(current.sum())):
                    continue
            rho[a], rho_t[a] = rem_rho, rem_rt
            rho[j], rho_t[j] = add_rho[j], add_rt[j]
            serving[x] = j
            improved = True
            moves += 1
        if not improved:
            break
    if moves:
        logger.debug(f"Polish moved {moves} traffic points")
    return Association.one_hot(serving, network.n_bs)


def _record(iteration, psi, loads, delta=None, max_change=0.0, ad_change=None, descent=None) -> IterationRecord:
    return IterationRecord(
        iteration=iteration,
        psi=psi,
        delta=delta,
        max_eta_change=max_change,
        rho=loads.bs_load.tolist(),
        rho_tilde=loads.backhaul_load.tolist(),
        ad_change=ad_change,
        descent_product=descent,
    )


def run(network: Network, options: RunOptions = RunOptions(), initial: Optional[Association] = None) -> RunResult:
    """Iterate advertisements and selections to a fixed point, then round to a binary association."""
    eta_bar = initial if initial is not None else max_sinr_association(network)
    loads = load_state(eta_bar, network)
    current = merit(loads, network)
    records = [_record(0, current[1], loads)]
    status = RunStatus.MAX_ITERATIONS
    iterations = options.max_iters
    previous_ads: Optional[Advertisement] = None
    logger.info(
        f"NUA run started: {network.n_bs} BSs, {network.n_points} points, kappa={network.kappa}, psi0={current[1]:.6g}"
    )

    for k in range(1, options.max_iters + 1):
        ads = advertise(loads, network)
        ad_change = ads.max_change(previous_ads) if previous_ads is not None else None
        previous_ads = ads
        eta_new = association_step(network, ads)
        if eta_new.equals(eta_bar):
            status, iterations = RunStatus.CONVERGED, k
            break
        try:
            step_rule = line_search_delta if options.line_search else choose_delta
            delta = step_rule(eta_new, eta_bar, network, options.delta0, options.max_backtracks)
        except StagnationError:
            logger.warning(f"Step search stagnated at iteration {k}; treating as converged")
            status, iterations = RunStatus.CONVERGED, k
            break
        descent = None
        if options.check_descent and math.isfinite(current[1]):
            descent = descent_product(eta_bar, eta_new, delta, network)
            if not descent < 0:
                logger.warning(f"Iteration {k}: step is not a descent direction ({descent:.3e})")
        updated = intermediate_update(eta_new, eta_bar, delta)
        new_loads = load_state(updated, network)
        new_merit = merit(new_loads, network)
        change = float(np.max(np.abs(updated.eta - eta_bar.eta)))
        records.append(_record(k, new_merit[1], new_loads, delta, change, ad_change, descent))
        logger.debug(f"Iteration {k}: psi={new_merit[1]:.10g} delta={delta:.6g} max_eta_change={change:.3e}")

        previous_psi = current[1]
        eta_bar, loads, current = updated, new_loads, new_merit
        if math.isfinite(previous_psi) and math.isfinite(current[1]):
            if previous_psi == 0 or abs(current[1] - previous_psi) / previous_psi < options.tol:
                status, iterations = RunStatus.CONVERGED, k
                break

    final_ads = advertise(loads, network)
    final_ad_change = final_ads.max_change(previous_ads) if previous_ads is not None else 0.0
    binary = association_step(network, final_ads)
    if options.polish:
        binary = polish(refine_rounding(eta_bar, binary, network, options.max_round_combinations), network)
    final_loads = load_state(binary, network)
    psi = psi_from_loads(final_loads, network)

    witness = None
    if not math.isfinite(psi):
        status = RunStatus.INFEASIBLE
        witness = int(network.bs_ids[int(np.argmax(final_loads.overflow_per_bs(network.epsilon)))])
        logger.warning(f"NUA run infeasible: BS {witness} stays saturated")
    trace = IterationTrace(records=records, status=status, iterations=iterations, witness_bs=witness)
    logger.info(f"NUA run finished: status={status.value} iterations={iterations} psi={psi:.10g}")
    return RunResult(
        association=binary,
        loads=final_loads,
        energy=energy_state(final_loads, network),
        trace=trace,
        psi=psi,
        relaxed_psi=current[1],
        final_ad_change=final_ad_change,
        relaxed=eta_bar,
    )
