import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from services.nua_service.app.core.errors import DomainError, ScenarioError
from services.nua_service.app.schemas.scenario import BsKind, Location, RadioConfig, Scenario

logger = logging.getLogger(__name__)

# Traffic points closer than this to a BS are evaluated at this distance.
MIN_DISTANCE_M = 1.0


def path_loss(kind: BsKind, distance: float) -> float:
    """Path loss in dB; macro distances are read in km, small-cell distances in m."""
    if not distance > 0:
        raise DomainError(f"path loss needs a positive distance, got {distance}")
    if BsKind(kind) is BsKind.MACRO:
        return 128.1 + 37.6 * math.log10(distance / 1000.0)
    return 38.0 + 10.0 * math.log10(distance)


def _path_loss_matrix(distances: np.ndarray, is_macro: np.ndarray) -> np.ndarray:
    macro = 128.1 + 37.6 * np.log10(distances / 1000.0)
    small = 38.0 + 10.0 * np.log10(distances)
    return np.where(is_macro[None, :], macro, small)


def dbm_to_mw(value_dbm):
    return np.power(10.0, np.asarray(value_dbm, dtype=float) / 10.0)


def received_power_dbm(
    points: np.ndarray,
    bs_positions: np.ndarray,
    is_macro: np.ndarray,
    tx_power_dbm: np.ndarray,
    antenna_gain_db: np.ndarray,
    radio: RadioConfig,
) -> np.ndarray:
    """Received power of every BS at every point, shape (points, stations)."""
    distances = np.maximum(cdist(points, bs_positions), MIN_DISTANCE_M)
    loss = _path_loss_matrix(distances, is_macro)
    margin = radio.shadowing_db + radio.fading_db
    return tx_power_dbm[None, :] + antenna_gain_db[None, :] - loss - margin


def sinr_matrix(rx_dbm: np.ndarray, noise_power_dbm: float) -> np.ndarray:
    signal = dbm_to_mw(rx_dbm)
    n_bs = signal.shape[1]
    # every other station interferes
    interference = signal @ (np.ones((n_bs, n_bs)) - np.eye(n_bs))
    return signal / (dbm_to_mw(noise_power_dbm) + interference)


def shannon_rate(sinr, bandwidth_hz: float):
    return bandwidth_hz * np.log2(1.0 + np.asarray(sinr, dtype=float))


def rate_matrix(rx_dbm: np.ndarray, radio: RadioConfig) -> np.ndarray:
    rates = shannon_rate(sinr_matrix(rx_dbm, radio.noise_power_dbm), radio.bandwidth_hz)
    return np.where(rx_dbm < radio.receiver_sensitivity_dbm, 0.0, rates)


def _station_arrays(scenario: Scenario):
    stations = sorted(scenario.base_stations, key=lambda bs: bs.id)
    positions = np.array([[bs.position.x, bs.position.y] for bs in stations], dtype=float)
    is_macro = np.array([bs.kind is BsKind.MACRO for bs in stations])
    tx = np.array([bs.tx_power_dbm for bs in stations], dtype=float)
    gain = np.array([bs.antenna_gain_db for bs in stations], dtype=float)
    return stations, positions, is_macro, tx, gain


def _received_at(loc: Location, scenario: Scenario) -> Tuple[np.ndarray, list]:
    if not scenario.area.contains(loc):
        raise DomainError(f"location ({loc.x}, {loc.y}) is outside the scenario area")
    stations, positions, is_macro, tx, gain = _station_arrays(scenario)
    rx = received_power_dbm(np.array([[loc.x, loc.y]]), positions, is_macro, tx, gain, scenario.radio)
    return rx, [bs.id for bs in stations]


def sinr(loc: Location, bs_id: int, scenario: Scenario) -> float:
    """Linear SINR of ``bs_id`` at ``loc`` with every other station interfering."""
    rx, ids = _received_at(loc, scenario)
    return float(sinr_matrix(rx, scenario.radio.noise_power_dbm)[0, ids.index(bs_id)])


def rate(loc: Location, bs_id: int, scenario: Scenario) -> float:
    """Downlink rate in bits/s; zero when the received power is below sensitivity."""
    rx, ids = _received_at(loc, scenario)
    return float(rate_matrix(rx, scenario.radio)[0, ids.index(bs_id)])


def _broadcast(value, n: int, name: str) -> np.ndarray:
    array = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(array) | (array == np.inf)):
        raise ScenarioError(f"{name} must not be NaN or -inf")
    return array


@dataclass(frozen=True)
class Network:
    """Numeric view of a scenario: everything the optimizer and the metrics need.

    Stations are ordered by ascending id; rows of ``rates`` follow the traffic
    grid order.
    """

    bs_ids: np.ndarray
    kinds: Tuple[BsKind, ...]
    demand: np.ndarray
    mean_size: np.ndarray
    rates: np.ndarray
    backhaul_rate: np.ndarray
    cache_hit_ratio: np.ndarray
    static_power: np.ndarray
    load_power_coeff: np.ndarray
    green_supply: np.ndarray
    kappa: float
    epsilon: float
    sinr: Optional[np.ndarray] = None
    panel_area: Optional[np.ndarray] = None
    irradiance: float = 1000.0
    grid_shape: Optional[Tuple[int, int]] = None
    bs_positions: Optional[np.ndarray] = None
    point_positions: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "Network":
        stations, positions, is_macro, tx, gain = _station_arrays(scenario)
        points = scenario.traffic
        xy = np.array([[p.location.x, p.location.y] for p in points], dtype=float)
        rx = received_power_dbm(xy, positions, is_macro, tx, gain, scenario.radio)
        sinr_values = sinr_matrix(rx, scenario.radio.noise_power_dbm)
        rates = np.where(
            rx < scenario.radio.receiver_sensitivity_dbm,
            0.0,
            shannon_rate(sinr_values, scenario.radio.bandwidth_hz),
        )
        network = cls(
            bs_ids=np.array([bs.id for bs in stations], dtype=int),
            kinds=tuple(bs.kind for bs in stations),
            demand=np.array([p.demand_bps for p in points], dtype=float),
            mean_size=np.array([p.mean_size for p in points], dtype=float),
            rates=rates,
            backhaul_rate=np.array([bs.backhaul_rate_bps for bs in stations], dtype=float),
            cache_hit_ratio=np.array([bs.cache_hit_ratio for bs in stations], dtype=float),
            static_power=np.array([bs.static_power_w for bs in stations], dtype=float),
            load_power_coeff=np.array([bs.load_power_coeff for bs in stations], dtype=float),
            green_supply=np.array([bs.green_supply_w for bs in stations], dtype=float),
            kappa=scenario.kappa,
            epsilon=scenario.epsilon,
            sinr=sinr_values,
            panel_area=np.array([bs.panel_area_m2 for bs in stations], dtype=float),
            irradiance=scenario.radio.solar_irradiance_w_m2,
            grid_shape=(scenario.traffic_grid.ny, scenario.traffic_grid.nx),
            bs_positions=positions,
            point_positions=xy,
        )
        logger.debug(f"Compiled network with {network.n_bs} BSs and {network.n_points} traffic points")
        return network

    @classmethod
    def from_arrays(
        cls,
        rates,
        demand,
        *,
        backhaul_rate=1e9,
        cache_hit_ratio=0.0,
        static_power=1.0,
        load_power_coeff=1.0,
        green_supply=0.0,
        kappa: float = 0.0,
        epsilon: float = 1e-3,
        mean_size=1.0,
        kinds: Optional[Sequence[BsKind]] = None,
        bs_ids: Optional[Sequence[int]] = None,
    ) -> "Network":
        """Build a network straight from rate and demand arrays (no geometry)."""
        rates = np.atleast_2d(np.asarray(rates, dtype=float))
        n_points, n_bs = rates.shape
        demand = _broadcast(demand, n_points, "demand")
        if np.any(rates < 0) or np.any(demand < 0):
            raise ScenarioError("rates and demand must be non-negative")
        ids = np.arange(1, n_bs + 1) if bs_ids is None else np.asarray(bs_ids, dtype=int)
        if len(set(ids.tolist())) != n_bs or np.any(np.diff(ids) <= 0):
            raise ScenarioError("bs_ids must be distinct and ascending")
        return cls(
            bs_ids=ids,
            kinds=tuple(kinds) if kinds is not None else (BsKind.SMALL,) * n_bs,
            demand=demand,
            mean_size=_broadcast(mean_size, n_points, "mean_size"),
            rates=rates,
            backhaul_rate=_broadcast(backhaul_rate, n_bs, "backhaul_rate"),
            cache_hit_ratio=_broadcast(cache_hit_ratio, n_bs, "cache_hit_ratio"),
            static_power=_broadcast(static_power, n_bs, "static_power"),
            load_power_coeff=_broadcast(load_power_coeff, n_bs, "load_power_coeff"),
            green_supply=_broadcast(green_supply, n_bs, "green_supply"),
            kappa=float(kappa),
            epsilon=float(epsilon),
        )

    @property
    def n_points(self) -> int:
        return self.rates.shape[0]

    @property
    def n_bs(self) -> int:
        return self.rates.shape[1]

    @property
    def reachable(self) -> np.ndarray:
        return self.rates > 0

    @property
    def is_small(self) -> np.ndarray:
        return np.array([kind is BsKind.SMALL for kind in self.kinds])

    def index_of(self, bs_id: int) -> int:
        matches = np.flatnonzero(self.bs_ids == bs_id)
        if matches.size == 0:
            raise KeyError(bs_id)
        return int(matches[0])

    def uncovered_points(self) -> np.ndarray:
        return np.flatnonzero(~self.reachable.any(axis=1))

    def with_kappa(self, kappa: float) -> "Network":
        if kappa < 0:
            raise DomainError(f"kappa must be non-negative, got {kappa}")
        return replace(self, kappa=float(kappa))

    def with_cache_ratios(self, ratios) -> "Network":
        ratios = _broadcast(ratios, self.n_bs, "cache_hit_ratio")
        if np.any((ratios < 0) | (ratios > 1)):
            raise DomainError("cache hit ratios must lie in [0, 1]")
        return replace(self, cache_hit_ratio=ratios)

    def with_small_backhaul(self, rate_bps: float) -> "Network":
        if not rate_bps > 0:
            raise DomainError(f"backhaul rate must be positive, got {rate_bps}")
        backhaul = np.where(self.is_small, float(rate_bps), self.backhaul_rate)
        return replace(self, backhaul_rate=backhaul)

    def with_backhaul(self, bs_id: int, rate_bps: float) -> "Network":
        if not rate_bps > 0:
            raise DomainError(f"backhaul rate must be positive, got {rate_bps}")
        backhaul = self.backhaul_rate.copy()
        backhaul[self.index_of(bs_id)] = float(rate_bps)
        return replace(self, backhaul_rate=backhaul)

    def with_solar_efficiency(self, efficiency: float) -> "Network":
        """Recompute every green supply as efficiency x irradiance x panel area."""
        if not 0 <= efficiency <= 1:
            raise DomainError(f"solar efficiency must lie in [0, 1], got {efficiency}")
        if self.panel_area is None:
            raise DomainError("network has no panel areas")
        return replace(self, green_supply=efficiency * self.irradiance * self.panel_area)
