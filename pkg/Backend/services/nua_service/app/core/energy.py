from dataclasses import dataclass

import numpy as np

from services.nua_service.app.core.queueing import LoadState
from services.nua_service.app.core.radio import Network
from services.nua_service.app.schemas.scenario import BaseStation


@dataclass(frozen=True)
class EnergyState:
    power: np.ndarray
    brown_power: np.ndarray
    green_capacity: np.ndarray
    latency_weight: np.ndarray

    @property
    def total_brown_power(self) -> float:
        return float(self.brown_power.sum())


def bs_power(load, bs: BaseStation):
    """Affine load-power model: static draw plus beta per unit of load."""
    return bs.load_power_coeff * load + bs.static_power_w


def brown_power(power, green_supply):
    """Grid draw; surplus green power is not redistributed."""
    return np.maximum(np.asarray(power, dtype=float) - green_supply, 0.0)


def green_capacity(bs: BaseStation, epsilon: float) -> float:
    return float(_green_capacity(bs.green_supply_w, bs.static_power_w, bs.load_power_coeff, epsilon))


def _green_capacity(green_supply, static_power, load_power_coeff, epsilon):
    return np.clip((green_supply - static_power) / load_power_coeff, 0.0, 1.0 - epsilon)


def green_capacities(network: Network) -> np.ndarray:
    return _green_capacity(
        network.green_supply, network.static_power, network.load_power_coeff, network.epsilon
    )


def latency_weight(load, green_cap, kappa: float):
    return np.exp(kappa * (np.asarray(load, dtype=float) - green_cap))


def green_supply_from_panel(efficiency: float, irradiance: float, panel_area):
    return efficiency * irradiance * np.asarray(panel_area, dtype=float)


def energy_state(loads: LoadState, network: Network) -> EnergyState:
    power = network.load_power_coeff * loads.bs_load + network.static_power
    capacity = green_capacities(network)
    return EnergyState(
        power=power,
        brown_power=brown_power(power, network.green_supply),
        green_capacity=capacity,
        latency_weight=latency_weight(loads.bs_load, capacity, network.kappa),
    )
