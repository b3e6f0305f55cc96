import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from services.nua_service.app.core.errors import (
    DomainError,
    InfeasibleAssociationError,
    SaturationError,
)
from services.nua_service.app.core.radio import Network

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Association:
    """User association weights, shape (traffic points, stations)."""

    eta: np.ndarray

    @classmethod
    def one_hot(cls, indices: Sequence[int], n_bs: int) -> "Association":
        indices = np.asarray(indices, dtype=int)
        eta = np.zeros((indices.size, n_bs))
        eta[np.arange(indices.size), indices] = 1.0
        return cls(eta)

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.eta == 0.0) | (self.eta == 1.0)))

    def is_stochastic(self, atol: float = 1e-9) -> bool:
        return bool(
            np.all(self.eta >= 0.0)
            and np.all(self.eta <= 1.0)
            and np.allclose(self.eta.sum(axis=1), 1.0, atol=atol)
        )

    def serving_indices(self) -> np.ndarray:
        return np.argmax(self.eta, axis=1)

    def serving_ids(self, network: Network) -> np.ndarray:
        return network.bs_ids[self.serving_indices()]

    def equals(self, other: "Association") -> bool:
        return np.array_equal(self.eta, other.eta)


@dataclass(frozen=True)
class LoadState:
    bs_load: np.ndarray
    backhaul_load: np.ndarray

    def saturated(self, epsilon: float) -> np.ndarray:
        limit = 1.0 - epsilon
        return (self.bs_load > limit) | (self.backhaul_load > limit)

    def overflow_per_bs(self, epsilon: float) -> np.ndarray:
        limit = 1.0 - epsilon
        return np.maximum(self.bs_load - limit, 0.0) + np.maximum(self.backhaul_load - limit, 0.0)

    def overflow(self, epsilon: float) -> float:
        """Total load in excess of 1 - epsilon over both queues of every BS."""
        return float(self.overflow_per_bs(epsilon).sum())

    def clamped(self, epsilon: float) -> "LoadState":
        limit = 1.0 - epsilon
        return LoadState(np.clip(self.bs_load, 0.0, limit), np.clip(self.backhaul_load, 0.0, limit))


class DelayBreakdown(NamedTuple):
    bs_delivery: float
    bs_wait: float
    backhaul_wait: float


def _check_supported(assoc: Association, network: Network) -> None:
    bad = (assoc.eta > 0) & ~network.reachable
    if np.any(bad):
        point, column = np.argwhere(bad)[0]
        raise InfeasibleAssociationError(int(point), int(network.bs_ids[column]))


def service_weights(network: Network) -> np.ndarray:
    """d(x) / r_j(x), zero where the BS does not reach the point."""
    return np.divide(
        network.demand[:, None],
        network.rates,
        out=np.zeros_like(network.rates),
        where=network.reachable,
    )


def bs_load(assoc: Association, network: Network) -> np.ndarray:
    """M/G/1-PS utilisation of every BS."""
    _check_supported(assoc, network)
    return (assoc.eta * service_weights(network)).sum(axis=0)


def backhaul_load(assoc: Association, network: Network) -> np.ndarray:
    """M/M/1 backhaul utilisation; only cache misses cross the backhaul."""
    carried = (assoc.eta * network.demand[:, None]).sum(axis=0)
    return (1.0 - network.cache_hit_ratio) * carried / network.backhaul_rate


def load_state(assoc: Association, network: Network) -> LoadState:
    return LoadState(bs_load(assoc, network), backhaul_load(assoc, network))


def latency_ratio(load: float) -> float:
    if load < 0:
        raise DomainError(f"load must be non-negative, got {load}")
    if load >= 1:
        raise SaturationError(f"queue saturated at load {load}", load=load)
    return load / (1.0 - load)


def latency_ratios(loads: np.ndarray) -> np.ndarray:
    loads = np.asarray(loads, dtype=float)
    if np.any(loads >= 1):
        index = int(np.argmax(loads))
        raise SaturationError(f"queue {index} saturated at load {loads[index]}", load=float(loads[index]))
    return loads / (1.0 - loads)


def per_user_delay(point: int, bs_id: int, loads: LoadState, network: Network) -> DelayBreakdown:
    """Mean delivery and waiting times (seconds) of one traffic point served by ``bs_id``."""
    j = network.index_of(bs_id)
    r = network.rates[point, j]
    if r <= 0:
        raise InfeasibleAssociationError(point, bs_id)
    rho = loads.bs_load[j]
    rho_t = loads.backhaul_load[j]
    for value in (rho, rho_t):
        if value >= 1:
            raise SaturationError(f"BS {bs_id} saturated at load {value}", bs_id=bs_id, load=float(value))
    nu = network.mean_size[point]
    return DelayBreakdown(
        bs_delivery=nu / (r * (1.0 - rho)),
        bs_wait=rho * nu / (r * (1.0 - rho)),
        backhaul_wait=rho_t * nu / (network.backhaul_rate[j] * (1.0 - rho_t)),
    )
