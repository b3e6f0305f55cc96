import numpy as np
import pytest

from services.nua_service.app.core.radio import Network
from services.nua_service.app.core.scenario import generate_scenario
from services.nua_service.app.schemas.scenario import GenerationParams


@pytest.fixture(scope="session")
def replica_scenario():
    """Default deployment: 3 macros, 7 small cells, 50x50 grid over 2 km x 2 km."""
    return generate_scenario(7, GenerationParams())


@pytest.fixture(scope="session")
def replica_network(replica_scenario):
    return Network.from_scenario(replica_scenario)


@pytest.fixture(scope="session")
def small_scenario():
    return generate_scenario(3, GenerationParams(grid_nx=12, grid_ny=12))


@pytest.fixture(scope="session")
def small_network(small_scenario):
    return Network.from_scenario(small_scenario)


@pytest.fixture
def make_network():
    return Network.from_arrays


def random_instance(rng, n_bs, n_points, kappa=0.0, demand_scale=1.0):
    """Light-load instance with strongly varied rates."""
    return Network.from_arrays(
        rates=rng.uniform(2e6, 50e6, size=(n_points, n_bs)),
        demand=demand_scale * rng.uniform(0.02e6, 0.2e6, size=n_points),
        backhaul_rate=rng.uniform(5e6, 20e6, size=n_bs),
        cache_hit_ratio=rng.uniform(0.0, 0.3, size=n_bs),
        static_power=1.0,
        load_power_coeff=1.0,
        green_supply=rng.uniform(0.5, 1.5, size=n_bs),
        kappa=kappa,
    )


def random_relaxed(rng, n_points, n_bs):
    return rng.dirichlet(np.ones(n_bs), size=n_points)
