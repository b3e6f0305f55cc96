import numpy as np
import pytest

from services.nua_service.app.core.errors import DomainError, InfeasibleAssociationError, SaturationError
from services.nua_service.app.core.queueing import (
    Association,
    LoadState,
    backhaul_load,
    bs_load,
    latency_ratio,
    latency_ratios,
    load_state,
    per_user_delay,
)

from tests.conftest import random_instance, random_relaxed


class TestBsLoad:
    def test_zero_traffic(self, make_network):
        network = make_network([[10e6, 5e6], [3e6, 8e6]], demand=0.0)
        np.testing.assert_array_equal(bs_load(Association.one_hot([0, 1], 2), network), [0.0, 0.0])

    def test_single_point(self, make_network):
        network = make_network([[10e6]], demand=1e6)
        assert bs_load(Association.one_hot([0], 1), network)[0] == pytest.approx(0.1)

    def test_even_split_halves_contribution(self, make_network):
        network = make_network([[10e6, 10e6]], demand=1e6)
        loads = bs_load(Association(np.array([[0.5, 0.5]])), network)
        np.testing.assert_allclose(loads, [0.05, 0.05])

    def test_weight_on_unreachable_bs(self, make_network):
        network = make_network([[10e6, 0.0], [10e6, 4e6]], demand=1e6, bs_ids=[3, 8])
        with pytest.raises(InfeasibleAssociationError) as info:
            bs_load(Association(np.array([[0.5, 0.5], [1.0, 0.0]])), network)
        assert (info.value.point_index, info.value.bs_id) == (0, 8)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        network = random_instance(rng, 3, 20)
        eta1 = random_relaxed(rng, 20, 3)
        eta2 = random_relaxed(rng, 20, 3)
        for a in (0.0, 0.3, 0.75, 1.0):
            mixed = bs_load(Association(a * eta1 + (1 - a) * eta2), network)
            expected = a * bs_load(Association(eta1), network) + (1 - a) * bs_load(Association(eta2), network)
            np.testing.assert_allclose(mixed, expected, rtol=0, atol=1e-12)


class TestBackhaulLoad:
    def test_perfect_cache(self, make_network):
        network = make_network([[10e6]], demand=1e6, cache_hit_ratio=1.0, backhaul_rate=5e6)
        assert backhaul_load(Association.one_hot([0], 1), network)[0] == 0.0

    def test_no_cache(self, make_network):
        network = make_network([[10e6], [20e6]], demand=[1e6, 0.5e6], cache_hit_ratio=0.0, backhaul_rate=5e6)
        assert backhaul_load(Association.one_hot([0, 0], 1), network)[0] == pytest.approx(0.3)

    def test_table_hit_ratio(self, make_network):
        network = make_network([[10e6]], demand=1e6, cache_hit_ratio=0.27, backhaul_rate=5e6)
        assert backhaul_load(Association.one_hot([0], 1), network)[0] == pytest.approx(0.146)

    def test_bounded_by_bs_load(self, small_network):
        assoc = Association.one_hot(np.argmax(small_network.rates, axis=1), small_network.n_bs)
        loads = load_state(assoc, small_network)
        served = assoc.eta.astype(bool)
        peak = np.array([small_network.rates[served[:, j], j].max(initial=0.0) for j in range(small_network.n_bs)])
        assert np.all(loads.backhaul_load <= loads.bs_load * peak / small_network.backhaul_rate + 1e-15)


class TestLatencyRatio:
    @pytest.mark.parametrize("load, expected", [(0.0, 0.0), (0.5, 1.0), (0.9, 9.0)])
    def test_values(self, load, expected):
        assert latency_ratio(load) == pytest.approx(expected)

    def test_saturation(self):
        with pytest.raises(SaturationError):
            latency_ratio(1.0)
        with pytest.raises(SaturationError):
            latency_ratios(np.array([0.2, 1.3]))

    def test_negative_load(self):
        with pytest.raises(DomainError):
            latency_ratio(-0.1)

    def test_diverges_near_one(self):
        loads = np.linspace(0.0, 1 - 1e-6, 1000)
        ratios = latency_ratios(loads)
        assert np.all(np.diff(ratios) > 0)
        assert ratios[-1] > 9e5


class TestPerUserDelay:
    def test_zero_load(self, make_network):
        network = make_network([[10e6]], demand=0.0, mean_size=1e6, backhaul_rate=5e6)
        delay = per_user_delay(0, 1, LoadState(np.array([0.0]), np.array([0.0])), network)
        assert delay.bs_wait == 0.0
        assert delay.bs_delivery == pytest.approx(0.1)

    def test_half_loaded(self, make_network):
        network = make_network([[10e6]], demand=0.0, mean_size=1e6, backhaul_rate=5e6)
        delay = per_user_delay(0, 1, LoadState(np.array([0.5]), np.array([0.5])), network)
        assert delay.bs_delivery == pytest.approx(0.2)
        assert delay.backhaul_wait == pytest.approx(0.2)

    def test_wait_over_service_time_is_location_independent(self):
        rng = np.random.default_rng(3)
        network = random_instance(rng, 2, 30)
        loads = LoadState(np.array([0.35, 0.6]), np.array([0.1, 0.2]))
        for point in rng.integers(0, 30, size=10):
            for bs_id, rho in ((1, 0.35), (2, 0.6)):
                delay = per_user_delay(int(point), bs_id, loads, network)
                service = network.mean_size[point] / network.rates[point, bs_id - 1]
                assert delay.bs_wait / service == pytest.approx(rho / (1 - rho))

    def test_saturated(self, make_network):
        network = make_network([[10e6]], demand=0.0)
        with pytest.raises(SaturationError):
            per_user_delay(0, 1, LoadState(np.array([1.0]), np.array([0.0])), network)


def test_load_state_flags(make_network):
    network = make_network([[1e6]], demand=2e6, epsilon=1e-3)
    loads = load_state(Association.one_hot([0], 1), network)
    assert loads.saturated(network.epsilon).tolist() == [True]
    assert loads.overflow(network.epsilon) == pytest.approx(2.0 - 0.999)
    assert loads.clamped(network.epsilon).bs_load[0] == pytest.approx(0.999)
