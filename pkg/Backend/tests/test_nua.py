import math

import numpy as np
import pytest

from services.nua_service.app.core import nua
from services.nua_service.app.core.errors import (
    DomainError,
    SaturationError,
    StagnationError,
    UncoveredLocationError,
)
from services.nua_service.app.core.queueing import Association, LoadState, load_state
from services.nua_service.app.schemas.results import RunStatus
from services.nua_service.app.schemas.run import RunOptions

from tests.conftest import random_instance, random_relaxed


class TestObjective:
    def test_bs_queue_only(self, make_network):
        network = make_network([[10e6]], demand=5e6, cache_hit_ratio=1.0)
        assert nua.objective(Association.one_hot([0], 1), network) == pytest.approx(1.0)

    def test_both_queues(self, make_network):
        network = make_network([[10e6]], demand=5e6, backhaul_rate=10e6)
        assert nua.objective(Association.one_hot([0], 1), network) == pytest.approx(2.0)

    def test_weighted(self, make_network):
        network = make_network([[10e6]], demand=5e6, backhaul_rate=10e6, kappa=2.0)
        assert nua.objective(Association.one_hot([0], 1), network) == pytest.approx(2.0 * np.e)

    def test_saturated_is_infinite(self, make_network):
        network = make_network([[10e6]], demand=10e6)
        assert nua.objective(Association.one_hot([0], 1), network) == math.inf

    def test_merit_orders_overflow_first(self, make_network):
        network = make_network([[1e6, 1e6]], demand=0.0)
        light = nua.merit(LoadState(np.array([0.99, 0.0]), np.zeros(2)), network)
        over = nua.merit(LoadState(np.array([1.2, 0.0]), np.zeros(2)), network)
        worse = nua.merit(LoadState(np.array([1.5, 0.0]), np.zeros(2)), network)
        assert light < over < worse


class TestAdvertise:
    def test_unweighted(self, make_network):
        network = make_network([[1.0]], demand=0.0, backhaul_rate=10e6)
        ads = nua.advertise(LoadState(np.array([0.5]), np.array([0.5])), network)
        assert ads.theta_a[0] == pytest.approx(4.0)
        assert ads.theta_b[0] == pytest.approx(4e-7)

    def test_weighted(self, make_network):
        network = make_network([[1.0]], demand=0.0, backhaul_rate=10e6, kappa=2.0)
        ads = nua.advertise(LoadState(np.array([0.5]), np.array([0.5])), network)
        assert ads.theta_a[0] == pytest.approx(8.0 * np.e)
        assert ads.theta_b[0] == pytest.approx(4e-7 * np.e)

    def test_perfect_cache_hides_backhaul(self, make_network):
        network = make_network([[1.0]], demand=0.0, cache_hit_ratio=1.0, backhaul_rate=10e6)
        ads = nua.advertise(LoadState(np.array([0.2]), np.array([0.0])), network)
        assert ads.theta_b[0] == 0.0

    def test_clamps_saturated_loads(self, make_network):
        network = make_network([[1.0]], demand=0.0, cache_hit_ratio=1.0)
        ads = nua.advertise(LoadState(np.array([2.0]), np.array([0.0])), network)
        assert math.isfinite(ads.theta_a[0])
        assert ads.theta_a[0] == pytest.approx(1e6, rel=1e-9)

    def test_max_change(self):
        a = nua.Advertisement(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
        b = nua.Advertisement(np.array([1.5, 2.0]), np.array([0.1, 0.9]))
        assert a.max_change(b) == pytest.approx(0.7)


class TestSelectBs:
    def test_faster_bs_wins_without_backhaul_cost(self):
        ads = nua.Advertisement(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
        assert nua.select_bs(np.array([10e6, 20e6]), ads) == 2

    def test_backhaul_cost_flips_choice(self):
        ads = nua.Advertisement(np.array([1.0, 1.0]), np.array([0.0, 1e-6]))
        assert nua.select_bs(np.array([10e6, 20e6]), ads) == 1

    def test_tie_goes_to_lowest_id(self):
        ads = nua.Advertisement(np.array([2.0, 2.0]), np.array([1e-7, 1e-7]))
        assert nua.select_bs(np.array([10e6, 10e6]), ads, bs_ids=[4, 9]) == 4

    def test_unreachable_bs_never_chosen(self):
        ads = nua.Advertisement(np.array([100.0, 1.0]), np.array([0.0, 0.0]))
        assert nua.select_bs(np.array([1e6, 0.0]), ads) == 1

    def test_uncovered(self):
        ads = nua.Advertisement(np.ones(2), np.zeros(2))
        with pytest.raises(UncoveredLocationError) as info:
            nua.select_bs(np.zeros(2), ads, point=5)
        assert info.value.point_index == 5

    def test_association_step_matches_per_point_selection(self):
        rng = np.random.default_rng(11)
        network = random_instance(rng, 3, 40, kappa=2.0)
        ads = nua.advertise(load_state(Association(random_relaxed(rng, 40, 3)), network), network)
        step = nua.association_step(network, ads)
        assert step.is_binary
        expected = [nua.select_bs(network.rates[x], ads, network.bs_ids, x) for x in range(40)]
        np.testing.assert_array_equal(step.serving_ids(network), expected)


class TestIntermediateUpdate:
    def test_blend(self):
        new = Association.one_hot([0, 1], 2)
        prev = Association(np.array([[0.2, 0.8], [0.5, 0.5]]))
        blended = nua.intermediate_update(new, prev, 0.5)
        np.testing.assert_allclose(blended.eta, [[0.6, 0.4], [0.25, 0.75]])

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 1.5])
    def test_delta_outside_open_interval(self, delta):
        eta = Association.one_hot([0], 2)
        with pytest.raises(DomainError):
            nua.intermediate_update(eta, eta, delta)

    def test_stays_in_relaxed_set(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            prev = Association(random_relaxed(rng, 10, 4))
            new = Association.one_hot(rng.integers(0, 4, size=10), 4)
            assert nua.intermediate_update(new, prev, float(rng.uniform(0.01, 0.99))).is_stochastic()


class TestChooseDelta:
    @pytest.fixture
    def two_cells(self, make_network):
        return make_network([[1e6, 1e6]], demand=0.5e6, cache_hit_ratio=1.0)

    def test_overshooting_step_is_shortened(self, two_cells):
        prev = Association(np.array([[0.4, 0.6]]))
        new = Association.one_hot([0], 2)
        assert nua.choose_delta(new, prev, two_cells, delta0=0.5) == pytest.approx(0.75)

    def test_improving_step_returns_initial_weight(self, two_cells):
        prev = Association.one_hot([1], 2)
        new = Association.one_hot([0], 2)
        assert nua.choose_delta(new, prev, two_cells, delta0=0.5) == 0.5

    def test_accepted_step_lowers_objective(self):
        rng = np.random.default_rng(2)
        network = random_instance(rng, 3, 15, kappa=2.0)
        prev = Association(random_relaxed(rng, 15, 3))
        new = nua.association_step(network, nua.advertise(load_state(prev, network), network))
        delta = nua.choose_delta(new, prev, network)
        assert nua.objective(nua.intermediate_update(new, prev, delta), network) < nua.objective(prev, network)

    def test_zero_direction(self, two_cells):
        eta = Association.one_hot([0], 2)
        with pytest.raises(DomainError):
            nua.choose_delta(eta, eta, two_cells)

    def test_stagnation_at_optimum(self, two_cells):
        prev = Association(np.array([[0.5, 0.5]]))
        new = Association.one_hot([0], 2)
        with pytest.raises(StagnationError):
            nua.choose_delta(new, prev, two_cells, max_backtracks=5)


class TestLineSearchDelta:
    @pytest.fixture
    def two_cells(self, make_network):
        return make_network([[1e6, 1e6]], demand=0.5e6, cache_hit_ratio=1.0)

    def test_finds_balanced_split_between_schedule_weights(self, two_cells):
        prev = Association(np.array([[0.4, 0.6]]))
        new = Association.one_hot([0], 2)
        # the blend is balanced at delta = 5/6, which the schedule skips
        assert nua.line_search_delta(new, prev, two_cells) == pytest.approx(5.0 / 6.0, abs=1e-6)

    def test_never_worse_than_first_decrease(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            network = random_instance(rng, 3, 15, kappa=float(rng.choice([0.0, 2.0, 7.0])), demand_scale=3.0)
            prev = Association(random_relaxed(rng, 15, 3))
            new = nua.association_step(network, nua.advertise(load_state(prev, network), network))
            best = nua.objective(nua.intermediate_update(new, prev, nua.line_search_delta(new, prev, network)), network)
            first = nua.objective(nua.intermediate_update(new, prev, nua.choose_delta(new, prev, network)), network)
            assert best <= first
            assert best < nua.objective(prev, network)

    def test_zero_direction(self, two_cells):
        eta = Association.one_hot([0], 2)
        with pytest.raises(DomainError):
            nua.line_search_delta(eta, eta, two_cells)

    def test_leaves_saturated_start_through_schedule(self, make_network):
        network = make_network([[1e6, 1e6]], demand=1.5e6, cache_hit_ratio=1.0)
        prev = Association.one_hot([0], 2)
        new = Association.one_hot([1], 2)
        assert nua.line_search_delta(new, prev, network) == 0.5


class TestGradient:
    def test_single_bs(self, make_network):
        network = make_network([[10e6]], demand=5e6, backhaul_rate=10e6)
        # theta_a = 4, theta_b = 4e-7 at half load on both queues
        expected = 5e6 * (4.0 / 10e6 + 4e-7)
        assert nua.gradient(Association.one_hot([0], 1), network, 0, 1) == pytest.approx(expected)

    def test_saturated(self, make_network):
        network = make_network([[1e6]], demand=2e6)
        with pytest.raises(SaturationError):
            nua.gradient_matrix(Association.one_hot([0], 1), network)

    def test_unreachable_entry_is_infinite(self, make_network):
        network = make_network([[1e6, 0.0]], demand=1e5)
        grad = nua.gradient_matrix(Association.one_hot([0], 2), network)
        assert math.isfinite(grad[0, 0])
        assert grad[0, 1] == math.inf

    def test_descent_product_negative_off_fixed_point(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            network = random_instance(rng, 3, 12, kappa=2.0)
            prev = Association(random_relaxed(rng, 12, 3))
            new = nua.association_step(network, nua.advertise(load_state(prev, network), network))
            assert nua.descent_product(prev, new, 0.5, network) < 0


class TestPolish:
    def test_spreads_identical_points(self, make_network):
        network = make_network([[1e6, 1e6]] * 4, demand=0.2e6, cache_hit_ratio=1.0)
        polished = nua.polish(Association.one_hot([0, 0, 0, 0], 2), network)
        assert np.bincount(polished.serving_indices(), minlength=2).tolist() == [2, 2]
        assert nua.objective(polished, network) == pytest.approx(2 * 0.4 / 0.6)

    def test_clears_saturation_first(self, make_network):
        network = make_network([[1e6, 1e6]] * 4, demand=0.3e6, cache_hit_ratio=1.0)
        polished = nua.polish(Association.one_hot([0, 0, 0, 0], 2), network)
        assert nua.objective(polished, network) == pytest.approx(3.0)

    def test_never_increases_objective(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            network = random_instance(rng, 3, 15, kappa=2.0)
            start = Association.one_hot(rng.integers(0, 3, size=15), 3)
            assert nua.objective(nua.polish(start, network), network) <= nua.objective(start, network)


class TestRefineRounding:
    @pytest.fixture
    def pairs(self, make_network):
        return make_network([[1e6, 1e6]] * 4, demand=[0.3e6, 0.3e6, 0.2e6, 0.2e6], cache_hit_ratio=1.0)

    def test_exchange_that_single_moves_miss(self, pairs):
        start = Association.one_hot([0, 0, 1, 1], 2)
        assert nua.objective(nua.polish(start, pairs), pairs) == pytest.approx(0.6 / 0.4 + 0.4 / 0.6)
        refined = nua.refine_rounding(start, start, pairs)
        assert refined.is_binary
        assert nua.objective(refined, pairs) == pytest.approx(2.0)

    def test_large_networks_reopen_split_rows_only(self, make_network):
        network = make_network([[1e6, 1e6]] * 3, demand=[0.2e6, 0.3e6, 0.3e6], cache_hit_ratio=1.0)
        rounded = Association.one_hot([0, 0, 0], 2)
        relaxed = Association(np.array([[0.5, 0.5], [1.0, 0.0], [1.0, 0.0]]))
        refined = nua.refine_rounding(relaxed, rounded, network, max_combinations=2)
        assert refined.serving_indices().tolist() == [1, 0, 0]

    def test_too_many_combinations_keeps_rounding(self, pairs):
        start = Association.one_hot([0, 0, 1, 1], 2)
        relaxed = Association(np.full((4, 2), 0.5))
        assert nua.refine_rounding(relaxed, start, pairs, max_combinations=8).equals(start)

    def test_never_worse_than_rounding(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            network = random_instance(rng, 3, 7, kappa=2.0, demand_scale=5.0)
            start = Association.one_hot(rng.integers(0, 3, size=7), 3)
            refined = nua.refine_rounding(Association(random_relaxed(rng, 7, 3)), start, network)
            assert nua.objective(refined, network) <= nua.objective(start, network) * (1 + 1e-12)


class TestRun:
    def test_single_bs_converges_in_one_iteration(self, make_network):
        network = make_network([[10e6], [20e6], [5e6]], demand=1e5)
        result = nua.run(network)
        assert result.status is RunStatus.CONVERGED
        assert result.iterations == 1
        assert result.association.serving_indices().tolist() == [0, 0, 0]
        assert result.psi == pytest.approx(nua.objective(result.association, network))

    def test_uncovered_point(self, make_network):
        network = make_network([[10e6, 0.0], [0.0, 0.0]], demand=1e5)
        with pytest.raises(UncoveredLocationError):
            nua.run(network)

    def test_initial_association_is_max_sinr(self, small_network):
        initial = nua.max_sinr_association(small_network)
        np.testing.assert_array_equal(initial.serving_indices(), np.argmax(small_network.sinr, axis=1))

    def test_infeasible_reports_witness(self, make_network):
        network = make_network([[1e6, 1e6], [1e6, 1e6]], demand=1.2e6, bs_ids=[3, 5])
        result = nua.run(network)
        assert result.status is RunStatus.INFEASIBLE
        assert result.psi == math.inf
        assert result.trace.witness_bs in (3, 5)

    def test_options_are_honoured(self, small_network):
        result = nua.run(small_network, RunOptions(max_iters=2, tol=1e-15, polish=False))
        assert result.iterations <= 2
        assert len(result.trace.records) <= 3
        assert result.association.is_binary

    def test_result_is_binary_and_feasible(self, small_network):
        result = nua.run(small_network)
        assert result.association.is_binary
        assert result.association.is_stochastic()
        assert math.isfinite(result.psi)
        assert result.relaxed.is_stochastic()

    def test_first_decrease_rule_reaches_same_relaxed_objective(self, small_network):
        best = nua.run(small_network, RunOptions(tol=1e-9, max_iters=500))
        first = nua.run(small_network, RunOptions(tol=1e-9, max_iters=500, line_search=False))
        assert first.relaxed_psi == pytest.approx(best.relaxed_psi, rel=1e-3)
        assert all(r.delta is None or r.delta >= 0.5 for r in first.trace.records)
