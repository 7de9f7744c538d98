import numpy as np
import pytest

from catalog import UnitPrices, normalize
from conftest import make_catalog
from demand import DemandDistribution
from errors import ValidationError
from reservation import (all_on_demand_cost, cost_curve, empty_plan, expected_cost_single,
                         long_term_cost, make_plan, optimal_reservation_single, plan_cost,
                         plan_reservation, solve_covering_ilp)


def _prices(upfront, usage, on_demand):
    return UnitPrices(upfront_per_interval=upfront, usage_per_interval=usage,
                      on_demand_per_interval=on_demand, on_demand_per_quantum=on_demand)


HALF_HALF = DemandDistribution.from_mapping({2: 0.5, 10: 0.5})


def test_expected_cost_pure_on_demand():
    assert expected_cost_single(HALF_HALF, 0, _prices(1.0, 0.5, 0.5)) == pytest.approx(3.0)


def test_expected_cost_full_reservation():
    assert expected_cost_single(HALF_HALF, 10, _prices(1.0, 0.5, 4.0)) == pytest.approx(13.0)


def test_expected_cost_mixed():
    assert expected_cost_single(HALF_HALF, 2, _prices(1.0, 0.5, 4.0)) == pytest.approx(19.0)


def test_expected_cost_rejects_negative_r():
    with pytest.raises(ValidationError):
        expected_cost_single(HALF_HALF, -1, _prices(1.0, 0.5, 4.0))


def test_expected_cost_matches_monte_carlo(rng):
    draws = rng.choice([2, 10], size=100_000)
    prices = _prices(1.0, 0.5, 4.0)
    for r in (0, 2, 5, 10):
        sampled = r * 1.0 + 0.5 * np.minimum(draws, r).mean() + 4.0 * np.maximum(draws - r, 0).mean()
        assert expected_cost_single(HALF_HALF, r, prices) == pytest.approx(sampled, rel=0.01)


@pytest.mark.parametrize('on_demand, r_star', [(4.0, 10), (1.2, 0)])
def test_optimal_reservation_examples(on_demand, r_star):
    optimum = optimal_reservation_single(HALF_HALF, _prices(1.0, 0.5, on_demand))
    assert optimum.r_star == r_star
    assert optimum.lower == max(r_star - 1, 0)
    assert optimum.upper == r_star


def test_deterministic_demand_is_fully_reserved():
    dist = DemandDistribution.from_mapping({7: 1.0})
    assert optimal_reservation_single(dist, _prices(0.2, 0.1, 0.5)).r_star == 7


def test_on_demand_cheaper_than_usage_reserves_nothing():
    assert optimal_reservation_single(HALF_HALF, _prices(0.0, 0.5, 0.4)).r_star == 0


def test_optimum_matches_brute_force_argmin(rng):
    for _ in range(1000):
        size = int(rng.integers(1, 201))
        support = np.unique(rng.integers(0, 300, size=size))
        probs = rng.dirichlet(np.ones(len(support)))
        dist = DemandDistribution(tuple(int(s) for s in support), tuple(float(p) for p in probs))
        usage = float(rng.uniform(0.01, 1.0))
        prices = _prices(float(rng.uniform(0.01, 1.0)), usage, usage + float(rng.uniform(0.01, 2.0)))

        # Brute force over r = 0..max support
        rs = np.arange(dist.max_demand + 1)[:, None]
        d = support[None, :]
        costs = (rs[:, 0] * prices.upfront_per_interval
                 + prices.usage_per_interval * (np.minimum(d, rs) * probs).sum(axis=1)
                 + prices.on_demand_per_interval * (np.maximum(d - rs, 0) * probs).sum(axis=1))
        assert optimal_reservation_single(dist, prices).r_star == int(np.argmin(costs))


def test_cost_curve_agrees_with_expected_cost(rng):
    for _ in range(20):
        support = np.unique(rng.integers(0, 40, size=10))
        probs = rng.dirichlet(np.ones(len(support)))
        dist = DemandDistribution(tuple(int(s) for s in support), tuple(float(p) for p in probs))
        prices = _prices(0.3, 0.1, 0.9)
        curve = cost_curve(dist, prices)
        for r, cost in zip(curve.r, curve.cost):
            assert cost == pytest.approx(expected_cost_single(dist, r, prices), abs=1e-9)
        assert curve.argmin() == optimal_reservation_single(dist, prices).r_star


def test_cost_curve_is_convex(rng):
    for _ in range(50):
        support = np.unique(rng.integers(0, 80, size=15))
        probs = rng.dirichlet(np.ones(len(support)))
        dist = DemandDistribution(tuple(int(s) for s in support), tuple(float(p) for p in probs))
        usage = float(rng.uniform(0, 1))
        curve = np.array(cost_curve(dist, _prices(float(rng.uniform(0, 1)), usage, usage + 0.5)).cost)
        assert (np.diff(curve, 2) >= -1e-9).all()


def test_covering_ilp_examples():
    catalog = make_catalog([('A', 1, 100, 0.01, 9.0), ('B', 3, 250, 0.01, 9.0)])
    assert solve_covering_ilp(catalog, 7) == {'A': 1, 'B': 2}
    assert solve_covering_ilp(catalog, 0) == {'A': 0, 'B': 0}

    single = make_catalog([('C', 8, 10, 0.01, 9.0)])
    assert solve_covering_ilp(single, 17) == {'C': 3}


def test_covering_ilp_rejects_negative_demand(two_level_catalog):
    with pytest.raises(ValidationError):
        solve_covering_ilp(two_level_catalog, -1)


def test_two_level_plan_reserves_three(two_level_catalog):
    dist = DemandDistribution.from_mapping({9: 0.9, 15: 0.1})
    plan = plan_reservation(dist, two_level_catalog)

    assert plan.quantity('c3') == 3
    assert plan.reserved_capacity == 9
    assert plan.r_star == 3
    assert plan.window == (6, 9)
    assert plan.reference_type == 'c3'
    assert plan.expected_cost_per_interval == pytest.approx(0.7)
    assert long_term_cost(plan) == pytest.approx(70.0)

    # no other reservation count does better
    costs = [plan_cost(dist, two_level_catalog, make_plan(two_level_catalog, {'c3': n})) for n in range(6)]
    assert int(np.argmin(costs)) == 3
    assert costs[0] == pytest.approx(1.6)
    assert costs[5] == pytest.approx(0.82)


def test_single_type_plan_uses_r_star(rng):
    for _ in range(30):
        capacity = int(rng.integers(1, 6))
        catalog = make_catalog([('only', capacity, float(rng.uniform(1, 40)), 0.1, 0.6)])
        support = np.unique(rng.integers(0, 60, size=8))
        probs = rng.dirichlet(np.ones(len(support)))
        dist = DemandDistribution(tuple(int(s) for s in support), tuple(float(p) for p in probs))
        plan = plan_reservation(dist, catalog)
        assert plan.quantity('only') == plan.r_star


def test_unprofitable_prices_give_an_empty_plan():
    catalog = make_catalog([('c3', 3, 10, 0.5, 0.4)])
    dist = DemandDistribution.from_mapping({9: 0.9, 15: 0.1})
    plan = plan_reservation(dist, catalog)
    assert plan.total_instances() == 0
    assert plan.reserved_capacity == 0


def test_plan_never_loses_to_all_on_demand(rng):
    for _ in range(40):
        catalog = make_catalog([
            ('a', int(rng.integers(1, 4)), float(rng.uniform(1, 30)), float(rng.uniform(0, 0.1)), 0.4),
            ('b', int(rng.integers(4, 9)), float(rng.uniform(5, 80)), float(rng.uniform(0, 0.2)), 0.9),
        ], lease=100, quantum=4)
        support = np.unique(rng.integers(0, 50, size=6))
        probs = rng.dirichlet(np.ones(len(support)))
        dist = DemandDistribution(tuple(int(s) for s in support), tuple(float(p) for p in probs))
        plan = plan_reservation(dist, catalog)
        assert plan.expected_cost_per_interval <= all_on_demand_cost(dist, catalog) + 1e-12


def test_make_plan_validates_quantities(two_level_catalog):
    with pytest.raises(ValidationError):
        make_plan(two_level_catalog, {'c3': -1})
    with pytest.raises(ValidationError):
        make_plan(two_level_catalog, {'c3': 1.5})
    with pytest.raises(ValidationError):
        make_plan(two_level_catalog, {'m9': 1})


def test_plan_to_dict(two_level_catalog):
    plan = make_plan(two_level_catalog, {'c3': 2})
    assert plan.to_dict()['quantities'] == {'c3': 2}
    assert plan.to_dict()['reserved_capacity'] == 6
    assert empty_plan(two_level_catalog).reserved_capacity == 0


def test_prices_can_be_passed_in(two_level_catalog):
    dist = DemandDistribution.from_mapping({9: 0.9, 15: 0.1})
    rates = normalize(two_level_catalog.book)
    assert plan_reservation(dist, two_level_catalog, rates) == plan_reservation(dist, two_level_catalog)
