"""
Reservation Module - Phase 1 Long-Term Planning
Single-type expected cost model, the optimal reservation count r*,
the covering ILP over all VM types and the best-CP window search
that produces the multi-type ReservationPlan
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from catalog import best_cp_type, from_micros, normalize
from covering import solve_cover
from demand import distribution_to_vm_units
from errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReservationPlan:
    """
    Long-term contract: lease period, VM types and quantities

    quantities is a tuple of (type id, n_i) pairs sorted by id.
    r_star, window and reference_type are set when the plan comes
    from plan_reservation.
    """
    lease_period: int
    quantities: tuple
    reserved_capacity: int
    expected_cost_per_interval: float = 0.0
    r_star: int = None
    window: tuple = None
    reference_type: str = None

    def quantity(self, type_id):
        return dict(self.quantities).get(type_id, 0)

    def total_instances(self):
        return sum(n for _, n in self.quantities)

    def to_dict(self):
        return {
            'lease_period': self.lease_period,
            'quantities': {type_id: n for type_id, n in self.quantities},
            'reserved_capacity': self.reserved_capacity,
            'expected_cost_per_interval': round(self.expected_cost_per_interval, 9),
            'r_star': self.r_star,
            'window': list(self.window) if self.window is not None else None,
            'reference_type': self.reference_type,
        }


def make_plan(catalog, quantities, expected_cost=0.0, **extra):
    """
    Build a ReservationPlan from {type id: n_i}

    Checks that every n_i is a nonnegative integer and derives
    reserved_capacity = sum(n_i * C_i).
    """
    pairs = []
    capacity = 0
    for vm in catalog.vm_types:
        n = quantities.get(vm.id, 0)
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValidationError(f"quantity must be a nonnegative integer, got {n!r}", field=vm.id)
        pairs.append((vm.id, int(n)))
        capacity += int(n) * vm.capacity
    unknown = set(quantities) - {vm.id for vm in catalog.vm_types}
    if unknown:
        raise ValidationError(f"unknown VM type {', '.join(sorted(unknown))}", field='quantities')
    return ReservationPlan(catalog.book.lease_period, tuple(pairs), capacity, expected_cost, **extra)


def empty_plan(catalog):
    """Reserve nothing"""
    return make_plan(catalog, {})


@dataclass(frozen=True)
class SingleTypeCostCurve:
    r: tuple
    cost: tuple

    def argmin(self):
        return int(np.argmin(self.cost))


@dataclass(frozen=True)
class ReservationOptimum:
    r_star: int
    lower: int
    upper: int


def expected_cost_single(dist, r, prices):
    """
    Expected per-interval cost of reserving r VMs of one type

    cost(r) = r * p_upfront + p_usage * E[min(D, r)] + p_od * E[(D - r)^+]

    Args:
        dist (DemandDistribution): Demand in VM units of this type
        r (int): Reserved VM count, r >= 0
        prices (UnitPrices): Normalized prices of the type

    Returns:
        float: Expected cost per interval
    """
    if r < 0:
        raise ValidationError("must be nonnegative", field='r')
    used = math.fsum(p * min(d, r) for d, p in zip(dist.support, dist.probabilities))
    overflow = math.fsum(p * max(d - r, 0) for d, p in zip(dist.support, dist.probabilities))
    return (r * prices.upfront_per_interval
            + prices.usage_per_interval * used
            + prices.on_demand_per_interval * overflow)


def cost_curve(dist, prices):
    """Expected cost for every r in [0, max support]"""
    upto = dist.max_demand
    tails = dist.tail_probabilities(upto)
    # E[min(D, r)] = sum_{k < r} P(D > k)
    expected_used = np.concatenate(([0.0], np.cumsum(tails[:upto])))
    expected_overflow = dist.mean() - expected_used
    rs = np.arange(upto + 1)
    costs = (rs * prices.upfront_per_interval
             + prices.usage_per_interval * expected_used
             + prices.on_demand_per_interval * np.maximum(expected_overflow, 0.0))
    return SingleTypeCostCurve(tuple(int(r) for r in rs), tuple(float(c) for c in costs))


def optimal_reservation_single(dist, prices):
    """
    Optimal number of reserved VMs for a single type

    How it works:
    1. The marginal cost of the (r+1)-th reserved VM is
       delta(r) = p_upfront + (p_usage - p_od) * P(D >= r + 1)
    2. delta is nondecreasing in r, so the smallest r with delta(r) >= 0
       is the smallest minimizer of the expected cost
    3. When on-demand is no dearer than reserved usage, r* = 0

    Args:
        dist (DemandDistribution): Demand in VM units
        prices (UnitPrices): Normalized prices of the type

    Returns:
        ReservationOptimum: r_star plus the window bounds (max(r*-1, 0), r*)
    """
    if prices.on_demand_per_interval <= prices.usage_per_interval:
        return ReservationOptimum(0, 0, 0)

    tails = dist.tail_probabilities(dist.max_demand)
    deltas = prices.upfront_per_interval + (prices.usage_per_interval - prices.on_demand_per_interval) * tails
    # delta(max support) = p_upfront >= 0, so a solution always exists
    r_star = int(np.argmax(deltas >= 0))
    return ReservationOptimum(r_star, max(r_star - 1, 0), r_star)


def solve_covering_ilp(catalog, reserved_demand):
    """
    Cheapest set of reserved VMs whose capacity covers the reserved demand

    Minimizes sum(n_i * upfront_i) subject to sum(n_i * C_i) >= reserved_demand.

    Args:
        catalog (Catalog): VM types and prices
        reserved_demand (int): Capacity to reserve (demand units)

    Returns:
        dict: {type id: n_i} for every type, in id order
    """
    if reserved_demand < 0:
        raise ValidationError("must be nonnegative", field='reserved_demand')
    if len(catalog) == 0 and reserved_demand > 0:
        raise ValidationError("catalog has no VM types", field='vm_types')

    types = catalog.vm_types
    solution = solve_cover(
        [vm.capacity for vm in types],
        [catalog.prices_of(vm.id).upfront_total for vm in types],
        reserved_demand,
    )
    return {vm.id: n for vm, n in zip(types, solution.counts)}


def on_demand_cover_cost(catalog, deficit):
    """Cheapest on-demand cost per quantum (micro-units) to cover a deficit"""
    if deficit <= 0:
        return 0
    types = catalog.vm_types
    solution = solve_cover(
        [vm.capacity for vm in types],
        [catalog.prices_of(vm.id).on_demand for vm in types],
        deficit,
    )
    return solution.cost


@dataclass
class _PlanEvaluator:
    """Expected per-interval cost of a mixed reservation against raw demand"""
    raw_dist: object
    catalog: object
    rates: object
    _od_cache: dict = field(default_factory=dict)

    def on_demand_per_interval(self, overflow):
        if overflow not in self._od_cache:
            micros = on_demand_cover_cost(self.catalog, overflow)
            self._od_cache[overflow] = from_micros(micros) / self.catalog.book.billing_quantum
        return self._od_cache[overflow]

    def cost(self, quantities):
        # Reserved instances launch cheapest usage-per-capacity first
        instances = []
        upfront = 0.0
        for vm in self.catalog.vm_types:
            n = quantities.get(vm.id, 0)
            unit = self.rates[vm.id]
            upfront += n * unit.upfront_per_interval
            instances.extend([(unit.usage_per_interval / vm.capacity, vm.id, vm.capacity,
                               unit.usage_per_interval)] * n)
        instances.sort()
        caps = np.cumsum([inst[2] for inst in instances]) if instances else np.zeros(0)
        usages = np.cumsum([inst[3] for inst in instances]) if instances else np.zeros(0)
        reserved_capacity = int(caps[-1]) if len(caps) else 0
        all_usage = float(usages[-1]) if len(usages) else 0.0

        terms = []
        for level, prob in zip(self.raw_dist.support, self.raw_dist.probabilities):
            if level <= 0:
                continue
            if level <= reserved_capacity:
                launched = int(np.searchsorted(caps, level, side='left'))
                terms.append(prob * float(usages[launched]))
            else:
                overflow = level - reserved_capacity
                terms.append(prob * (all_usage + self.on_demand_per_interval(overflow)))
        return upfront + math.fsum(terms)


def plan_reservation(raw_dist, catalog, prices=None):
    """
    Phase-1 reservation plan over all VM types

    How it works:
    1. Picks the best-CP type as the reference
    2. Converts raw demand to that type's VM units
    3. Computes r* for the reference type
    4. Every reserved demand c in {0} and [(r*-1)*C, r*.C] goes through the
       covering ILP; each resulting mixed reservation is priced in full
       (upfront + expected usage + expected on-demand overflow) against raw demand
    5. Returns the cheapest (ties: smaller capacity, then smaller quantity vector)

    Args:
        raw_dist (DemandDistribution): Demand in raw units
        catalog (Catalog): VM types and prices
        prices (NormalizedPrices | None): Defaults to normalize(catalog.book)

    Returns:
        ReservationPlan
    """
    if len(catalog) == 0:
        raise ValidationError("catalog has no VM types", field='vm_types')
    rates = prices if prices is not None else normalize(catalog.book)

    # Step 1-3: reference type and single-type optimum
    reference = best_cp_type(catalog)
    vm_dist = distribution_to_vm_units(raw_dist, reference.capacity)
    optimum = optimal_reservation_single(vm_dist, rates[reference.id])
    window = (optimum.lower * reference.capacity, optimum.upper * reference.capacity)
    logger.info("Reference type %s (capacity %d): r*=%d, reserved-demand window %s",
                reference.id, reference.capacity, optimum.r_star, window)

    # Step 4: price every candidate reserved demand
    evaluator = _PlanEvaluator(raw_dist, catalog, rates)
    candidates = sorted({0} | set(range(window[0], window[1] + 1)))
    seen = {}
    for reserved_demand in candidates:
        quantities = solve_covering_ilp(catalog, reserved_demand)
        key = tuple(quantities[vm.id] for vm in catalog.vm_types)
        if key not in seen:
            seen[key] = (evaluator.cost(quantities), quantities)

    # Step 5: cheapest plan, deterministic tiebreak
    def rank(item):
        key, (cost, quantities) = item
        capacity = sum(n * vm.capacity for n, vm in zip(key, catalog.vm_types))
        return (cost, capacity, key)

    _, (best_cost, best_quantities) = min(seen.items(), key=rank)
    plan = make_plan(catalog, best_quantities, best_cost,
                     r_star=optimum.r_star, window=window, reference_type=reference.id)
    logger.info("Reservation plan %s, capacity %d, expected cost %.6f per interval",
                dict(plan.quantities), plan.reserved_capacity, best_cost)
    return plan


def all_on_demand_cost(raw_dist, catalog, prices=None):
    """Expected per-interval cost of reserving nothing"""
    rates = prices if prices is not None else normalize(catalog.book)
    return _PlanEvaluator(raw_dist, catalog, rates).cost({})


def plan_cost(raw_dist, catalog, plan, prices=None):
    """Expected per-interval cost of an arbitrary plan against raw demand"""
    rates = prices if prices is not None else normalize(catalog.book)
    return _PlanEvaluator(raw_dist, catalog, rates).cost(dict(plan.quantities))


def long_term_cost(plan):
    """Expected cost over one full lease period"""
    return plan.expected_cost_per_interval * plan.lease_period
