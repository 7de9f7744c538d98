"""
Covering Module - Exact Integer Covering Solver
Minimizes sum(n_i * cost_i) subject to sum(n_i * capacity_i) >= demand,
n_i nonnegative integers (optionally bounded). Shared by the reservation
ILP, the on-demand ILP and the reserved-pool reconfiguration ILP.
"""
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CoverSolution:
    counts: tuple
    cost: int
    capacity: int


def solve_cover(capacities, costs, demand, upper_bounds=None):
    """
    Depth-first branch-and-bound over n_i

    How it works:
    1. Items are explored in the given order, each count ascending from 0,
       so complete vectors are visited in lexicographic order
    2. n_i is bounded by ceil(demand / capacity_i) (and by upper_bounds[i])
    3. A branch is cut when its cost plus remaining demand times the
       cheapest remaining cost-per-capacity reaches the incumbent
    4. Only strictly cheaper vectors replace the incumbent, so among
       optima the lexicographically smallest one is returned

    Args:
        capacities (list[int]): Capacity per item, each >= 1
        costs (list[int]): Integer cost per item (micro-units), each >= 0
        demand (int): Capacity to cover
        upper_bounds (list[int] | None): Optional availability per item

    Returns:
        CoverSolution | None: None when demand cannot be covered
    """
    n = len(capacities)
    if demand <= 0:
        return CoverSolution(tuple([0] * n), 0, 0)
    if n == 0:
        return None

    bounds = []
    for i, cap in enumerate(capacities):
        bound = -(-demand // cap)
        if upper_bounds is not None:
            bound = min(bound, upper_bounds[i])
        bounds.append(max(bound, 0))

    # reach[i]: most capacity items i.. can still add
    # ratio[i]: cheapest cost per capacity among items i..
    reach = [0] * (n + 1)
    ratio = [math.inf] * (n + 1)
    for i in range(n - 1, -1, -1):
        reach[i] = reach[i + 1] + bounds[i] * capacities[i]
        ratio[i] = min(ratio[i + 1], costs[i] / capacities[i])

    if reach[0] < demand:
        return None

    best = {'cost': None, 'counts': None}
    counts = [0] * n

    def dfs(i, remaining, cost):
        if remaining <= 0:
            if best['cost'] is None or cost < best['cost']:
                best['cost'] = cost
                best['counts'] = tuple(counts[:i]) + (0,) * (n - i)
            return
        if i == n or remaining > reach[i]:
            return
        if best['cost'] is not None and cost + remaining * ratio[i] >= best['cost']:
            return

        cap, price = capacities[i], costs[i]
        if i == n - 1:
            # Last item: the smallest feasible count is also the cheapest
            k = -(-remaining // cap)
            if k <= bounds[i]:
                counts[i] = k
                dfs(n, remaining - k * cap, cost + k * price)
                counts[i] = 0
            return

        for k in range(bounds[i] + 1):
            added = cost + k * price
            if best['cost'] is not None and added >= best['cost']:
                break
            counts[i] = k
            dfs(i + 1, remaining - k * cap, added)
            if k * cap >= remaining:
                break
        counts[i] = 0

    dfs(0, demand, 0)
    if best['counts'] is None:
        return None
    total_capacity = sum(k * c for k, c in zip(best['counts'], capacities))
    return CoverSolution(best['counts'], best['cost'], total_capacity)
