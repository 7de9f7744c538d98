"""
SPA Module - Short-term Planning Algorithm
Keeps the pool of launched VMs (reserved and on-demand) and decides,
every interval, between on-demand subscription, reconfiguring the
reserved pool and shutting down spare VMs
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

from covering import solve_cover
from errors import PlannerError, ValidationError

logger = logging.getLogger(__name__)


class Tier(str, Enum):
    RESERVED = 'reserved'
    ON_DEMAND = 'on_demand'


class Status(str, Enum):
    LAUNCHING = 'launching'
    RUNNING = 'running'
    STOPPED = 'stopped'


class Scenario(str, Enum):
    ON_DEMAND = 'on_demand'
    ADJUST_RESERVED = 'adjust_reserved'
    SHUTDOWN = 'shutdown'
    NO_OP = 'no_op'


@dataclass
class VmInstance:
    """
    One launched VM

    ready_at is the first interval the instance serves demand.
    stop_after marks a pending shutdown: the instance still serves and
    is billed for that interval, then stops.
    """
    instance_id: str
    vm_type: object
    tier: Tier
    status: Status
    launched_at: int
    ready_at: int
    intervals_run: int = 0
    stop_after: int = None

    @property
    def capacity(self):
        return self.vm_type.capacity

    @property
    def active(self):
        """Launching or running, and not on its way out"""
        return self.status != Status.STOPPED and self.stop_after is None

    def intervals_run_in_current_quantum(self, quantum):
        """Position inside the current billing quantum, in [0, quantum)"""
        return self.intervals_run % quantum

    def remaining_in_quantum(self, quantum):
        """Intervals left in the current billing quantum once this interval is used"""
        return quantum - (self.intervals_run_in_current_quantum(quantum) + 1)


class VmPool:
    """
    Launched VMs plus the reservation contract they draw from

    I_r is the contract, I_c the launched instances and I_0 the active
    on-demand subset. Reserved instances active per type never exceed
    the contracted quantity.
    """

    def __init__(self, catalog, contract, launch_latency=1, min_rental=None):
        if launch_latency < 0:
            raise ValidationError("must be nonnegative", field='launch_latency')
        self.catalog = catalog
        self.contract = contract
        self.billing_quantum = catalog.book.billing_quantum
        self.launch_latency = launch_latency
        self.min_rental = self.billing_quantum if min_rental is None else min_rental
        if self.min_rental < 1:
            raise ValidationError("must be at least 1", field='min_rental')
        self.launched = []
        self._counter = 0

    # -- views -------------------------------------------------------------

    @property
    def reserved_capacity(self):
        """r_r: capacity of every VM in the reservation contract"""
        return self.contract.reserved_capacity

    def running(self):
        return [vm for vm in self.launched if vm.status == Status.RUNNING]

    def active(self):
        return [vm for vm in self.launched if vm.active]

    def on_demand_active(self):
        return [vm for vm in self.active() if vm.tier == Tier.ON_DEMAND]

    def planned_capacity(self):
        """r_c: capacity of launched VMs, counting those still launching"""
        return sum(vm.capacity for vm in self.active())

    def active_count(self, tier, type_id):
        return sum(1 for vm in self.active() if vm.tier == tier and vm.vm_type.id == type_id)

    def unlaunched_reserved(self):
        """{type id: contracted reserved instances not currently active}"""
        return {
            type_id: n - self.active_count(Tier.RESERVED, type_id)
            for type_id, n in self.contract.quantities
        }

    # -- changes -----------------------------------------------------------

    def launch(self, vm_type, tier, now):
        if tier == Tier.RESERVED and self.unlaunched_reserved().get(vm_type.id, 0) <= 0:
            raise PlannerError(f"reservation contract has no free {vm_type.id} instance")
        self._counter += 1
        prefix = 'r' if tier == Tier.RESERVED else 'od'
        ready_at = now + self.launch_latency
        instance = VmInstance(
            instance_id=f"{prefix}-{vm_type.id}-{self._counter:06d}",
            vm_type=vm_type,
            tier=tier,
            status=Status.RUNNING if ready_at <= now else Status.LAUNCHING,
            launched_at=now,
            ready_at=ready_at,
        )
        self.launched.append(instance)
        return instance

    def shutdown(self, instance_id, now):
        for vm in self.launched:
            if vm.instance_id == instance_id:
                vm.stop_after = now
                return vm
        raise KeyError(instance_id)

    def begin_interval(self, now):
        """Instances whose launch latency has elapsed start serving"""
        for vm in self.launched:
            if vm.status == Status.LAUNCHING and vm.ready_at <= now:
                vm.status = Status.RUNNING

    def end_interval(self, now):
        """Count the interval for running VMs and drop the ones shut down"""
        kept = []
        for vm in self.launched:
            if vm.status == Status.RUNNING:
                vm.intervals_run += 1
            if vm.stop_after is not None and vm.stop_after <= now:
                vm.status = Status.STOPPED
                continue
            kept.append(vm)
        self.launched = kept

    def check_invariants(self):
        """Raise PlannerError if the contract or capacity bounds are broken"""
        for type_id, left in self.unlaunched_reserved().items():
            if left < 0:
                raise PlannerError(f"{-left} {type_id} reserved instances beyond the contract")
        od_capacity = sum(vm.capacity for vm in self.launched
                          if vm.tier == Tier.ON_DEMAND and vm.status != Status.STOPPED)
        if capacity_of(self) > self.reserved_capacity + od_capacity:
            raise PlannerError("running capacity exceeds reserved plus on-demand capacity")


def capacity_of(pool):
    """Capacity of running VMs only (launching VMs serve nothing yet)"""
    return sum(vm.capacity for vm in pool.running())


@dataclass
class SpaDecision:
    scenario: Scenario
    r_m: int
    r_p: int
    r_c: int
    r_r: int
    launches: dict = field(default_factory=lambda: {Tier.RESERVED.value: {}, Tier.ON_DEMAND.value: {}})
    shutdowns: list = field(default_factory=list)
    resulting_capacity: int = 0
    min_rental_blocked: bool = False

    def to_log(self, interval):
        """Decision log line (one JSON object per interval)"""
        return {
            'interval': interval,
            'scenario': self.scenario.value,
            'r_m': self.r_m,
            'r_p': self.r_p,
            'r_c': self.r_c,
            'r_r': self.r_r,
            'launches': {tier: dict(sorted(counts.items())) for tier, counts in self.launches.items()},
            'shutdowns': list(self.shutdowns),
            'capacity_after': self.resulting_capacity,
        }


def ilp1_on_demand(deficit, catalog):
    """
    Cheapest on-demand VMs covering a capacity deficit

    Args:
        deficit (int): r_p - r_r, > 0
        catalog (Catalog): VM types and on-demand prices per quantum

    Returns:
        dict: {type id: count}
    """
    if deficit <= 0:
        raise ValidationError(f"deficit must be positive, got {deficit}", field='deficit')
    if len(catalog) == 0:
        raise ValidationError("catalog has no VM types", field='vm_types')
    types = catalog.vm_types
    solution = solve_cover(
        [vm.capacity for vm in types],
        [catalog.prices_of(vm.id).on_demand for vm in types],
        deficit,
    )
    return {vm.id: n for vm, n in zip(types, solution.counts) if n}


def ilp2_adjust_configuration(pool, r_p, catalog):
    """
    Reserved VMs to start so that launched capacity reaches r_p

    Chooses among the contract's unlaunched instances, minimizing the
    added reserved-usage cost per interval.

    Args:
        pool (VmPool): Current pool
        r_p (int): Predicted capacity-demand, r_c < r_p <= r_r
        catalog (Catalog): VM types and prices

    Returns:
        dict: {type id: count} of reserved instances to launch
    """
    r_c = pool.planned_capacity()
    if r_p > pool.reserved_capacity:
        raise ValidationError("predicted demand exceeds reserved capacity; subscribe on-demand instead",
                              field='r_p')
    if r_c >= r_p:
        raise ValidationError("launched capacity already covers the predicted demand", field='r_p')

    free = pool.unlaunched_reserved()
    types = [catalog.get(type_id) for type_id, left in sorted(free.items()) if left > 0]
    solution = solve_cover(
        [vm.capacity for vm in types],
        [catalog.prices_of(vm.id).reserved_usage for vm in types],
        r_p - r_c,
        upper_bounds=[free[vm.id] for vm in types],
    )
    if solution is None:
        raise PlannerError("reserved pool cannot cover the predicted demand")
    return {vm.id: n for vm, n in zip(types, solution.counts) if n}


def _shutdown_order(pool):
    tier_rank = {Tier.ON_DEMAND: 0, Tier.RESERVED: 1}

    def key(vm):
        return (vm.remaining_in_quantum(pool.billing_quantum), tier_rank[vm.tier], vm.instance_id)
    return key


def shutdown_spare_vms(pool, r_p, tiers=None):
    """
    Pick running VMs to shut down while capacity stays at or above r_p

    How it works:
    1. Candidates are running VMs that reach min_rental by the end of this interval
    2. Nearest billing-quantum boundary first, on-demand before reserved, then id
    3. A candidate is taken only if capacity without it is still >= r_p

    Args:
        pool (VmPool): Current pool
        r_p (int): Predicted capacity-demand
        tiers (set[Tier] | None): Restrict candidates to these tiers

    Returns:
        list: Instance ids to shut down
    """
    capacity = pool.planned_capacity()
    if capacity <= r_p:
        return []

    candidates = [
        vm for vm in pool.launched
        if vm.status == Status.RUNNING and vm.stop_after is None
        and vm.intervals_run + 1 >= pool.min_rental
        and (tiers is None or vm.tier in tiers)
    ]
    candidates.sort(key=_shutdown_order(pool))

    chosen = []
    for vm in candidates:
        if capacity - vm.capacity >= r_p:
            chosen.append(vm.instance_id)
            capacity -= vm.capacity
    return chosen


def _min_rental_blocked(pool, r_p):
    """True when a running VM under min_rental could otherwise have been removed"""
    spare = pool.planned_capacity() - r_p
    return any(
        vm.status == Status.RUNNING and vm.stop_after is None
        and vm.intervals_run + 1 < pool.min_rental and vm.capacity <= spare
        for vm in pool.launched
    )


def _launch_counts(pool, counts, tier, now, decision):
    for type_id, n in sorted(counts.items()):
        vm_type = pool.catalog.get(type_id)
        for _ in range(n):
            pool.launch(vm_type, tier, now)
        if n:
            bucket = decision.launches[tier.value]
            bucket[type_id] = bucket.get(type_id, 0) + n


def classify_scenario(r_r, r_c, r_p):
    """Branch of the SPA that fires for (r_r, r_c, r_p); tested in this order"""
    if r_r < r_p:
        return Scenario.ON_DEMAND
    if r_c < r_p:
        return Scenario.ADJUST_RESERVED
    if r_c > r_p:
        return Scenario.SHUTDOWN
    return Scenario.NO_OP


def spa_step(pool, r_m, r_p, catalog, now):
    """
    One round of the Short-term Planning Algorithm

    How it works:
    1. r_r < r_p: launch every reserved VM and subscribe on-demand VMs for
       r_p - r_r (ILP1); on-demand VMs already active are kept, surplus ones
       are released
    2. else r_c < r_p: start more reserved VMs (ILP2)
    3. else r_c > r_p: shut down spare VMs
    4. else: nothing to do
    The caller feeds r_m to the prediction model afterwards.

    Args:
        pool (VmPool): Pool, changed in place
        r_m (int): Measured demand this interval
        r_p (int): Predicted capacity-demand for the next interval
        catalog (Catalog): VM types and prices
        now (int): Current interval

    Returns:
        SpaDecision
    """
    r_r = pool.reserved_capacity
    r_c = pool.planned_capacity()
    decision = SpaDecision(classify_scenario(r_r, r_c, r_p), r_m, r_p, r_c, r_r)

    if decision.scenario == Scenario.ON_DEMAND:
        _launch_counts(pool, pool.unlaunched_reserved(), Tier.RESERVED, now, decision)

        target = ilp1_on_demand(r_p - r_r, catalog)
        missing = {
            type_id: max(0, n - pool.active_count(Tier.ON_DEMAND, type_id))
            for type_id, n in target.items()
        }
        _launch_counts(pool, missing, Tier.ON_DEMAND, now, decision)

        surplus = shutdown_spare_vms(pool, r_p, tiers={Tier.ON_DEMAND})
        for instance_id in surplus:
            pool.shutdown(instance_id, now)
        decision.shutdowns = surplus

    elif decision.scenario == Scenario.ADJUST_RESERVED:
        _launch_counts(pool, ilp2_adjust_configuration(pool, r_p, catalog), Tier.RESERVED, now, decision)

    elif decision.scenario == Scenario.SHUTDOWN:
        chosen = shutdown_spare_vms(pool, r_p)
        for instance_id in chosen:
            pool.shutdown(instance_id, now)
        decision.shutdowns = chosen
        decision.min_rental_blocked = _min_rental_blocked(pool, r_p)

    decision.resulting_capacity = pool.planned_capacity()
    logger.debug("t=%d %s r_m=%d r_p=%d r_c=%d r_r=%d -> %d",
                 now, decision.scenario.value, r_m, r_p, r_c, r_r, decision.resulting_capacity)
    return decision
