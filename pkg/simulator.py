"""
Simulator Module - Trace Replay and Cost Accounting
Replays a demand trace through a forecaster and the SPA, bills every
interval (upfront, reserved usage, on-demand quanta), tracks unserved
demand and compares planning policies
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from catalog import Catalog, from_micros
from demand import build_distribution
from errors import ValidationError
from predictor import (KalmanForecaster, OracleForecaster, ReactiveForecaster,
                       default_noise, prediction_accuracy)
from reservation import empty_plan, make_plan, plan_reservation, solve_covering_ilp
from spa import Tier, VmPool, capacity_of, spa_step

logger = logging.getLogger(__name__)

INTERVAL_COLUMNS = ['interval', 'r_m', 'r_p', 'r_c', 'r_r', 'scenario',
                    'cost_upfront', 'cost_usage', 'cost_od', 'unserved']


class Policy(str, Enum):
    TWO_PHASE = 'two_phase'
    REACTIVE = 'reactive'
    ALL_ON_DEMAND = 'all_on_demand'
    FULL_RESERVATION = 'full_reservation'
    ORACLE = 'oracle'


POLICY_NAMES = tuple(p.value for p in Policy)


class SimConfig(BaseModel):
    """
    Everything a simulation run depends on

    plan is the phase-1 ReservationPlan; when None it is computed from the
    trace. The baselines (all_on_demand, full_reservation) bring their own
    reservation and use the one-step oracle forecast.
    """
    model_config = ConfigDict(frozen=True)

    catalog: Catalog
    plan: Any = None
    policy: Policy = Policy.TWO_PHASE
    launch_latency: int = Field(default=1, ge=0)
    min_rental: Optional[int] = Field(default=None, ge=1)
    kf_q: Optional[float] = Field(default=None, gt=0)
    kf_r: Optional[float] = Field(default=None, gt=0)
    headroom: float = Field(default=1.0, ge=1.0)
    seed: int = 0

    def describe(self):
        """Resolved parameters for the run manifest"""
        return {
            'policy': self.policy.value,
            'launch_latency': self.launch_latency,
            'min_rental': self.min_rental if self.min_rental is not None else self.catalog.book.billing_quantum,
            'kf_q': self.kf_q,
            'kf_r': self.kf_r,
            'headroom': self.headroom,
            'seed': self.seed,
            'billing_quantum': self.catalog.book.billing_quantum,
            'lease_period': self.catalog.book.lease_period,
        }


def build_sim_config(**fields):
    """
    SimConfig from keyword settings

    Raises:
        ValidationError: naming the first out-of-range setting (e.g. headroom)
    """
    try:
        return SimConfig(**fields)
    except PydanticValidationError as e:
        first = e.errors()[0]
        path = '.'.join(str(part) for part in first['loc']) or 'config'
        raise ValidationError(first['msg'], field=path) from e


@dataclass
class CostLedger:
    """Running cost totals in integer micro-units, plus one row per interval"""
    upfront_amortized: int = 0
    reserved_usage: int = 0
    on_demand_charges: int = 0
    unserved_demand_interval_sum: int = 0
    rows: list = field(default_factory=list)

    @property
    def total(self):
        return self.upfront_amortized + self.reserved_usage + self.on_demand_charges


def amortized_upfront(total_micros, lease_period, interval):
    """Share of an upfront fee charged at one interval; a full lease sums to total_micros exactly"""
    k = interval % lease_period
    return total_micros * (k + 1) // lease_period - total_micros * k // lease_period


def account_interval(pool, ledger, interval):
    """
    Bill one interval

    How it works:
    1. Upfront: every contracted instance pays its amortized share, launched or not
    2. Reserved usage: each running reserved instance pays its per-interval charge
    3. On-demand: a running on-demand instance pays a full quantum price each
       time it enters a new billing quantum

    Args:
        pool (VmPool): Pool already advanced to this interval
        ledger (CostLedger): Updated in place
        interval (int): Interval index

    Returns:
        CostLedger: the same ledger, for chaining
    """
    catalog = pool.catalog
    book = catalog.book

    upfront = 0
    for type_id, n in pool.contract.quantities:
        if n:
            upfront += amortized_upfront(n * catalog.prices_of(type_id).upfront_total,
                                         book.lease_period, interval)

    usage = 0
    on_demand = 0
    for vm in pool.running():
        prices = catalog.prices_of(vm.vm_type.id)
        if vm.tier == Tier.RESERVED:
            usage += prices.reserved_usage
        elif vm.intervals_run % pool.billing_quantum == 0:
            on_demand += prices.on_demand

    ledger.upfront_amortized += upfront
    ledger.reserved_usage += usage
    ledger.on_demand_charges += on_demand
    ledger.rows.append({'interval': interval, 'cost_upfront': upfront,
                        'cost_usage': usage, 'cost_od': on_demand})
    return ledger


@dataclass
class SimulationReport:
    policy: str
    plan: Any
    ledger: CostLedger
    intervals: int
    frame: pd.DataFrame
    decisions: list
    accuracy: dict
    manifest: dict = None

    @property
    def unserved(self):
        return self.ledger.unserved_demand_interval_sum

    def mean_cost_per_interval(self):
        return from_micros(self.ledger.total) / self.intervals if self.intervals else 0.0

    def totals(self):
        return {
            'upfront': from_micros(self.ledger.upfront_amortized),
            'usage': from_micros(self.ledger.reserved_usage),
            'on_demand': from_micros(self.ledger.on_demand_charges),
            'total': from_micros(self.ledger.total),
        }

    def vm_utilization(self):
        rows = []
        for tier in (Tier.RESERVED, Tier.ON_DEMAND):
            counts = self.frame[f'{tier.value}_running'].to_numpy()
            rows.append({
                'tier': tier.value,
                'mean_running': round(float(counts.mean()), 6) if len(counts) else 0.0,
                'p95_running': round(float(np.percentile(counts, 95)), 6) if len(counts) else 0.0,
                'max_running': int(counts.max()) if len(counts) else 0,
            })
        capacity = self.frame['capacity'].to_numpy()
        served = np.minimum(self.frame['r_m'].to_numpy(), capacity)
        rows.append({
            'tier': 'all',
            'capacity_utilization': round(float(served.sum() / capacity.sum()), 6) if capacity.sum() else None,
        })
        return rows

    def to_dict(self):
        report = {
            'policy': self.policy,
            'totals': self.totals(),
            'totals_micros': {
                'upfront': self.ledger.upfront_amortized,
                'usage': self.ledger.reserved_usage,
                'on_demand': self.ledger.on_demand_charges,
                'total': self.ledger.total,
            },
            'mean_cost_per_interval': round(self.mean_cost_per_interval(), 9),
            'unserved': self.unserved,
            'intervals': self.intervals,
            'vm_utilization': self.vm_utilization(),
            'prediction_accuracy': self.accuracy,
            'reservation': self.plan.to_dict(),
        }
        if self.manifest is not None:
            report['manifest'] = self.manifest
        return report

    def interval_frame(self):
        """Per-interval table for plotting (money columns as decimal strings)"""
        frame = self.frame[INTERVAL_COLUMNS].copy()
        for column in ('cost_upfront', 'cost_usage', 'cost_od'):
            frame[column] = frame[column].map(lambda micros: f"{from_micros(micros):.6f}")
        return frame


def _reservation_for(config, trace):
    catalog = config.catalog
    if config.policy == Policy.ALL_ON_DEMAND:
        return empty_plan(catalog)
    if config.policy == Policy.FULL_RESERVATION:
        return make_plan(catalog, solve_covering_ilp(catalog, max(trace.samples)))
    if config.plan is not None:
        return config.plan
    return plan_reservation(build_distribution(trace), catalog)


def _forecaster_for(config, trace):
    if config.policy == Policy.TWO_PHASE:
        q, r_noise = default_noise(trace.samples)
        return KalmanForecaster(config.kf_q or q, config.kf_r or r_noise, config.headroom)
    if config.policy == Policy.REACTIVE:
        return ReactiveForecaster()
    return OracleForecaster(trace.samples)


def run_simulation(config, trace):
    """
    Replay a trace through one policy

    How it works:
    1. Chooses the reservation (phase-1 plan, empty, or peak) and the forecaster
    2. Provisions the pool before the first interval (oracle forecasts the
       first demand; other forecasters start with the whole contract launched)
    3. Per interval t: promote VMs whose launch latency elapsed, forecast r_p for
       t+1, run spa_step, measure unserved demand on running capacity, bill

    Args:
        config (SimConfig): Policy and parameters
        trace (DemandTrace): Raw demand per interval

    Returns:
        SimulationReport
    """
    if len(trace) == 0:
        raise ValidationError("trace is empty", field='samples')

    catalog = config.catalog
    plan = _reservation_for(config, trace)
    forecaster = _forecaster_for(config, trace)
    pool = VmPool(catalog, plan, config.launch_latency, config.min_rental)
    ledger = CostLedger()
    samples = trace.samples

    # Step 1: initial provisioning, ready at interval 0
    if isinstance(forecaster, OracleForecaster):
        initial = samples[0]
    else:
        initial = pool.reserved_capacity
    warmup_at = -max(config.launch_latency, 1)
    decisions = [spa_step(pool, 0, initial, catalog, warmup_at).to_log(warmup_at)]

    rows = []
    predictions = []
    for t, demand in enumerate(samples):
        # Step 2: VMs whose latency elapsed start serving
        pool.begin_interval(t)

        # Step 3: forecast and plan
        r_p = forecaster.forecast(t, demand)
        predictions.append(r_p)
        decision = spa_step(pool, demand, r_p, catalog, t)
        decisions.append(decision.to_log(t))

        # Step 4: serve and bill this interval
        capacity = capacity_of(pool)
        shortfall = max(0, demand - capacity)
        ledger.unserved_demand_interval_sum += shortfall
        account_interval(pool, ledger, t)
        running = pool.running()
        row = dict(ledger.rows[-1])
        row.update({
            'r_m': demand,
            'r_p': r_p,
            'r_c': decision.r_c,
            'r_r': decision.r_r,
            'scenario': decision.scenario.value,
            'unserved': shortfall,
            'capacity': capacity,
            'reserved_running': sum(1 for vm in running if vm.tier == Tier.RESERVED),
            'on_demand_running': sum(1 for vm in running if vm.tier == Tier.ON_DEMAND),
        })
        rows.append(row)
        pool.end_interval(t)

    report = SimulationReport(
        policy=config.policy.value,
        plan=plan,
        ledger=ledger,
        intervals=len(samples),
        frame=pd.DataFrame(rows),
        decisions=decisions,
        accuracy=prediction_accuracy(samples[1:], predictions[:-1]),
    )
    logger.info("%s: total %.6f over %d intervals, unserved %d",
                report.policy, report.totals()['total'], report.intervals, report.unserved)
    return report


def run_policies(config, trace, policies, max_workers=1):
    """
    Run several policies on the same trace

    The phase-1 plan is computed once and shared. Runs are independent,
    so they may execute on a thread pool; results come back keyed and
    ordered by policy name.

    Returns:
        dict: {policy name: SimulationReport}
    """
    names = sorted({Policy(p).value for p in policies})
    if not names:
        raise ValidationError("no policies given", field='policies')
    if config.plan is None and any(n in (Policy.TWO_PHASE.value, Policy.REACTIVE.value, Policy.ORACLE.value)
                                   for n in names):
        config = config.model_copy(update={'plan': plan_reservation(build_distribution(trace), config.catalog)})

    configs = [config.model_copy(update={'policy': Policy(name)}) for name in names]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            reports = list(executor.map(lambda c: run_simulation(c, trace), configs))
    else:
        reports = [run_simulation(c, trace) for c in configs]
    return dict(zip(names, reports))


def comparison_table(reports):
    """One row per policy, ordered by policy name"""
    rows = []
    for name in sorted(reports):
        report = reports[name]
        frame = report.frame
        totals = report.totals()
        rows.append({
            'policy': name,
            'total': totals['total'],
            'upfront': totals['upfront'],
            'usage': totals['usage'],
            'on_demand': totals['on_demand'],
            'mean_cost_per_interval': round(report.mean_cost_per_interval(), 9),
            'unserved': report.unserved,
            'reserved_vms_mean': round(float(frame['reserved_running'].mean()), 6),
            'reserved_vms_p95': round(float(np.percentile(frame['reserved_running'], 95)), 6),
            'on_demand_vms_mean': round(float(frame['on_demand_running'].mean()), 6),
            'on_demand_vms_p95': round(float(np.percentile(frame['on_demand_running'], 95)), 6),
        })
    return pd.DataFrame(rows)


def compare_policies(config, trace, policies, max_workers=1):
    """
    Cost and VM allocation comparison across policies

    Returns:
        pandas.DataFrame: one row per policy (see comparison_table)
    """
    return comparison_table(run_policies(config, trace, policies, max_workers))
