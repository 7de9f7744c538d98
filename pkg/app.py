"""
VM Subscription Planner - Dashboard
Trace analysis, phase-1 reservation plan, SPA simulation and policy comparison
"""
import json
import tempfile
from decimal import Decimal
from pathlib import Path

import pandas as pd
import streamlit as st

from catalog import best_cp_type, build_catalog, load_catalog, normalize
from config import get_settings
from demand import (REDUCERS, aggregate, build_distribution, ccdf, distribution_to_vm_units,
                    load_trace, trace_statistics)
from errors import PlannerError
from manifest import dump_json
from reservation import all_on_demand_cost, cost_curve, long_term_cost, plan_reservation
from simulator import POLICY_NAMES, build_sim_config, comparison_table, run_policies, run_simulation

SAMPLE_DIR = Path(__file__).parent / 'sample_data'

# Page configuration
st.set_page_config(
    page_title="VM Subscription Planner",
    page_icon="☁️",
    layout="wide"
)


def _settings():
    # st.secrets raises when no secrets file exists; get_settings falls back to .env
    try:
        secrets = st.secrets
    except Exception:
        secrets = None
    return get_settings(secrets)


SETTINGS = _settings()


def read_catalog(uploaded):
    """
    Load the uploaded catalog, or the bundled sample

    Returns:
        dict: {'success': bool, 'catalog': Catalog, 'message': str}
    """
    try:
        if uploaded is None:
            catalog = load_catalog(SAMPLE_DIR / 'catalog.json')
            return {'success': True, 'catalog': catalog, 'message': "Using sample catalog"}
        data = json.loads(uploaded.getvalue().decode('utf-8'), parse_float=Decimal)
        return {'success': True, 'catalog': build_catalog(data), 'message': f"Loaded {uploaded.name}"}
    except (PlannerError, ValueError) as e:
        return {'success': False, 'message': f"Catalog error: {e}"}


def read_trace(uploaded, interval_seconds):
    """
    Load the uploaded trace CSV, or the bundled sample

    Returns:
        dict: {'success': bool, 'trace': DemandTrace, 'message': str}
    """
    try:
        if uploaded is None:
            trace = load_trace(SAMPLE_DIR / 'trace.csv', interval_seconds)
            return {'success': True, 'trace': trace, 'message': "Using sample trace"}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trace.csv'
            path.write_bytes(uploaded.getvalue())
            trace = load_trace(path, interval_seconds)
        return {'success': True, 'trace': trace, 'message': f"Loaded {uploaded.name}"}
    except PlannerError as e:
        return {'success': False, 'message': f"Trace error: {e}"}


def sim_config(catalog, policy, params):
    return build_sim_config(
        catalog=catalog,
        policy=policy,
        launch_latency=params['launch_latency'],
        min_rental=params['min_rental'],
        kf_q=params['kf_q'],
        kf_r=params['kf_r'],
        headroom=params['headroom'],
        seed=params['seed'],
    )


def main():
    st.title("☁️ VM Subscription Planner")

    # Sidebar navigation and inputs
    with st.sidebar:
        st.header("Navigation")
        page = st.radio("Go to", ["Trace Analysis", "Reservation Plan", "Simulation", "Policy Comparison"])

        st.divider()
        st.header("Inputs")
        catalog_file = st.file_uploader("Catalog (JSON)", type=['json'])
        trace_file = st.file_uploader("Demand trace (CSV)", type=['csv'])
        interval_seconds = st.number_input("Interval length (s)", min_value=1,
                                           value=SETTINGS['interval_seconds'])

        with st.expander("⚙️ Simulation settings"):
            params = {
                'launch_latency': st.number_input("Launch latency (intervals)", min_value=0,
                                                  value=SETTINGS['launch_latency']),
                'min_rental': st.number_input("Minimum rental (0 = one quantum)", min_value=0,
                                              value=SETTINGS['min_rental'] or 0) or None,
                'headroom': st.number_input("Headroom", min_value=1.0, value=SETTINGS['headroom'], step=0.05),
                'kf_q': st.number_input("Kalman q (0 = from trace)", min_value=0.0,
                                        value=SETTINGS['kf_q'] or 0.0) or None,
                'kf_r': st.number_input("Kalman r (0 = from trace)", min_value=0.0,
                                        value=SETTINGS['kf_r'] or 0.0) or None,
                'seed': SETTINGS['seed'],
            }

    catalog_result = read_catalog(catalog_file)
    trace_result = read_trace(trace_file, int(interval_seconds))
    for result in (catalog_result, trace_result):
        if result['success']:
            st.caption(result['message'])
        else:
            st.error(result['message'])
    if not (catalog_result['success'] and trace_result['success']):
        return

    catalog = catalog_result['catalog']
    trace = trace_result['trace']

    # Route to pages
    if page == "Trace Analysis":
        show_trace_analysis(catalog, trace)
    elif page == "Reservation Plan":
        show_reservation_plan(catalog, trace)
    elif page == "Simulation":
        show_simulation(catalog, trace, params)
    elif page == "Policy Comparison":
        show_policy_comparison(catalog, trace, params)


def show_trace_analysis(catalog, trace):
    st.header("📈 Trace Analysis")

    stats = trace_statistics(trace)
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Intervals", f"{stats['intervals']:,}")
    with col2:
        st.metric("Mean demand", f"{stats['mean']:.2f}")
    with col3:
        st.metric("Peak demand", stats['max'])
    with col4:
        st.metric("Peak / mean", stats['peak_to_mean'] or "-")

    st.subheader("Demand over time")
    st.line_chart(pd.DataFrame({'demand': trace.samples}))

    col1, col2 = st.columns(2)
    with col1:
        window = st.selectbox("Aggregate by", ["none", "daily", "weekly", "monthly"])
    with col2:
        reducer = st.selectbox("Reducer", REDUCERS)
    if window != "none":
        try:
            reduced = aggregate(trace, window, reducer)
            st.bar_chart(pd.DataFrame({f'{reducer} demand': reduced.samples}))
        except PlannerError as e:
            st.warning(str(e))

    st.subheader("Empirical distribution")
    dist = build_distribution(trace)
    st.bar_chart(pd.DataFrame({'probability': dist.probabilities}, index=list(dist.support)))
    levels = range(dist.max_demand + 1)
    st.caption("P(demand > r)")
    st.line_chart(pd.DataFrame({'ccdf': [ccdf(dist, r) for r in levels]}, index=list(levels)))

    reference = best_cp_type(catalog)
    vm_dist = distribution_to_vm_units(dist, reference.capacity)
    curve = cost_curve(vm_dist, normalize(catalog.book)[reference.id])
    st.subheader(f"Expected cost per interval vs reserved {reference.id} VMs")
    st.line_chart(pd.DataFrame({'expected cost': curve.cost}, index=list(curve.r)))

    with st.expander("📋 Statistics"):
        st.json(stats)


def show_reservation_plan(catalog, trace):
    st.header("📝 Reservation Plan")

    with st.spinner("Solving the reservation plan..."):
        dist = build_distribution(trace)
        plan = plan_reservation(dist, catalog)
        on_demand_only = all_on_demand_cost(dist, catalog)

    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Reference type", plan.reference_type)
    with col2:
        st.metric("r*", plan.r_star)
    with col3:
        st.metric("Reserved capacity", plan.reserved_capacity)
    with col4:
        saving = on_demand_only - plan.expected_cost_per_interval
        st.metric("Expected cost / interval", f"{plan.expected_cost_per_interval:.4f}",
                  delta=f"{-saving:.4f} vs all on-demand", delta_color="inverse")

    st.subheader("Quantities")
    st.dataframe(pd.DataFrame(
        [{'vm_type': type_id, 'instances': n, 'capacity': n * catalog.get(type_id).capacity}
         for type_id, n in plan.quantities]
    ), use_container_width=True)
    st.write(f"**Reserved-demand window:** {plan.window[0]} to {plan.window[1]}  |  "
             f"**Cost over one lease:** {long_term_cost(plan):.2f}")

    st.download_button(
        "📥 Download plan (JSON)",
        dump_json(plan.to_dict()),
        file_name="plan.json",
    )


def show_simulation(catalog, trace, params):
    st.header("🖥️ Simulation")

    policy = st.selectbox("Policy", POLICY_NAMES)
    if st.button("🚀 Run simulation", type="primary"):
        try:
            with st.spinner(f"Replaying {len(trace):,} intervals..."):
                report = run_simulation(sim_config(catalog, policy, params), trace)
        except PlannerError as e:
            st.error(f"Simulation failed: {e}")
            return

        totals = report.totals()
        col1, col2, col3, col4 = st.columns(4)
        with col1:
            st.metric("Total cost", f"{totals['total']:.2f}")
        with col2:
            st.metric("Cost / interval", f"{report.mean_cost_per_interval():.4f}")
        with col3:
            st.metric("On-demand share", f"{totals['on_demand'] / totals['total']:.1%}" if totals['total'] else "-")
        with col4:
            st.metric("Unserved demand", report.unserved)

        st.subheader("Demand, prediction and capacity")
        st.line_chart(report.frame[['r_m', 'r_p', 'capacity']])

        st.subheader("Running VMs by tier")
        st.area_chart(report.frame[['reserved_running', 'on_demand_running']])

        with st.expander("🎯 Prediction accuracy"):
            st.json(report.accuracy)

        with st.expander("📋 Per-interval table"):
            st.dataframe(report.interval_frame(), use_container_width=True)

        col1, col2 = st.columns(2)
        with col1:
            st.download_button(
                "📥 Download report (JSON)",
                dump_json(report.to_dict()),
                file_name=f"report_{policy}.json",
            )
        with col2:
            st.download_button(
                "📥 Download intervals (CSV)",
                report.interval_frame().to_csv(index=False, lineterminator='\n'),
                file_name=f"intervals_{policy}.csv",
            )


def show_policy_comparison(catalog, trace, params):
    st.header("⚖️ Policy Comparison")

    policies = st.multiselect("Policies", POLICY_NAMES, default=list(POLICY_NAMES))
    if not policies:
        st.info("Select at least one policy")
        return

    if st.button("🚀 Compare", type="primary"):
        try:
            with st.spinner(f"Running {len(policies)} policies..."):
                reports = run_policies(sim_config(catalog, policies[0], params), trace, policies,
                                       max_workers=len(policies))
        except PlannerError as e:
            st.error(f"Comparison failed: {e}")
            return

        table = comparison_table(reports)
        st.dataframe(table, use_container_width=True)

        st.subheader("Cost breakdown")
        st.bar_chart(table.set_index('policy')[['upfront', 'usage', 'on_demand']])

        st.subheader("Mean running VMs")
        st.bar_chart(table.set_index('policy')[['reserved_vms_mean', 'on_demand_vms_mean']])

        st.download_button(
            "📥 Download comparison (CSV)",
            table.to_csv(index=False, lineterminator='\n'),
            file_name="comparison.csv",
        )


if __name__ == "__main__":
    main()
