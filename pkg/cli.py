"""
CLI Module - Command-Line Front Door
Commands: plan-reserve, simulate, compare, analyze, synthesize
Exit codes: 0 success, 1 I/O error, 2 validation error
"""
import argparse
import json
import sys
from pathlib import Path

from catalog import best_cp_type, load_catalog, normalize
from config import get_settings, setup_logging
from demand import (REDUCERS, aggregate, build_distribution, distribution_to_vm_units,
                    load_trace, save_trace, synthesize_trace, trace_statistics)
from errors import InputFileError, ValidationError
from manifest import RunManifest, describe_inputs, dump_json, write_frame, write_text
from reservation import all_on_demand_cost, cost_curve, long_term_cost, plan_reservation
from simulator import POLICY_NAMES, build_sim_config, comparison_table, run_policies, run_simulation

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def _global_flags(settings):
    """Flags shared by every command (defaults come from .env / environment)"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--catalog', help='catalog JSON file')
    parent.add_argument('--trace', help='demand trace CSV (interval_index,demand)')
    parent.add_argument('--seed', type=int, default=settings['seed'])
    parent.add_argument('--interval-seconds', type=int, default=settings['interval_seconds'])
    parent.add_argument('--launch-latency', type=int, default=settings['launch_latency'])
    parent.add_argument('--min-rental', type=int, default=settings['min_rental'],
                        help='intervals (default: one billing quantum)')
    parent.add_argument('--kf-q', type=float, default=settings['kf_q'], help='Kalman process noise')
    parent.add_argument('--kf-r', type=float, default=settings['kf_r'], help='Kalman measurement noise')
    parent.add_argument('--headroom', type=float, default=settings['headroom'])
    parent.add_argument('--out', default=settings['out_dir'], help='directory for output files')
    parent.add_argument('--log-level', default=settings['log_level'])
    return parent


def build_parser(settings=None):
    settings = settings or get_settings()
    common = _global_flags(settings)
    parser = argparse.ArgumentParser(
        prog='planner',
        description='Reserved/on-demand VM subscription planner',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    plan = commands.add_parser('plan-reserve', parents=[common], help='phase-1 reservation plan')
    plan.add_argument('--window', help='aggregate first: daily, weekly, monthly or an interval count')
    plan.add_argument('--reducer', choices=REDUCERS, default='max')
    plan.set_defaults(handler=cmd_plan_reserve)

    simulate = commands.add_parser('simulate', parents=[common], help='replay the trace through one policy')
    simulate.add_argument('--policy', choices=POLICY_NAMES, default='two_phase')
    simulate.set_defaults(handler=cmd_simulate)

    compare = commands.add_parser('compare', parents=[common], help='compare policies on one trace')
    compare.add_argument('--policies', default=','.join(POLICY_NAMES),
                         help=f"comma-separated subset of {', '.join(POLICY_NAMES)}")
    compare.add_argument('--workers', type=int, default=1)
    compare.set_defaults(handler=cmd_compare)

    analyze = commands.add_parser('analyze', parents=[common], help='trace statistics and distribution')
    analyze.set_defaults(handler=cmd_analyze)

    synth = commands.add_parser('synthesize', parents=[common], help='draw an i.i.d. demand trace')
    synth.add_argument('--levels', required=True, help='demand levels, e.g. 9,15')
    synth.add_argument('--probs', required=True, help='probabilities, e.g. 0.9,0.1')
    synth.add_argument('--intervals', type=int, default=10000)
    synth.add_argument('--output', required=True, help='trace CSV to write')
    synth.set_defaults(handler=cmd_synthesize)
    return parser


def _require(args, name):
    value = getattr(args, name)
    if not value:
        raise ValidationError("this command needs --" + name.replace('_', '-'), field=name)
    return value


def _manifest(args, extra=None):
    config = {
        'interval_seconds': args.interval_seconds,
        'launch_latency': args.launch_latency,
        'min_rental': args.min_rental,
        'kf_q': args.kf_q,
        'kf_r': args.kf_r,
        'headroom': args.headroom,
    }
    config.update(extra or {})
    return RunManifest(
        command=args.command,
        config=config,
        inputs=describe_inputs(catalog=args.catalog, trace=args.trace),
        seed=args.seed,
    ).to_dict()


def _sim_config(args, catalog, policy):
    return build_sim_config(
        catalog=catalog,
        policy=policy,
        launch_latency=args.launch_latency,
        min_rental=args.min_rental,
        kf_q=args.kf_q,
        kf_r=args.kf_r,
        headroom=args.headroom,
        seed=args.seed,
    )


def _emit(args, filename, text):
    """Print to stdout and, with --out, also save under that directory"""
    sys.stdout.write(text)
    if args.out:
        write_text(Path(args.out) / filename, text)


def cmd_plan_reserve(args):
    """
    Phase-1 plan as JSON

    How it works:
    1. Loads catalog and trace (optionally aggregated by --window/--reducer)
    2. Builds the empirical demand distribution
    3. Runs plan_reservation and adds the all-on-demand comparison
    """
    catalog = load_catalog(_require(args, 'catalog'))
    trace = load_trace(_require(args, 'trace'), args.interval_seconds)
    if args.window:
        trace = aggregate(trace, args.window, args.reducer)

    dist = build_distribution(trace)
    plan = plan_reservation(dist, catalog)

    payload = plan.to_dict()
    payload['long_term_cost'] = round(long_term_cost(plan), 9)
    payload['all_on_demand_cost_per_interval'] = round(all_on_demand_cost(dist, catalog), 9)
    payload['manifest'] = _manifest(args, {'window': args.window, 'reducer': args.reducer})
    _emit(args, 'plan.json', dump_json(payload))
    return EXIT_OK


def cmd_simulate(args):
    catalog = load_catalog(_require(args, 'catalog'))
    trace = load_trace(_require(args, 'trace'), args.interval_seconds)
    config = _sim_config(args, catalog, args.policy)

    report = run_simulation(config, trace)
    report.manifest = _manifest(args, config.describe())

    _emit(args, 'report.json', dump_json(report.to_dict()))
    if args.out:
        out = Path(args.out)
        write_text(out / 'manifest.json', dump_json(report.manifest))
        write_frame(report.interval_frame(), out / 'intervals.csv')
        lines = ''.join(json.dumps(line, sort_keys=True) + '\n' for line in report.decisions)
        write_text(out / 'decisions.jsonl', lines)
    return EXIT_OK


def parse_policies(text):
    names = [name.strip() for name in (text or '').split(',') if name.strip()]
    if not names:
        raise ValidationError(f"give at least one policy ({', '.join(POLICY_NAMES)})", field='policies')
    unknown = [name for name in names if name not in POLICY_NAMES]
    if unknown:
        raise ValidationError(f"unknown policy {', '.join(unknown)}; valid: {', '.join(POLICY_NAMES)}",
                              field='policies')
    return names


def cmd_compare(args):
    policies = parse_policies(args.policies)
    catalog = load_catalog(_require(args, 'catalog'))
    trace = load_trace(_require(args, 'trace'), args.interval_seconds)
    config = _sim_config(args, catalog, policies[0])

    reports = run_policies(config, trace, policies, max_workers=args.workers)
    table = comparison_table(reports)
    manifest = _manifest(args, {**config.describe(), 'policies': sorted(reports)})

    _emit(args, 'comparison.csv', table.to_csv(index=False, lineterminator='\n'))
    # Human-readable copy goes to stderr so stdout stays valid CSV
    sys.stderr.write(table.to_string(index=False) + '\n')
    if args.out:
        out = Path(args.out)
        write_text(out / 'comparison.txt', table.to_string(index=False) + '\n')
        write_text(out / 'manifest.json', dump_json(manifest))
        for name, report in reports.items():
            report.manifest = manifest
            write_text(out / f'report_{name}.json', dump_json(report.to_dict()))
    return EXIT_OK


def cmd_analyze(args):
    trace = load_trace(_require(args, 'trace'), args.interval_seconds)
    dist = build_distribution(trace)
    payload = {
        'statistics': trace_statistics(trace),
        'distribution': [
            {'demand': level, 'probability': round(prob, 12)}
            for level, prob in zip(dist.support, dist.probabilities)
        ],
    }

    if args.catalog:
        catalog = load_catalog(args.catalog)
        reference = best_cp_type(catalog)
        vm_dist = distribution_to_vm_units(dist, reference.capacity)
        curve = cost_curve(vm_dist, normalize(catalog.book)[reference.id])
        payload['reference_type'] = reference.id
        payload['vm_unit_distribution'] = [
            {'vms': level, 'probability': round(prob, 12)}
            for level, prob in zip(vm_dist.support, vm_dist.probabilities)
        ]
        payload['cost_curve'] = [
            {'r': r, 'expected_cost': round(cost, 9)} for r, cost in zip(curve.r, curve.cost)
        ]

    payload['manifest'] = _manifest(args)
    _emit(args, 'analysis.json', dump_json(payload))
    return EXIT_OK


def _number_list(text, cast, name):
    try:
        return [cast(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got '{text}'", field=name) from None


def cmd_synthesize(args):
    levels = _number_list(args.levels, int, 'levels')
    probs = _number_list(args.probs, float, 'probs')
    if len(levels) != len(probs):
        raise ValidationError("levels and probs must have the same length", field='probs')
    trace = synthesize_trace(levels, probs, args.intervals, args.seed, args.interval_seconds)
    save_trace(trace, args.output)
    sys.stderr.write(f"Wrote {len(trace)} intervals to {args.output}\n")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except InputFileError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_IO
    except ValidationError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
