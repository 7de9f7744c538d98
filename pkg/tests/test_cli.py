import io
import json

import pandas as pd
import pytest

from cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main, parse_policies
from demand import load_trace
from errors import ValidationError
from simulator import INTERVAL_COLUMNS


def _paths(input_files):
    catalog_path, trace_path = input_files
    return ['--catalog', str(catalog_path), '--trace', str(trace_path)]


def test_plan_reserve_prints_the_plan(input_files, capsys):
    assert main(['plan-reserve', *_paths(input_files)]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload['quantities'] == {'c3': 3}
    assert payload['r_star'] == 3
    assert payload['all_on_demand_cost_per_interval'] > payload['expected_cost_per_interval']
    assert set(payload['manifest']['inputs']) == {'catalog', 'trace'}
    assert len(payload['manifest']['inputs']['trace']['sha256']) == 64


def test_plan_reserve_writes_the_same_json(input_files, tmp_path, capsys):
    out = tmp_path / 'out'
    assert main(['plan-reserve', *_paths(input_files), '--out', str(out)]) == EXIT_OK
    assert (out / 'plan.json').read_text(encoding='utf-8') == capsys.readouterr().out


def test_plan_reserve_with_daily_window(input_files, capsys):
    assert main(['plan-reserve', *_paths(input_files), '--window', '24', '--reducer', 'max']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    # most 24-interval peaks hit 15, so r* moves to the upper level
    assert payload['quantities'] == {'c3': 5}
    assert payload['manifest']['config']['window'] == '24'


def test_missing_catalog_file_is_an_io_error(input_files, tmp_path, capsys):
    _, trace_path = input_files
    code = main(['plan-reserve', '--catalog', str(tmp_path / 'nope.json'), '--trace', str(trace_path)])
    assert code == EXIT_IO
    assert 'error' in capsys.readouterr().err


def test_malformed_catalog_is_a_validation_error(input_files, tmp_path):
    _, trace_path = input_files
    broken = tmp_path / 'broken.json'
    broken.write_text('{"vm_types": [', encoding='utf-8')
    assert main(['plan-reserve', '--catalog', str(broken), '--trace', str(trace_path)]) == EXIT_VALIDATION


def test_negative_demand_is_a_validation_error(input_files, tmp_path):
    catalog_path, _ = input_files
    trace = tmp_path / 'negative.csv'
    trace.write_text('interval_index,demand\n0,4\n1,-2\n', encoding='utf-8')
    assert main(['simulate', '--catalog', str(catalog_path), '--trace', str(trace)]) == EXIT_VALIDATION


def test_command_without_catalog_is_rejected(input_files, capsys):
    _, trace_path = input_files
    assert main(['simulate', '--trace', str(trace_path)]) == EXIT_VALIDATION
    assert '--catalog' in capsys.readouterr().err


def test_simulate_writes_report_and_interval_files(input_files, tmp_path, capsys):
    out = tmp_path / 'run'
    code = main(['simulate', *_paths(input_files), '--policy', 'oracle', '--out', str(out)])
    assert code == EXIT_OK

    report = json.loads(capsys.readouterr().out)
    assert report['policy'] == 'oracle'
    assert report['unserved'] == 0
    assert report['intervals'] == 500
    assert report['manifest']['config']['policy'] == 'oracle'

    header = (out / 'intervals.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header == ','.join(INTERVAL_COLUMNS)
    decisions = (out / 'decisions.jsonl').read_text(encoding='utf-8').splitlines()
    assert len(decisions) == 501
    assert json.loads(decisions[1])['interval'] == 0
    manifest = json.loads((out / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest == report['manifest']


@pytest.mark.parametrize('command, setting, value', [
    ('simulate', '--headroom', '0.5'),
    ('simulate', '--min-rental', '0'),
    ('compare', '--launch-latency', '-1'),
])
def test_out_of_range_setting_is_a_validation_error(input_files, capsys, command, setting, value):
    assert main([command, *_paths(input_files), setting, value]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert 'error' in err
    assert 'Traceback' not in err


def test_unknown_policy_is_refused_by_the_parser(input_files):
    with pytest.raises(SystemExit) as excinfo:
        main(['simulate', *_paths(input_files), '--policy', 'spot'])
    assert excinfo.value.code == 2


def test_reruns_are_byte_identical(input_files, tmp_path):
    for name in ('first', 'second'):
        assert main(['simulate', *_paths(input_files), '--out', str(tmp_path / name)]) == EXIT_OK
    for filename in ('report.json', 'manifest.json', 'intervals.csv', 'decisions.jsonl'):
        assert (tmp_path / 'first' / filename).read_bytes() == (tmp_path / 'second' / filename).read_bytes()


def test_compare_prints_csv(input_files, tmp_path, capsys):
    out = tmp_path / 'cmp'
    code = main(['compare', *_paths(input_files), '--policies', 'oracle,all_on_demand', '--out', str(out)])
    assert code == EXIT_OK

    table = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(table['policy']) == ['all_on_demand', 'oracle']
    assert table.set_index('policy').loc['oracle', 'unserved'] == 0
    assert table.set_index('policy').loc['oracle', 'total'] < table.set_index('policy').loc['all_on_demand', 'total']
    for filename in ('comparison.csv', 'comparison.txt', 'manifest.json',
                     'report_oracle.json', 'report_all_on_demand.json'):
        assert (out / filename).is_file()


def test_compare_with_no_policies_is_a_validation_error(input_files):
    assert main(['compare', *_paths(input_files), '--policies', '']) == EXIT_VALIDATION


def test_parse_policies():
    assert parse_policies(' oracle , reactive ') == ['oracle', 'reactive']
    with pytest.raises(ValidationError):
        parse_policies('oracle,spot')
    with pytest.raises(ValidationError):
        parse_policies(',')


def test_analyze(input_files, capsys):
    assert main(['analyze', *_paths(input_files)]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload['statistics']['intervals'] == 500
    assert [row['demand'] for row in payload['distribution']] == [9, 15]
    assert sum(row['probability'] for row in payload['distribution']) == pytest.approx(1.0)
    assert payload['reference_type'] == 'c3'
    assert [row['vms'] for row in payload['vm_unit_distribution']] == [3, 5]
    assert len(payload['cost_curve']) == 6


def test_analyze_without_catalog(input_files, capsys):
    _, trace_path = input_files
    assert main(['analyze', '--trace', str(trace_path)]) == EXIT_OK
    assert 'reference_type' not in json.loads(capsys.readouterr().out)


def test_synthesize_writes_a_loadable_trace(tmp_path):
    target = tmp_path / 'synthetic.csv'
    code = main(['synthesize', '--levels', '4,12', '--probs', '0.5,0.5', '--intervals', '200',
                 '--seed', '5', '--output', str(target)])
    assert code == EXIT_OK
    trace = load_trace(target)
    assert len(trace) == 200
    assert set(trace.samples) <= {4, 12}


def test_synthesize_rejects_mismatched_lists(tmp_path):
    code = main(['synthesize', '--levels', '4,12', '--probs', '1.0', '--output', str(tmp_path / 'x.csv')])
    assert code == EXIT_VALIDATION
