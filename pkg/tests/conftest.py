import json
from pathlib import Path

import numpy as np
import pytest

from catalog import build_catalog
from demand import save_trace, synthesize_trace


def catalog_dict(types, lease=100, quantum=1):
    """Catalog file contents; types are (id, capacity, upfront_total, usage, on_demand) tuples"""
    return {
        'billing_quantum_intervals': quantum,
        'lease_period_intervals': lease,
        'vm_types': [
            {
                'id': type_id,
                'capacity': capacity,
                'upfront_total': upfront,
                'reserved_usage_per_interval': usage,
                'on_demand_per_quantum': on_demand,
            }
            for type_id, capacity, upfront, usage, on_demand in types
        ],
    }


def make_catalog(types, lease=100, quantum=1):
    return build_catalog(catalog_dict(types, lease, quantum))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def two_level_catalog():
    """One cap-3 type: upfront 0.1, usage 0.1, on-demand 0.5 per interval"""
    return make_catalog([('c3', 3, 10, 0.1, 0.5)])


@pytest.fixture
def two_types_catalog():
    return make_catalog([
        ('a', 1, 8, 0.02, 0.2),
        ('b', 3, 20, 0.05, 0.5),
    ], lease=120, quantum=12)


@pytest.fixture
def two_level_trace():
    return synthesize_trace([9, 15], [0.9, 0.1], 10_000, seed=0)


@pytest.fixture
def input_files(tmp_path: Path):
    """Catalog and a 500-interval two-level trace on disk"""
    catalog_path = tmp_path / 'catalog.json'
    catalog_path.write_text(json.dumps(catalog_dict([('c3', 3, 10, 0.1, 0.5)])), encoding='utf-8')
    trace_path = tmp_path / 'trace.csv'
    save_trace(synthesize_trace([9, 15], [0.9, 0.1], 500, seed=3), trace_path)
    return catalog_path, trace_path
