"""
Demand Module - Workload Analyzer
Reads demand traces, converts raw demand to VM units, aggregates
daily/weekly/monthly and builds the discrete demand distribution
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from errors import InputFileError, InputFormatError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL_SECONDS = 300

# Window lengths in seconds
WINDOWS = {
    'daily': 86400,
    'weekly': 7 * 86400,
    'monthly': 30 * 86400,
}

REDUCERS = ('max', 'mean', 'p95')


@dataclass(frozen=True)
class DemandTrace:
    """Measured demand per interval (nonnegative integers, demand units)"""
    interval_seconds: int
    samples: tuple

    def __post_init__(self):
        if self.interval_seconds < 1:
            raise ValidationError("must be at least 1 second", field='interval_seconds')
        if any(s < 0 for s in self.samples):
            raise ValidationError("demand must be nonnegative", field='demand')

    def __len__(self):
        return len(self.samples)

    def as_array(self):
        return np.asarray(self.samples, dtype=np.int64)


@dataclass(frozen=True)
class DemandDistribution:
    """
    Discrete demand random variable D

    support is strictly ascending, probabilities are positive and sum to 1.
    """
    support: tuple
    probabilities: tuple

    def __post_init__(self):
        if len(self.support) == 0 or len(self.support) != len(self.probabilities):
            raise ValidationError("support and probabilities must be nonempty and aligned",
                                  field='distribution')
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValidationError("support must be strictly ascending", field='support')
        if self.support[0] < 0:
            raise ValidationError("support must be nonnegative", field='support')
        if any(p <= 0 for p in self.probabilities):
            raise ValidationError("probabilities must be positive", field='probabilities')
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise ValidationError("probabilities must sum to 1", field='probabilities')

    @classmethod
    def from_mapping(cls, mapping):
        """Build from {demand level: probability}"""
        levels = sorted(mapping)
        return cls(tuple(int(k) for k in levels), tuple(float(mapping[k]) for k in levels))

    def support_array(self):
        return np.asarray(self.support, dtype=np.int64)

    def probability_array(self):
        return np.asarray(self.probabilities, dtype=float)

    @property
    def max_demand(self):
        return self.support[-1]

    def mean(self):
        return math.fsum(d * p for d, p in zip(self.support, self.probabilities))

    def tail_probabilities(self, upto):
        """
        P(D > k) for k = 0..upto as an array

        Suffix sums keep the upper tail accurate; values below the smallest
        support point are exactly 1 and values at or above the largest are 0.
        """
        support = self.support_array()
        probs = self.probability_array()
        # suffix[j] = P(D >= support[j])
        suffix = np.cumsum(probs[::-1])[::-1]
        ks = np.arange(upto + 1)
        first_above = np.searchsorted(support, ks, side='right')
        tails = np.zeros(upto + 1)
        inside = first_above < len(support)
        tails[inside] = suffix[first_above[inside]]
        tails[ks < support[0]] = 1.0
        return tails


def load_trace(path, interval_seconds=DEFAULT_INTERVAL_SECONDS):
    """
    Load a demand trace CSV

    How it works:
    1. Reads the two columns interval_index,demand (header row is optional)
    2. Orders rows by interval_index
    3. Rejects negative demand

    Args:
        path (str | Path): CSV file
        interval_seconds (int): Length of one interval

    Returns:
        DemandTrace: Ordered samples
    """
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"Trace file not found: {path}")

    try:
        frame = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise InputFormatError("trace file is empty", field=str(path)) from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputFormatError(f"cannot parse trace: {e}", field=str(path)) from e
    except OSError as e:
        raise InputFileError(f"Cannot read trace {path}: {e}") from e

    if frame.shape[1] != 2:
        raise InputFormatError(f"expected 2 columns (interval_index,demand), found {frame.shape[1]}",
                               field=str(path))
    frame.columns = ['interval_index', 'demand']

    # Drop a header row if the first row is not numeric
    first = frame.iloc[0]
    if not (_is_int(first['interval_index']) and _is_int(first['demand'])):
        frame = frame.iloc[1:]
    if frame.empty:
        raise InputFormatError("trace has no samples", field=str(path))

    try:
        index = pd.to_numeric(frame['interval_index'], errors='raise').astype(np.int64)
        values = pd.to_numeric(frame['demand'], errors='raise')
    except (ValueError, TypeError) as e:
        raise InputFormatError(f"non-numeric value in trace: {e}", field=str(path)) from e

    if (values < 0).any():
        row = int(index[values < 0].iloc[0])
        raise ValidationError(f"negative demand at interval {row}", field='demand')
    if (values != np.floor(values)).any():
        raise InputFormatError("demand must be an integer", field='demand')

    ordered = pd.DataFrame({'i': index.to_numpy(), 'd': values.astype(np.int64).to_numpy()})
    ordered = ordered.sort_values('i', kind='stable')
    trace = DemandTrace(int(interval_seconds), tuple(int(v) for v in ordered['d']))
    logger.info("Loaded %d samples from %s", len(trace), path)
    return trace


def _is_int(text):
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


def save_trace(trace, path):
    """Write a trace in the interval_index,demand CSV format"""
    frame = pd.DataFrame({'interval_index': range(len(trace)), 'demand': trace.samples})
    frame.to_csv(path, index=False, lineterminator='\n')


def to_vm_units(trace, capacity):
    """
    Transform demand to number of VMs of one type: ceil(d / capacity)

    Args:
        trace (DemandTrace): Raw demand
        capacity (int): Capacity of the reference VM type

    Returns:
        DemandTrace: Same interval length, VM-count samples
    """
    if capacity < 1:
        raise ValidationError("must be at least 1", field='capacity')
    return DemandTrace(trace.interval_seconds, tuple(-(-d // capacity) for d in trace.samples))


def distribution_to_vm_units(dist, capacity):
    """Map a raw-demand distribution to VM units, merging levels that collapse together"""
    if capacity < 1:
        raise ValidationError("must be at least 1", field='capacity')
    merged = {}
    for level, prob in zip(dist.support, dist.probabilities):
        units = -(-level // capacity)
        merged[units] = merged.get(units, 0.0) + prob
    return DemandDistribution.from_mapping(merged)


def build_distribution(trace):
    """
    Empirical distribution of a trace (plain histogram, no smoothing)

    Args:
        trace (DemandTrace): Nonempty trace

    Returns:
        DemandDistribution: support = distinct values, probabilities = frequencies
    """
    if len(trace) == 0:
        raise ValidationError("trace is empty", field='samples')
    counts = pd.Series(trace.samples).value_counts().sort_index()
    total = int(counts.sum())
    return DemandDistribution(
        tuple(int(level) for level in counts.index),
        tuple(int(c) / total for c in counts.to_numpy()),
    )


def window_length(window, interval_seconds):
    """Number of intervals in a named window (daily/weekly/monthly) or an explicit count"""
    if isinstance(window, str) and window in WINDOWS:
        seconds = WINDOWS[window]
        if seconds < interval_seconds:
            raise ValidationError(f"{window} window is shorter than one interval", field='window')
        return seconds // interval_seconds
    try:
        count = int(window)
    except (TypeError, ValueError):
        raise ValidationError(f"unknown window '{window}' (use daily, weekly, monthly or an interval count)",
                              field='window') from None
    if count < 1:
        raise ValidationError("window is shorter than one interval", field='window')
    return count


def aggregate(trace, window, reducer='max'):
    """
    Reduce a trace to one sample per window

    Only complete windows are reduced; a trailing partial window is dropped.
    mean and p95 round up so provisioning errs on the safe side.

    Args:
        trace (DemandTrace): Input trace
        window: 'daily', 'weekly', 'monthly' or a number of intervals
        reducer (str): max, mean or p95

    Returns:
        DemandTrace: interval_seconds = window length in seconds
    """
    if reducer not in REDUCERS:
        raise ValidationError(f"unknown reducer '{reducer}' (use {', '.join(REDUCERS)})", field='reducer')
    size = window_length(window, trace.interval_seconds)
    full = len(trace) // size
    if full == 0:
        raise ValidationError(f"trace of {len(trace)} intervals does not cover one {window} window",
                              field='window')

    blocks = trace.as_array()[:full * size].reshape(full, size)
    if reducer == 'max':
        reduced = blocks.max(axis=1)
    elif reducer == 'mean':
        # Integer ceiling of the mean
        reduced = -(-blocks.sum(axis=1) // size)
    else:
        reduced = np.ceil(np.percentile(blocks, 95, axis=1) - 1e-9)

    return DemandTrace(trace.interval_seconds * size, tuple(int(v) for v in reduced))


def ccdf(dist, r):
    """P(D >= r + 1), the probability mass strictly above r"""
    if r < dist.support[0]:
        return 1.0
    if r >= dist.support[-1]:
        return 0.0
    return math.fsum(p for d, p in zip(dist.support, dist.probabilities) if d > r)


def synthesize_trace(levels, probabilities, n, seed=0, interval_seconds=DEFAULT_INTERVAL_SECONDS):
    """
    Draw an i.i.d. trace from a discrete demand model

    Args:
        levels (list[int]): Demand levels
        probabilities (list[float]): Matching probabilities
        n (int): Number of intervals
        seed (int): Seed for numpy's default_rng

    Returns:
        DemandTrace
    """
    model = DemandDistribution.from_mapping(dict(zip(levels, probabilities)))
    if n < 1:
        raise ValidationError("must be at least 1", field='n')
    rng = np.random.default_rng(seed)
    probs = model.probability_array()
    draws = rng.choice(model.support_array(), size=n, p=probs / probs.sum())
    return DemandTrace(int(interval_seconds), tuple(int(v) for v in draws))


def trace_statistics(trace):
    """Summary numbers for the analyze command and the dashboard"""
    if len(trace) == 0:
        raise ValidationError("trace is empty", field='samples')
    values = trace.as_array()
    mean = float(values.mean())
    return {
        'intervals': int(len(values)),
        'interval_seconds': trace.interval_seconds,
        'min': int(values.min()),
        'max': int(values.max()),
        'mean': round(mean, 6),
        'std': round(float(values.std()), 6),
        'p50': round(float(np.percentile(values, 50)), 6),
        'p95': round(float(np.percentile(values, 95)), 6),
        'p99': round(float(np.percentile(values, 99)), 6),
        'peak_to_mean': round(float(values.max()) / mean, 6) if mean > 0 else None,
    }
