"""Trial scheduling over a process pool and order-independent aggregation."""

import concurrent.futures
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95


def trial_units(trials, unit_size):
    """Split range(trials) into consecutive (start, stop) units."""
    unit_size = max(1, int(unit_size))
    return [(s, min(s + unit_size, trials)) for s in range(0, trials, unit_size)]


def run_unit(fn, start, stop):
    return [fn(t) for t in range(start, stop)]


def map_trials(fn, trials, workers=1, unit_size=50, checkpoint=None):
    """Evaluate fn(trial) for every trial; returns the records sorted by trial index.

    fn must be picklable when workers > 1. With a checkpoint, finished units
    are loaded instead of recomputed and new units are saved as they land.
    """
    units = trial_units(trials, unit_size)
    done = {}
    pending = []
    for unit in units:
        records = checkpoint.load(unit) if checkpoint is not None else None
        if records is not None:
            done[unit] = records
        else:
            pending.append(unit)
    if done:
        logger.info("resuming: %d of %d unit(s) loaded from checkpoints", len(done), len(units))

    def finish(unit, records):
        done[unit] = records
        if checkpoint is not None:
            checkpoint.save(unit, records)

    if workers <= 1 or len(pending) <= 1:
        for unit in pending:
            finish(unit, run_unit(fn, *unit))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_unit, fn, *unit): unit for unit in pending}
            for fut in concurrent.futures.as_completed(futures):
                finish(futures[fut], fut.result())
    records = [r for unit in units for r in done[unit]]
    return sorted(records, key=lambda r: r["trial"])


# ---------------------------------------------------------------------------
# Aggregates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    low: float
    high: float
    n: int

    def contains(self, x):
        return self.low <= x <= self.high


def wilson_interval(successes, n, confidence=CONFIDENCE):
    if n == 0:
        return Estimate(0.0, 0.0, 1.0, 0)
    ci = scipy.stats.binomtest(int(successes), int(n)).proportion_ci(confidence_level=confidence,
                                                                     method="wilson")
    p = successes / n
    return Estimate(p, min(float(ci.low), p), max(float(ci.high), p), int(n))


def mean_interval(values, confidence=CONFIDENCE):
    """Compensated mean with a Student-t interval."""
    values = [float(v) for v in values]
    n = len(values)
    if n == 0:
        return Estimate(math.nan, math.nan, math.nan, 0)
    mean = math.fsum(values) / n
    if n == 1:
        return Estimate(mean, mean, mean, 1)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    half = float(scipy.stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * math.sqrt(var / n)
    return Estimate(mean, mean - half, mean + half, n)


def sample_variance(values):
    values = [float(v) for v in values]
    n = len(values)
    if n < 2:
        return 0.0
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / (n - 1)


@dataclass(frozen=True)
class OriginFit:
    slope: float
    r2: float
    residuals: tuple


def fit_through_origin(x, y):
    """Least squares y = a x with the centred coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sxx = math.fsum(x * x)
    if sxx == 0:
        return OriginFit(math.nan, math.nan, tuple(y.tolist()))
    slope = math.fsum(x * y) / sxx
    resid = y - slope * x
    ss_res = math.fsum(resid * resid)
    ybar = math.fsum(y) / y.size
    ss_tot = math.fsum((y - ybar) ** 2)
    if ss_tot == 0:
        r2 = 1.0 if ss_res == 0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return OriginFit(slope, r2, tuple(float(r) for r in resid))
