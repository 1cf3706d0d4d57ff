"""Empirical irrelevance threshold from paired per-subset errors.

Two gap measures are computed over each dataset's top-3 algorithms: the
absolute difference between the two half-dataset test errors (how much the
error moves when train and test samples swap), and the absolute difference
between the CV estimate and the realized test error (how much it moves with a
slightly larger training set and fresh test data).  The threshold is the
smaller of the two medians.
"""
from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import AggregatedMatrix, ErrorTable, aggregate_errors


@dataclass
class ThresholdReport:
    median_delta_resample: Optional[float]
    median_delta_cv: Optional[float]
    threshold: Optional[float]
    n_pairs_used: int  # (dataset, algorithm) pairs entering the resample median
    n_cv_values: int = 0


def top_k_algorithms(m: AggregatedMatrix, k: int) -> dict:
    """Per dataset, the algorithms with the k smallest aggregated errors.

    Ties at the k-th boundary are all included, so a set may exceed k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    top: dict = {}
    for di, dataset in enumerate(m.datasets):
        present = m.mask[di]
        if not present.any():
            top[dataset] = set()
            continue
        values = m.values[di][present]
        names = [a for a, p in zip(m.algorithms, present) if p]
        cutoff = np.sort(values)[min(k, len(values)) - 1]
        top[dataset] = {a for a, v in zip(names, values) if v <= cutoff}
    return top


def resample_deltas(t: ErrorTable, top: dict) -> list:
    """|test_error@subset2 - test_error@subset1| per kept (dataset, algorithm)."""
    deltas = []
    skipped = 0
    for dataset, algorithms in top.items():
        for algorithm in sorted(algorithms):
            r1 = t.get(dataset, algorithm, 1)
            r2 = t.get(dataset, algorithm, 2)
            if r1 is None or r2 is None:
                skipped += 1
                continue
            deltas.append(abs(r2.test_error - r1.test_error))
    if skipped:
        warnings.warn(f"skipped {skipped} pairs with a missing subset record", stacklevel=2)
    return deltas


def cv_deltas(t: ErrorTable, top: dict) -> list:
    """|test_error - cv_error| per kept record; both subsets contribute."""
    deltas = []
    skipped = 0
    for dataset, algorithms in top.items():
        for algorithm in sorted(algorithms):
            for subset in (1, 2):
                rec = t.get(dataset, algorithm, subset)
                if rec is None:
                    continue
                if rec.cv_error is None:
                    skipped += 1
                    continue
                deltas.append(abs(rec.test_error - rec.cv_error))
    if skipped:
        warnings.warn(f"skipped {skipped} records without cv_error", stacklevel=2)
    return deltas


def irrelevance_threshold(t: ErrorTable, k: int = 3) -> ThresholdReport:
    """Compose top-k selection, both delta medians, and their minimum.

    With no usable CV values (degraded mode) the CV median is absent and the
    threshold is the resample median alone.  Even-count medians are the mean
    of the two central values.
    """
    matrix = aggregate_errors(t)
    top = top_k_algorithms(matrix, k)
    res = resample_deltas(t, top)
    cv = cv_deltas(t, top)
    median_res = statistics.median(res) if res else None
    median_cv = statistics.median(cv) if cv else None
    if median_res is None:
        threshold = median_cv
    elif median_cv is None:
        threshold = median_res
    else:
        threshold = min(median_res, median_cv)
    return ThresholdReport(median_res, median_cv, threshold, len(res), len(cv))
