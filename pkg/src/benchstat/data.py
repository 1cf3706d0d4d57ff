"""Ingestion, validation, aggregation and synthesis of benchmark measurement tables.

The raw input is a long-form table of per-subset error rates: each dataset is
split in two halves (subsets 1 and 2), an algorithm is trained on one half and
tested on the other, optionally recording the inner cross-validation estimate
of the error at the selected hyperparameters.  Timing tables follow the same
long-form layout with wall-clock measurements.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InputError

ERROR_HEADER = ["dataset", "algorithm", "subset", "test_error", "cv_error"]
TIMING_HEADER = [
    "dataset",
    "algorithm",
    "subset",
    "train_test_seconds",
    "hyper_search_seconds",
    "n_hyper_combos",
]


@dataclass(frozen=True)
class ErrorRecord:
    """One train-on-one-half, test-on-the-other measurement."""

    dataset: str
    algorithm: str
    subset: int  # 1 or 2: the training half
    test_error: float
    cv_error: Optional[float] = None

    def __post_init__(self):
        if self.subset not in (1, 2):
            raise InputError(f"unknown subset value: {self.subset!r}")
        if not 0.0 <= self.test_error <= 1.0:
            raise InputError(f"test_error outside [0,1]: {self.test_error}")
        if self.cv_error is not None and not 0.0 <= self.cv_error <= 1.0:
            raise InputError(f"cv_error outside [0,1]: {self.cv_error}")


@dataclass(frozen=True)
class TimingRecord:
    """Wall-clock cost of one (dataset, algorithm, subset) run."""

    dataset: str
    algorithm: str
    subset: int
    train_test_seconds: float
    hyper_search_seconds: float
    n_hyper_combos: int

    def __post_init__(self):
        if self.subset not in (1, 2):
            raise InputError(f"unknown subset value: {self.subset!r}")
        if self.train_test_seconds < 0 or self.hyper_search_seconds < 0:
            raise InputError("negative time")
        if self.n_hyper_combos < 1:
            raise InputError(f"n_hyper_combos must be >= 1, got {self.n_hyper_combos}")

    @property
    def per_hyper_seconds(self) -> float:
        return self.hyper_search_seconds / self.n_hyper_combos


class _RecordTable:
    """Immutable collection of records keyed by (dataset, algorithm, subset)."""

    def __init__(self, records: Iterable):
        self.records = tuple(records)
        self._index = {}
        for rec in self.records:
            key = (rec.dataset, rec.algorithm, rec.subset)
            if key in self._index:
                raise InputError(f"duplicate key {key}")
            self._index[key] = rec
        self.datasets = tuple(sorted({r.dataset for r in self.records}))
        self.algorithms = tuple(sorted({r.algorithm for r in self.records}))

    def get(self, dataset: str, algorithm: str, subset: int):
        return self._index.get((dataset, algorithm, subset))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class ErrorTable(_RecordTable):
    """All parsed :class:`ErrorRecord` rows of one benchmark run."""


class TimingTable(_RecordTable):
    """All parsed :class:`TimingRecord` rows of one benchmark run."""


@dataclass
class AggregatedMatrix:
    """Dataset x algorithm matrix of values with an explicit presence mask.

    For error data the value is the mean of the two per-subset test errors;
    a cell is present iff both subset records exist.  Missing cells are NaN
    with ``mask`` False.
    """

    algorithms: tuple
    datasets: tuple
    values: np.ndarray  # shape (n_datasets, n_algorithms), NaN where missing
    mask: np.ndarray  # bool, same shape

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.datasets = tuple(self.datasets)
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != (len(self.datasets), len(self.algorithms)):
            raise ValueError("values shape does not match labels")
        if self.mask.shape != self.values.shape:
            raise ValueError("mask shape does not match values")

    @property
    def n_datasets(self) -> int:
        return len(self.datasets)

    @property
    def n_algorithms(self) -> int:
        return len(self.algorithms)

    def present_values(self) -> np.ndarray:
        return self.values[self.mask]

    def algorithm_index(self, name: str) -> int:
        try:
            return self.algorithms.index(name)
        except ValueError:
            raise InputError(f"unknown algorithm: {name!r}") from None


@dataclass
class ValidationReport:
    """Missing-cell bookkeeping produced by :func:`validate_matrix`."""

    missing_cells: list  # list of (dataset, algorithm)
    missing_by_algorithm: dict
    missing_by_dataset: dict

    @property
    def complete(self) -> bool:
        return not self.missing_cells


def _parse_fraction(text: str, column: str, line_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"line {line_no}: malformed {column} value {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise InputError(f"line {line_no}: {column} outside [0,1]: {value}")
    return value


def _open_csv(source) -> Iterable:
    if isinstance(source, (str, bytes)):
        if isinstance(source, bytes):
            source = source.decode("utf-8")
        stream = io.StringIO(source)
    elif isinstance(source, io.TextIOBase):
        stream = source
    else:
        # byte stream
        stream = io.TextIOWrapper(source, encoding="utf-8", newline="")
    # '#' comment lines (e.g. the synth-spec echo) are transparent to parsing;
    # blank lines are yielded so csv line numbers stay aligned with the file
    return (line for line in stream if not line.lstrip().startswith("#"))


def ingest_error_table(source) -> ErrorTable:
    """Parse a long-form error CSV into an :class:`ErrorTable`.

    Expected header: ``dataset,algorithm,subset,test_error,cv_error``; the
    cv_error field may be empty.  The cv_error column itself may be absent
    (degraded mode: CV-based thresholds are then unavailable).
    """
    reader = csv.reader(_open_csv(source))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty input: missing header") from None
    header = [h.strip() for h in header]
    has_cv = header == ERROR_HEADER
    if not has_cv and header != ERROR_HEADER[:4]:
        raise InputError(f"unexpected header {header!r}, want {ERROR_HEADER!r}")

    records = []
    seen = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        expected = 5 if has_cv else 4
        if len(row) != expected:
            raise InputError(f"line {line_no}: expected {expected} fields, got {len(row)}")
        dataset, algorithm = row[0].strip(), row[1].strip()
        if not dataset or not algorithm:
            raise InputError(f"line {line_no}: empty identifier")
        subset_text = row[2].strip()
        if subset_text not in ("1", "2"):
            raise InputError(f"line {line_no}: unknown subset value {subset_text!r}")
        subset = int(subset_text)
        test_error = _parse_fraction(row[3].strip(), "test_error", line_no)
        cv_error = None
        if has_cv and row[4].strip():
            cv_error = _parse_fraction(row[4].strip(), "cv_error", line_no)
        key = (dataset, algorithm, subset)
        if key in seen:
            raise InputError(
                f"line {line_no}: duplicate key {key} (first seen at line {seen[key]})"
            )
        seen[key] = line_no
        records.append(ErrorRecord(dataset, algorithm, subset, test_error, cv_error))
    return ErrorTable(records)


def ingest_timing_table(source) -> TimingTable:
    """Parse a long-form timing CSV into a :class:`TimingTable`."""
    reader = csv.reader(_open_csv(source))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty input: missing header") from None
    if [h.strip() for h in header] != TIMING_HEADER:
        raise InputError(f"unexpected header {header!r}, want {TIMING_HEADER!r}")

    records = []
    seen = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 6:
            raise InputError(f"line {line_no}: expected 6 fields, got {len(row)}")
        dataset, algorithm = row[0].strip(), row[1].strip()
        subset_text = row[2].strip()
        if subset_text not in ("1", "2"):
            raise InputError(f"line {line_no}: unknown subset value {subset_text!r}")
        try:
            train_test = float(row[3])
            hyper = float(row[4])
            combos = int(row[5])
        except ValueError:
            raise InputError(f"line {line_no}: malformed numeric field") from None
        if train_test < 0 or hyper < 0:
            raise InputError(f"line {line_no}: negative time")
        if combos < 1:
            raise InputError(f"line {line_no}: n_hyper_combos must be >= 1")
        key = (dataset, algorithm, int(subset_text))
        if key in seen:
            raise InputError(
                f"line {line_no}: duplicate key {key} (first seen at line {seen[key]})"
            )
        seen[key] = line_no
        records.append(
            TimingRecord(dataset, algorithm, int(subset_text), train_test, hyper, combos)
        )
    return TimingTable(records)


def aggregate_errors(table: ErrorTable) -> AggregatedMatrix:
    """Average the two per-subset test errors into one value per cell.

    A cell is present only when both subset records exist; otherwise it is
    NaN with a False mask.
    """
    datasets = table.datasets
    algorithms = table.algorithms
    values = np.full((len(datasets), len(algorithms)), np.nan)
    mask = np.zeros_like(values, dtype=bool)
    for di, dataset in enumerate(datasets):
        for ai, algorithm in enumerate(algorithms):
            r1 = table.get(dataset, algorithm, 1)
            r2 = table.get(dataset, algorithm, 2)
            if r1 is not None and r2 is not None:
                values[di, ai] = (r1.test_error + r2.test_error) / 2.0
                mask[di, ai] = True
    return AggregatedMatrix(algorithms, datasets, values, mask)


def matrix_from_timings(table: TimingTable, metric: str) -> AggregatedMatrix:
    """Build a subjects x algorithms matrix of timings.

    Subjects are (dataset, subset) pairs, labeled ``dataset::subset``: the
    two halves of a dataset are separate subjects for the timing analysis.
    ``metric`` is ``one_train_test`` or ``per_hyper``.
    """
    if metric not in ("one_train_test", "per_hyper"):
        raise InputError(f"unknown timing metric: {metric!r}")
    subjects = tuple(
        sorted({(r.dataset, r.subset) for r in table.records})
    )
    labels = tuple(f"{d}::{s}" for d, s in subjects)
    algorithms = table.algorithms
    values = np.full((len(subjects), len(algorithms)), np.nan)
    mask = np.zeros_like(values, dtype=bool)
    subject_index = {s: i for i, s in enumerate(subjects)}
    for rec in table.records:
        si = subject_index[(rec.dataset, rec.subset)]
        ai = algorithms.index(rec.algorithm)
        if metric == "one_train_test":
            values[si, ai] = rec.train_test_seconds
        else:
            values[si, ai] = rec.per_hyper_seconds
        mask[si, ai] = True
    return AggregatedMatrix(algorithms, labels, values, mask)


def validate_matrix(m: AggregatedMatrix, policy: str = "allow_missing") -> ValidationReport:
    """List missing cells; under ``require_complete`` a nonempty list is an error."""
    if policy not in ("require_complete", "allow_missing"):
        raise InputError(f"unknown policy: {policy!r}")
    missing = []
    by_alg: dict = {}
    by_ds: dict = {}
    for di, dataset in enumerate(m.datasets):
        for ai, algorithm in enumerate(m.algorithms):
            if not m.mask[di, ai]:
                missing.append((dataset, algorithm))
                by_alg.setdefault(algorithm, []).append(dataset)
                by_ds.setdefault(dataset, []).append(algorithm)
    report = ValidationReport(missing, by_alg, by_ds)
    if policy == "require_complete" and missing:
        cells = ", ".join(f"({d},{a})" for d, a in missing)
        raise InputError(f"incomplete matrix: {len(missing)} missing cells: {cells}")
    return report


@dataclass
class SynthSpec:
    """Generative recipe for a synthetic error table.

    Cell means follow the additive model grand_mean + algorithm effect +
    dataset effect; per-subset test errors add normal noise of scale
    ``noise_sd`` and are clamped to [0,1].  The CV estimate adds independent
    normal noise of scale ``cv_noise_sd`` on top of the test error.
    """

    beta: float
    alpha: Mapping[str, float]  # algorithm -> effect
    delta: Mapping[str, float]  # dataset -> effect
    noise_sd: float = 0.0
    cv_noise_sd: float = 0.0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise InputError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.cv_noise_sd < 0:
            raise InputError(f"cv_noise_sd must be >= 0, got {self.cv_noise_sd}")
        if not self.alpha or not self.delta:
            raise InputError("alpha and delta must be nonempty")

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed synth spec JSON: {exc}") from None
        try:
            return cls(
                beta=float(obj["beta"]),
                alpha={str(k): float(v) for k, v in obj["alpha"].items()},
                delta={str(k): float(v) for k, v in obj["delta"].items()},
                noise_sd=float(obj.get("noise_sd", 0.0)),
                cv_noise_sd=float(obj.get("cv_noise_sd", 0.0)),
            )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise InputError(f"invalid synth spec: {exc}") from None


def generate_synthetic(spec: SynthSpec, seed: int) -> ErrorTable:
    """Draw a synthetic error table from the additive model; deterministic per seed."""
    rng = np.random.default_rng(seed)
    records = []
    algorithms = sorted(spec.alpha)
    datasets = sorted(spec.delta)
    for dataset in datasets:
        for algorithm in algorithms:
            mean = spec.beta + spec.alpha[algorithm] + spec.delta[dataset]
            for subset in (1, 2):
                noise = rng.normal(0.0, spec.noise_sd) if spec.noise_sd > 0 else 0.0
                test_error = float(np.clip(mean + noise, 0.0, 1.0))
                cv_noise = (
                    rng.normal(0.0, spec.cv_noise_sd) if spec.cv_noise_sd > 0 else 0.0
                )
                cv_error = float(np.clip(test_error + cv_noise, 0.0, 1.0))
                records.append(
                    ErrorRecord(dataset, algorithm, subset, test_error, cv_error)
                )
    return ErrorTable(records)


def error_table_to_csv(table: ErrorTable, comment: Optional[str] = None) -> str:
    """Render an error table back to its CSV wire format."""
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ERROR_HEADER)
    for rec in table.records:
        writer.writerow(
            [
                rec.dataset,
                rec.algorithm,
                rec.subset,
                repr(rec.test_error),
                "" if rec.cv_error is None else repr(rec.cv_error),
            ]
        )
    return out.getvalue()
