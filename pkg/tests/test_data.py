import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benchstat import (
    AggregatedMatrix,
    ErrorRecord,
    ErrorTable,
    InputError,
    SynthSpec,
    aggregate_errors,
    generate_synthetic,
    ingest_error_table,
    ingest_timing_table,
    matrix_from_timings,
    validate_matrix,
)
from benchstat.data import error_table_to_csv

HEADER = "dataset,algorithm,subset,test_error,cv_error\n"
TIMING_HEADER = (
    "dataset,algorithm,subset,train_test_seconds,hyper_search_seconds,n_hyper_combos\n"
)


class TestIngestErrorTable:
    def test_direct_parse(self):
        table = ingest_error_table(HEADER + "iris,rf,1,0.05,0.06\n")
        assert len(table) == 1
        rec = table.records[0]
        assert rec.dataset == "iris" and rec.algorithm == "rf"
        assert rec.subset == 1
        assert rec.test_error == 0.05
        assert rec.cv_error == 0.06

    def test_empty_cv(self):
        table = ingest_error_table(HEADER + "iris,rf,1,0.05,\n")
        assert table.records[0].cv_error is None

    def test_unknown_subset(self):
        with pytest.raises(InputError, match="unknown subset value"):
            ingest_error_table(HEADER + "iris,rf,3,0.05,\n")

    def test_duplicate_key_names_second_line(self):
        text = HEADER + "iris,rf,1,0.05,\niris,rf,1,0.06,\n"
        with pytest.raises(InputError, match="line 3"):
            ingest_error_table(text)

    def test_value_outside_unit_interval(self):
        with pytest.raises(InputError, match=r"outside \[0,1\]"):
            ingest_error_table(HEADER + "iris,rf,1,1.5,\n")

    def test_malformed_row_reports_line(self):
        with pytest.raises(InputError, match="line 2"):
            ingest_error_table(HEADER + "iris,rf,1,notanumber,\n")

    def test_bad_header_rejected(self):
        with pytest.raises(InputError, match="header"):
            ingest_error_table("a,b,c\n1,2,3\n")

    def test_crlf_accepted(self):
        table = ingest_error_table(HEADER.replace("\n", "\r\n") + "iris,rf,1,0.05,0.06\r\n")
        assert len(table) == 1

    def test_byte_stream(self):
        stream = io.BytesIO((HEADER + "iris,rf,1,0.05,\n").encode("utf-8"))
        assert len(ingest_error_table(stream)) == 1

    def test_missing_cv_column_degraded_mode(self):
        table = ingest_error_table("dataset,algorithm,subset,test_error\niris,rf,1,0.05\n")
        assert table.records[0].cv_error is None

    def test_comment_lines_skipped(self):
        table = ingest_error_table("# generated\n" + HEADER + "iris,rf,1,0.05,\n")
        assert len(table) == 1


class TestAggregateErrors:
    def test_mean_of_two_subsets(self):
        table = ingest_error_table(HEADER + "iris,rf,1,0.10,\niris,rf,2,0.20,\n")
        m = aggregate_errors(table)
        assert m.values[0, 0] == (0.10 + 0.20) / 2  # exact mean of machine numbers
        assert m.mask[0, 0]

    def test_single_subset_missing(self):
        table = ingest_error_table(HEADER + "iris,rf,1,0.10,\n")
        m = aggregate_errors(table)
        assert not m.mask[0, 0]
        assert np.isnan(m.values[0, 0])

    def test_zero_errors(self):
        table = ingest_error_table(HEADER + "iris,rf,1,0.0,\niris,rf,2,0.0,\n")
        assert aggregate_errors(table).values[0, 0] == 0.0

    @given(st.permutations(range(6)))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariant(self, order):
        records = [
            ErrorRecord("d1", "a", 1, 0.1),
            ErrorRecord("d1", "a", 2, 0.2),
            ErrorRecord("d1", "b", 1, 0.3),
            ErrorRecord("d1", "b", 2, 0.4),
            ErrorRecord("d2", "a", 1, 0.5),
            ErrorRecord("d2", "a", 2, 0.6),
        ]
        base = aggregate_errors(ErrorTable(records))
        shuffled = aggregate_errors(ErrorTable([records[i] for i in order]))
        assert base.algorithms == shuffled.algorithms
        assert base.datasets == shuffled.datasets
        np.testing.assert_array_equal(base.values, shuffled.values)

    @given(
        st.floats(min_value=0, max_value=1, allow_nan=False),
        st.floats(min_value=0, max_value=1, allow_nan=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_cell_is_exact_mean(self, e1, e2):
        table = ErrorTable(
            [ErrorRecord("d", "a", 1, e1), ErrorRecord("d", "a", 2, e2)]
        )
        m = aggregate_errors(table)
        assert m.values[0, 0] == (e1 + e2) / 2.0


class TestValidateMatrix:
    def _matrix(self, mask):
        mask = np.asarray(mask, bool)
        values = np.where(mask, 0.1, np.nan)
        n_ds, n_alg = mask.shape
        return AggregatedMatrix(
            [f"a{i}" for i in range(n_alg)], [f"d{i}" for i in range(n_ds)], values, mask
        )

    def test_complete_ok(self):
        report = validate_matrix(self._matrix(np.ones((3, 3))), "require_complete")
        assert report.complete

    def test_allow_missing_lists_cells(self):
        mask = np.ones((10, 3), bool)
        mask[:, 1] = False
        report = validate_matrix(self._matrix(mask), "allow_missing")
        assert len(report.missing_by_algorithm["a1"]) == 10
        assert len(report.missing_cells) == 10

    def test_require_complete_enumerates(self):
        mask = np.ones((10, 3), bool)
        mask[:, 1] = False
        with pytest.raises(InputError, match="10 missing cells"):
            validate_matrix(self._matrix(mask), "require_complete")


class TestIngestTimingTable:
    def test_per_hyper_derivation(self):
        table = ingest_timing_table(TIMING_HEADER + "iris,rf,1,10,120,24\n")
        assert table.records[0].per_hyper_seconds == 5.0

    def test_zero_combos_rejected(self):
        with pytest.raises(InputError, match="n_hyper_combos"):
            ingest_timing_table(TIMING_HEADER + "iris,rf,1,10,120,0\n")

    def test_negative_time_rejected(self):
        with pytest.raises(InputError, match="negative time"):
            ingest_timing_table(TIMING_HEADER + "iris,rf,1,-1,120,24\n")

    def test_timing_matrix_subjects_are_subsets(self):
        text = TIMING_HEADER + "iris,rf,1,10,120,24\niris,rf,2,20,240,24\n"
        m = matrix_from_timings(ingest_timing_table(text), "one_train_test")
        assert m.datasets == ("iris::1", "iris::2")
        assert m.values[0, 0] == 10 and m.values[1, 0] == 20


class TestGenerateSynthetic:
    def test_zero_noise_exact_cells(self):
        spec = SynthSpec(beta=0.2, alpha={"a": 0.0, "b": 0.05}, delta={"d1": 0.1})
        table = generate_synthetic(spec, seed=0)
        for rec in table.records:
            expected = 0.2 + spec.alpha[rec.algorithm] + 0.1
            assert rec.test_error == expected
            assert rec.cv_error == expected

    def test_clamping(self):
        spec = SynthSpec(beta=0.9, alpha={"a": 0.5}, delta={"d": 0.0, "e": 0.0})
        for rec in generate_synthetic(spec, seed=0).records:
            assert rec.test_error == 1.0

    def test_deterministic_per_seed(self):
        spec = SynthSpec(
            beta=0.2,
            alpha={"a": 0.0, "b": 0.05},
            delta={f"d{i}": 0.0 for i in range(5)},
            noise_sd=0.01,
            cv_noise_sd=0.01,
        )
        t1 = error_table_to_csv(generate_synthetic(spec, seed=7))
        t2 = error_table_to_csv(generate_synthetic(spec, seed=7))
        assert t1 == t2
        t3 = error_table_to_csv(generate_synthetic(spec, seed=8))
        assert t1 != t3

    def test_planted_ordering_dominates(self):
        # gap 0.05 vs per-subset noise 0.01: the better algorithm wins on
        # effectively every dataset (Monte Carlo over 1000 seeds: min 50/50)
        spec = SynthSpec(
            beta=0.2,
            alpha={"a": 0.0, "b": 0.05},
            delta={f"d{i:02d}": 0.0 for i in range(50)},
            noise_sd=0.01,
        )
        m = aggregate_errors(generate_synthetic(spec, seed=123))
        ai_a = m.algorithms.index("a")
        ai_b = m.algorithms.index("b")
        wins = int((m.values[:, ai_a] < m.values[:, ai_b]).sum())
        assert wins > 45

    def test_negative_noise_rejected(self):
        with pytest.raises(InputError):
            SynthSpec(beta=0.2, alpha={"a": 0.0}, delta={"d": 0.0}, noise_sd=-1.0)

    def test_csv_roundtrip(self):
        spec = SynthSpec(
            beta=0.2,
            alpha={"a": 0.0, "b": 0.05},
            delta={"d1": 0.0, "d2": 0.1},
            noise_sd=0.013,
            cv_noise_sd=0.002,
        )
        table = generate_synthetic(spec, seed=3)
        text = error_table_to_csv(table, comment="spec echo")
        again = ingest_error_table(text)
        assert [(r.dataset, r.algorithm, r.subset, r.test_error, r.cv_error) for r in again] == [
            (r.dataset, r.algorithm, r.subset, r.test_error, r.cv_error) for r in table
        ]
