import json
import os
import struct

import numpy as np
import pytest

from harmalign.core import (
    DataMatrix,
    Report,
    Rng,
    atomic_write_text,
    load_matrix,
    write_output,
)


class TestDataMatrix:
    def test_basic_construction(self):
        m = DataMatrix(values=[[0.0, 1.0], [2.0, 3.0]])
        assert m.n_points == 2
        assert m.n_features == 2
        assert m.labels is None

    def test_rejects_single_row(self):
        with pytest.raises(ValueError, match="N >= 2"):
            DataMatrix(values=[[1.0, 2.0]])

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="row 1, column 0"):
            DataMatrix(values=[[0.0, 1.0], [np.nan, 3.0]])

    def test_rejects_wrong_label_length(self):
        with pytest.raises(ValueError, match="labels length"):
            DataMatrix(values=[[0.0], [1.0]], labels=[0, 1, 2])

    def test_rejects_negative_labels(self):
        with pytest.raises(ValueError, match="non-negative"):
            DataMatrix(values=[[0.0], [1.0]], labels=[0, -1])


class TestLoadMatrix:
    def test_plain_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n2,3\n4,5\n")
        m = load_matrix(path)
        assert np.array_equal(m.values, [[0, 1], [2, 3], [4, 5]])
        assert m.labels is None

    def test_header_with_label_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("f1,f2,label\n0,1,7\n2,3,8\n")
        m = load_matrix(path)
        assert np.array_equal(m.values, [[0, 1], [2, 3]])
        assert np.array_equal(m.labels, [7, 8])

    def test_header_without_label_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n0,1\n2,3\n")
        m = load_matrix(path)
        assert m.labels is None
        assert m.values.shape == (2, 2)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="no rows"):
            load_matrix(path)

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("f1,f2\n")
        with pytest.raises(ValueError, match="no rows"):
            load_matrix(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_matrix(tmp_path / "nope.csv")

    def test_ragged_row_reports_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n2\n")
        with pytest.raises(ValueError, match="ragged row 1"):
            load_matrix(path)

    def test_non_numeric_cell_reports_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n2,oops\n")
        with pytest.raises(ValueError, match="row 1, column 1"):
            load_matrix(path)

    def test_inf_entry_reports_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n2,inf\n")
        with pytest.raises(ValueError, match="row 1, column 1"):
            load_matrix(path)

    def test_raw_f64_round_trip(self, tmp_path):
        rng = Rng(0).generator
        values = rng.standard_normal((5, 3))
        path = tmp_path / "m.bin"
        blob = struct.pack("<QQ", 5, 3) + values.astype("<f8").tobytes()
        path.write_bytes(blob)
        m = load_matrix(path, fmt="raw-f64")
        assert np.array_equal(m.values, values)

    def test_raw_f64_size_mismatch(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(struct.pack("<QQ", 5, 3) + b"\x00" * 8)
        with pytest.raises(ValueError, match="size mismatch"):
            load_matrix(path, fmt="raw-f64")


class TestWriteOutput:
    def test_matrix_round_trip_exact(self, tmp_path):
        rng = Rng(7).generator
        m = DataMatrix(values=rng.standard_normal((4, 3)) * 1e3)
        path = tmp_path / "m.csv"
        write_output(m, path)
        back = load_matrix(path)
        # 17 significant digits round-trip float64 exactly
        assert np.array_equal(back.values, m.values)

    def test_matrix_with_labels_round_trip(self, tmp_path):
        m = DataMatrix(values=[[0.5, 1.5], [2.5, 3.5]], labels=[1, 2])
        path = tmp_path / "m.csv"
        write_output(m, path)
        back = load_matrix(path)
        assert np.array_equal(back.values, m.values)
        assert np.array_equal(back.labels, m.labels)

    def test_report_contains_values(self, tmp_path):
        report = Report(params={"k": 5}, aggregates={"accuracy": 0.5})
        path = tmp_path / "r.json"
        write_output(report, path)
        text = path.read_text()
        assert '"accuracy": 0.5' in text

    def test_report_round_trip_lossless(self):
        report = Report(
            params={"sigma": 0.1 + 0.2},
            trials=[{"accuracy": 1 / 3}],
            aggregates={"mean": np.pi},
        )
        back = Report.from_json(report.to_json())
        assert back.params == report.params
        assert back.trials == report.trials
        assert back.aggregates == report.aggregates

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            atomic_write_text(tmp_path / "missing_dir" / "f.txt", "x")

    def test_atomic_no_partial_file(self, tmp_path):
        path = tmp_path / "out.csv"
        write_output(np.eye(2), path)
        leftovers = [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]
        assert leftovers == []


class TestRng:
    def test_equal_seeds_equal_streams(self):
        a = Rng(123).generator.standard_normal(10**6)
        b = Rng(123).generator.standard_normal(10**6)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = Rng(1).generator.standard_normal(100)
        b = Rng(2).generator.standard_normal(100)
        assert not np.array_equal(a, b)

    def test_spawn_is_deterministic(self):
        a = Rng(9).spawn("trial", 3).generator.standard_normal(100)
        b = Rng(9).spawn("trial", 3).generator.standard_normal(100)
        assert np.array_equal(a, b)

    def test_spawn_streams_independent(self):
        a = Rng(9).spawn("trial", 0).generator.standard_normal(100)
        b = Rng(9).spawn("trial", 1).generator.standard_normal(100)
        assert not np.array_equal(a, b)
