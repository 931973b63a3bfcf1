import json

import numpy as np
import pytest

from harmalign.cli import main
from harmalign.core import DataMatrix, Rng, write_output


@pytest.fixture
def dataset_csv(tmp_path):
    gen = Rng(0).generator
    values = gen.standard_normal((80, 40))
    path = tmp_path / "x.csv"
    write_output(DataMatrix(values=values), path)
    return str(path)


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


class TestAlign:
    def test_self_alignment_report(self, dataset_csv, tmp_path):
        report_path = tmp_path / "report.json"
        out_path = tmp_path / "embed.csv"
        code = run([
            "align", "--x", dataset_csv, "--y", dataset_csv,
            "--knn-bandwidth", "10",
            "--out", str(out_path), "--report", str(report_path),
        ])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["aggregates"]["self_match_rate"] >= 0.95
        assert report["params"]["align_params"]["t"] == 1
        header = out_path.read_text().splitlines()[0]
        assert header.startswith("dataset,row,")

    def test_zero_bands_usage_error(self, dataset_csv):
        code = run(["align", "--x", dataset_csv, "--y", dataset_csv, "--bands", "0"])
        assert code == 2

    def test_missing_input_runtime_error(self, tmp_path, dataset_csv, capsys):
        code = run(["align", "--x", str(tmp_path / "nope.csv"), "--y", dataset_csv])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestMultiAlign:
    def test_two_inputs_match_align(self, dataset_csv, tmp_path):
        out_pair = tmp_path / "pair.csv"
        out_multi = tmp_path / "multi.csv"
        args = ["--knn-bandwidth", "10"]
        assert run(["align", "--x", dataset_csv, "--y", dataset_csv,
                    "--out", str(out_pair)] + args) == 0
        assert run(["multi-align", "--inputs", dataset_csv, dataset_csv,
                    "--out", str(out_multi)] + args) == 0
        pair = np.loadtxt(out_pair, delimiter=",", skiprows=1)
        multi = np.loadtxt(out_multi, delimiter=",", skiprows=1)
        assert np.abs(pair[:, 2:] - multi[:, 2:]).max() <= 1e-10

    def test_three_identical_inputs_self_match(self, dataset_csv, tmp_path):
        report_path = tmp_path / "report.json"
        code = run(["multi-align", "--inputs", dataset_csv, dataset_csv, dataset_csv,
                    "--knn-bandwidth", "10", "--report", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        for key in ("self_match_rate_0_1", "self_match_rate_0_2", "self_match_rate_1_2"):
            assert report["aggregates"][key] >= 0.95

    def test_single_input_usage_error(self, dataset_csv):
        assert run(["multi-align", "--inputs", dataset_csv]) == 2


class TestExperiment:
    def write_config(self, tmp_path, **kw):
        values = {
            "source": "synthetic-manifold",
            "n1": 100, "n2": 100, "dim": 30,
            "trials": 2, "methods": "none",
            "preserved-sweep": "35,100",
            "knn-bandwidth": 10,
            "seed": 3,
        }
        values.update(kw)
        path = tmp_path / "exp.cfg"
        path.write_text("\n".join(f"{k}={v}" for k, v in values.items()) + "\n")
        return str(path)

    def test_corruption_csv_rows(self, tmp_path):
        cfg = self.write_config(tmp_path)
        csv_path = tmp_path / "sweep.csv"
        report_path = tmp_path / "report.json"
        code = run(["experiment", "--mode", "corruption", "--config", cfg,
                    "--csv", str(csv_path), "--report", str(report_path)])
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "p,method,trial,accuracy"
        assert len(lines) == 1 + 2 * 2  # 2 sweep points x 2 trials x 1 method
        report = json.loads(report_path.read_text())
        assert report["params"]["mode"] == "corruption"
        assert "version" in report["params"]

    def test_rerun_byte_identical(self, tmp_path):
        cfg = self.write_config(tmp_path)
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        run(["experiment", "--mode", "corruption", "--config", cfg, "--csv", str(first)])
        run(["experiment", "--mode", "corruption", "--config", cfg, "--csv", str(second)])
        assert first.read_bytes() == second.read_bytes()

    def test_flag_overrides_config(self, tmp_path):
        cfg = self.write_config(tmp_path, trials=5)
        report_path = tmp_path / "report.json"
        run(["experiment", "--mode", "corruption", "--config", cfg,
             "--trials", "1", "--report", str(report_path)])
        report = json.loads(report_path.read_text())
        assert report["params"]["trials"] == 1

    def test_missing_config_usage_error(self, tmp_path):
        code = run(["experiment", "--mode", "corruption",
                    "--config", str(tmp_path / "nope.cfg")])
        assert code == 2

    def test_transfer_mode(self, tmp_path):
        cfg = self.write_config(tmp_path, ratios="1,2", **{"preserved-pct": 100})
        csv_path = tmp_path / "sweep.csv"
        code = run(["experiment", "--mode", "transfer", "--config", cfg,
                    "--csv", str(csv_path)])
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "ratio,method,trial,accuracy"
        assert len(lines) == 1 + 2 * 2  # 2 ratios x 2 trials x 1 method
