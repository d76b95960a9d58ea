"""Command-line interface: exit codes, outputs, and reproducibility."""

import json

import numpy as np
import pytest

from qoct.cli import main
from qoct.fileio import load_trace, save_trace
from qoct.engine import Interferogram
from qoct.stack import um_to_seconds


def run(argv):
    return main(argv)


class TestCountParams:
    @pytest.mark.parametrize("n, expected", [(1, 1), (2, 7), (3, 13), (10, 55)])
    def test_values(self, n, expected, capsys):
        assert run(["count-params", str(n)]) == 0
        assert capsys.readouterr().out.strip() == str(expected)

    def test_invalid_count(self, capsys):
        assert run(["count-params", "0"]) == 2


class TestSimulate:
    def test_single_mirror_full_dip(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = run([
            "simulate", "--sample", "mirror_single_interface",
            "--tau-span-um=-30:30", "--out", str(out),
        ])
        assert code == 0
        tr = load_trace(out)
        # a lone mirror gives a full-visibility dip centered at zero delay
        assert tr.counts.min() < 1e-3
        assert abs(tr.delays_um[np.argmin(tr.counts)]) < 1.0
        assert np.max(tr.counts[np.abs(tr.delays_um) > 25]) == pytest.approx(1.0, abs=5e-3)
        labels = json.loads(out.with_suffix(".csv.labels.json").read_text())
        assert len(labels["positions"]) == 1

    def test_closed_form_matches_numeric(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        common = ["--sample", "slide_two_interface", "--tau-span-um=-40:1300"]
        assert run(["simulate", *common, "--engine", "numeric", "--out", str(a)]) == 0
        assert run(["simulate", *common, "--engine", "closed-form", "--out", str(b)]) == 0
        ta, tb = load_trace(a), load_trace(b)
        assert np.max(np.abs(ta.counts - tb.counts)) < 1e-3

    def test_closed_form_rejects_multilayer(self, tmp_path, capsys):
        out = tmp_path / "x.csv"
        code = run([
            "simulate", "--sample", "stack_five_interface",
            "--engine", "closed-form", "--out", str(out),
        ])
        assert code == 2
        assert "numeric" in capsys.readouterr().err

    def test_noise_reproducible_from_seed(self, tmp_path):
        outs = []
        for name in ("n1.csv", "n2.csv"):
            out = tmp_path / name
            assert run([
                "simulate", "--sample", "mirror_single_interface",
                "--tau-span-um=-30:30", "--noise-counts", "1000",
                "--seed", "9", "--out", str(out),
            ]) == 0
            outs.append(load_trace(out))
        assert np.array_equal(outs[0].counts, outs[1].counts)
        assert outs[0].meta["noise_seed"] == 9

    def test_unknown_sample_exit_code(self, tmp_path):
        assert run(["simulate", "--sample", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path / "x.csv")]) == 2

    def test_bad_span_exit_code(self, tmp_path):
        assert run(["simulate", "--sample", "mirror_single_interface",
                    "--tau-span-um", "abc", "--out", str(tmp_path / "x.csv")]) == 2


class TestFit:
    def test_no_features_short_circuit(self, tmp_path):
        flat = Interferogram(
            delays=um_to_seconds(np.linspace(0.0, 100.0, 101)),
            counts=np.ones(101),
            gamma0=1.0,
            meta={"omega0": 4.66e15, "omega_a": 9.78e13, "omega_d": 1e6,
                  "profile": "gaussian"},
        )
        trace_path = tmp_path / "flat.csv"
        save_trace(flat, trace_path)
        out = tmp_path / "fit.json"
        assert run(["fit", "--trace", str(trace_path), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["no_features_detected"] is True
        assert all(v == 0.0 for v in report["best_parameters"].values())

    def test_round_trip_small(self, tmp_path):
        trace_path = tmp_path / "trace.csv"
        assert run([
            "simulate", "--sample", "mirror_single_interface",
            "--tau-span-um=-40:60", "--tau-step-um", "2",
            "--out", str(trace_path),
        ]) == 0
        out = tmp_path / "fit.json"
        code = run([
            "fit", "--trace", str(trace_path), "--n-range", "1",
            "--pop", "40", "--gens", "10", "--seed", "0", "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["no_features_detected"] is False
        assert report["n_interfaces"] == 1
        # normalized single-interface traces do not depend on R1, so only the
        # fit quality is checked
        assert report["best_fitness"] < 0.01
        recon = load_trace(report["reconstruction_file"])
        assert recon.counts.size == 51

    def test_bad_fix_syntax(self, tmp_path):
        trace_path = tmp_path / "t.csv"
        tr = Interferogram(
            delays=um_to_seconds(np.linspace(0, 10, 11)),
            counts=np.ones(11), gamma0=1.0,
        )
        save_trace(tr, trace_path)
        assert run(["fit", "--trace", str(trace_path), "--fix", "R1",
                    "--out", str(tmp_path / "f.json")]) == 2

    def test_missing_trace(self, tmp_path):
        assert run(["fit", "--trace", str(tmp_path / "absent.csv"),
                    "--out", str(tmp_path / "f.json")]) == 2


class TestLabelAndArtifactMap:
    def test_label_stdout(self, capsys):
        assert run(["label", "--sample", "slide_two_interface"]) == 0
        payload = json.loads(capsys.readouterr().out)
        positions = [p["position_um"] for p in payload["positions"]]
        assert min(positions) == pytest.approx(0.0, abs=1.0)

    def test_artifact_map_output(self, tmp_path):
        out = tmp_path / "map.csv"
        assert run([
            "artifact-map", "--sample", "slide_two_interface",
            "--pump-min", "404.0", "--pump-max", "405.0",
            "--points", "11", "--out", str(out),
        ]) == 0
        lines = out.read_text().splitlines()
        meta = json.loads(lines[0][len("# meta: "):])
        assert meta["pair"] == [0, 1]
        assert meta["separation_um"] == pytest.approx(563.04, abs=0.1)
        assert len(meta["suppression_nm"]) >= 1
        assert lines[1] == "pump_nm,cosine"
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
        assert rows.shape == (11, 2)
        assert np.all(np.abs(rows[:, 1]) <= 1.0)

    def test_degenerate_pair_exit_code(self):
        assert run(["artifact-map", "--sample", "mirror_single_interface"]) == 2

    def test_bad_pair_syntax(self):
        assert run(["artifact-map", "--sample", "slide_two_interface",
                    "--pair", "zero,one"]) == 2
