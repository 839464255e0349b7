import json

import numpy as np
import pytest

from qerrbars import build_effective_povm
from qerrbars.cli import main, parse_calibration, parse_dataset

Z0 = [[1.0, 0.0], [0.0, 0.0]]
Z1 = [[0.0, 0.0], [0.0, 1.0]]
ZERO2 = [[0.0, 0.0], [0.0, 0.0]]


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def minimal_dataset(tmp_path, name="data.json"):
    return write_json(
        tmp_path / name,
        {
            "dim": 2,
            "effects": [{"re": [[1.0, 0.0], [0.0, 1.0]], "im": ZERO2}],
            "counts": [1],
        },
    )


def z_counts_dataset(tmp_path, n0=30, n1=10):
    return write_json(
        tmp_path / "zdata.json",
        {
            "dim": 2,
            "effects": [{"re": Z0, "im": ZERO2}, {"re": Z1, "im": ZERO2}],
            "counts": [n0, n1],
        },
    )


class TestParseDataset:
    def test_minimal_valid_file(self, tmp_path):
        data = parse_dataset(minimal_dataset(tmp_path))
        assert data.dim == 2
        assert len(data.effects) == 1
        assert data.n_total == 1

    def test_length_mismatch_names_both_lengths(self, tmp_path):
        path = write_json(
            tmp_path / "bad.json",
            {"dim": 2, "effects": [{"re": Z0, "im": ZERO2}], "counts": [1, 2]},
        )
        with pytest.raises(ValueError, match="length 2.*length 1"):
            parse_dataset(path)

    def test_invalid_effect_names_index(self, tmp_path):
        path = write_json(
            tmp_path / "bad2.json",
            {
                "dim": 2,
                "effects": [
                    {"re": Z0, "im": ZERO2},
                    {"re": [[1.5, 0.0], [0.0, 0.0]], "im": ZERO2},
                ],
                "counts": [1, 1],
            },
        )
        with pytest.raises(ValueError, match=r"effects\[1\].*eigenvalue"):
            parse_dataset(path)

    def test_negative_count_rejected(self, tmp_path):
        path = write_json(
            tmp_path / "bad3.json",
            {"dim": 2, "effects": [{"re": Z0, "im": ZERO2}], "counts": [-1]},
        )
        with pytest.raises(ValueError, match=r"counts\[0\]"):
            parse_dataset(path)

    def test_calibration_file_round_trip(self, tmp_path):
        path = write_json(
            tmp_path / "cal.json",
            {
                "bins": 2,
                "q0": [0.9, 0.1],
                "q1": [0.2, 0.8],
                "rotations": [{"re": [[1.0, 0.0], [0.0, 1.0]], "im": ZERO2}],
            },
        )
        cal = parse_calibration(path)
        effects = build_effective_povm(cal, 0)
        assert np.allclose(effects[0].matrix, np.diag([0.9, 0.2]))
        total = sum(e.matrix for e in effects)
        assert np.allclose(total, np.eye(2), atol=1e-9)

    def test_calibration_errors_name_the_file(self, tmp_path):
        path = write_json(
            tmp_path / "badcal.json",
            {"bins": 2, "q0": [0.9, 0.2], "q1": [0.2, 0.8], "rotations": []},
        )
        with pytest.raises(ValueError, match="badcal.*sums"):
            parse_calibration(path)

    def test_duplicate_effects_are_merged(self, tmp_path):
        path = write_json(
            tmp_path / "dup.json",
            {
                "dim": 2,
                "effects": [
                    {"re": Z0, "im": ZERO2},
                    {"re": Z0, "im": ZERO2},
                    {"re": Z1, "im": ZERO2},
                ],
                "counts": [3, 4, 5],
            },
        )
        data = parse_dataset(path)
        assert len(data.effects) == 2
        assert sorted(data.counts.tolist()) == [5, 7]


class TestSimulate:
    def test_fixed_seed_gives_byte_identical_files(self, tmp_path, capsys):
        state = write_json(
            tmp_path / "state.json", {"re": [[0.9, 0.0], [0.0, 0.1]], "im": ZERO2}
        )
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out1, out2):
            assert (
                main(
                    [
                        "simulate",
                        "--state",
                        state,
                        "--num-qubits",
                        "1",
                        "--shots",
                        "100",
                        "--seed",
                        "11",
                        "--out",
                        str(out),
                    ]
                )
                == 0
            )
        assert out1.read_bytes() == out2.read_bytes()

    def test_simulated_dataset_parses_and_totals(self, tmp_path):
        state = write_json(
            tmp_path / "state.json", {"re": [[0.5, 0.0], [0.0, 0.5]], "im": ZERO2}
        )
        out = tmp_path / "sim.json"
        main(
            [
                "simulate",
                "--state",
                state,
                "--num-qubits",
                "1",
                "--shots",
                "50",
                "--out",
                str(out),
            ]
        )
        data = parse_dataset(str(out))
        assert data.n_total == 150  # 3 settings x 50 shots


class TestQebCommand:
    def test_prints_reference_values(self, capsys):
        assert (
            main(
                [
                    "qeb",
                    "--a2", "722.8",
                    "--a1", "319.6",
                    "--m", "14.09",
                    "--h", "0",
                    "--s", "1",
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        values = {
            line.split(" = ")[0]: float(line.split(" = ")[1])
            for line in out.strip().splitlines()
        }
        assert round(values["f0"], 4) == 0.0377
        assert round(values["Delta"], 3) == 0.013
        assert round(values["gamma"], 4) == 0.0014

    def test_json_output(self, capsys):
        main(
            [
                "qeb",
                "--a2", "8511",
                "--a1", "-476.8",
                "--m", "42.53",
                "--h", "1",
                "--s", "-1",
                "--json",
            ]
        )
        doc = json.loads(capsys.readouterr().out)
        assert round(doc["f0"], 3) == 0.934


class TestMleCommand:
    def test_writes_state_and_eigenvalues(self, tmp_path, capsys):
        dataset = z_counts_dataset(tmp_path)
        out = tmp_path / "mle.json"
        assert main(["mle", "--dataset", dataset, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["converged"]
        assert doc["eigenvalues"] == sorted(doc["eigenvalues"])
        assert sum(doc["eigenvalues"]) == pytest.approx(1.0, abs=1e-9)


class TestConfidenceCommand:
    def test_reference_region(self, capsys):
        assert (
            main(
                [
                    "confidence",
                    "--a2", "8511",
                    "--a1", "-476.8",
                    "--m", "42.53",
                    "--h", "1",
                    "--s", "-1",
                    "--fom", "fidelity2",
                    "--epsilon", "0.05",
                    "--delta", "0.1",
                    "--n", "55677",
                    "--d", "4",
                ]
            )
            == 0
        )
        doc = json.loads(capsys.readouterr().out)
        assert doc["f_star"] == pytest.approx(0.85, abs=0.02)
        assert doc["f_reported"] == pytest.approx(0.75, abs=0.02)
        assert doc["region_bounds"][1] == 1.0


class TestErrorReporting:
    def test_bad_dataset_exits_nonzero_with_json_error(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.json")
        code = main(["mle", "--dataset", missing])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"
        assert "not found" in err["message"]


@pytest.fixture(scope="module")
def analyze_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("analyze")
    dataset = z_counts_dataset(tmp_path, 300, 100)
    ref = write_json(
        tmp_path / "ref.json", {"re": [[1.0, 0.0], [0.0, 0.0]], "im": ZERO2}
    )
    out_dir = tmp_path / "out"
    argv = [
        "analyze",
        "--dataset", dataset,
        "--fom", "trace-dist",
        "--ref", ref,
        "--bins", "60",
        "--n-samples", "2000",
        "--n-therm", "100",
        "--step-size", "0.05",
        "--walkers", "2",
        "--seed", "21",
        "--epsilon", "0.05",
        "--delta", "0.05",
        "--out", str(out_dir),
        "--dump-samples",
    ]
    assert main(argv) == 0
    return tmp_path, out_dir, argv


class TestAnalyze:
    def test_outputs_exist(self, analyze_run):
        _, out_dir, _ = analyze_run
        assert (out_dir / "report.json").exists()
        assert (out_dir / "histogram.csv").exists()
        assert (out_dir / "samples.csv").exists()

    def test_report_contains_pipeline_results(self, analyze_run):
        _, out_dir, _ = analyze_run
        report = json.loads((out_dir / "report.json").read_text())
        assert report["provenance"]["config"]["seed"] == 21
        assert len(report["provenance"]["walker_seeds"]) == 2
        assert report["dataset"]["total_counts"] == 400
        assert "a2" in report["fit"]
        assert "f0" in report["fit"]["quantum_error_bars"]
        assert "f_star" in report["confidence"]
        ratios = report["walk"]["acceptance_ratios"]
        assert len(ratios) == 2

    def test_csv_and_json_histograms_agree(self, analyze_run):
        _, out_dir, _ = analyze_run
        report = json.loads((out_dir / "report.json").read_text())
        rows = (out_dir / "histogram.csv").read_text().strip().splitlines()[1:]
        table = np.array([[float(c) for c in row.split(",")] for row in rows])
        assert np.array_equal(table[:, 0], np.array(report["histogram"]["bin_centers"]))
        assert np.array_equal(table[:, 1], np.array(report["histogram"]["density"]))
        assert np.array_equal(table[:, 2], np.array(report["histogram"]["error"]))

    def test_rerun_is_bit_identical(self, analyze_run, tmp_path):
        _, out_dir, argv = analyze_run
        rerun_dir = tmp_path / "rerun"
        argv = list(argv)
        argv[argv.index("--out") + 1] = str(rerun_dir)
        assert main(argv) == 0
        assert (rerun_dir / "report.json").read_bytes() == (
            out_dir / "report.json"
        ).read_bytes()
        assert (rerun_dir / "histogram.csv").read_bytes() == (
            out_dir / "histogram.csv"
        ).read_bytes()

    def test_fit_roundtrip_through_saved_csv(self, analyze_run, capsys):
        _, out_dir, _ = analyze_run
        report = json.loads((out_dir / "report.json").read_text())
        assert (
            main(
                [
                    "fit",
                    "--histogram", str(out_dir / "histogram.csv"),
                    "--h", "0",
                    "--s", "1",
                ]
            )
            == 0
        )
        doc = json.loads(capsys.readouterr().out)
        assert doc["a2"] == pytest.approx(report["fit"]["a2"], rel=1e-9)
        assert doc["m"] == pytest.approx(report["fit"]["m"], rel=1e-9)


class TestAnalyzeVariants:
    def _two_qubit_dataset(self, tmp_path):
        psi = np.array([0, 1, 1j, 0]) / np.sqrt(2)
        rho = 0.9 * np.outer(psi, psi.conj()) + 0.1 * np.eye(4) / 4
        state = write_json(
            tmp_path / "state.json",
            {"re": rho.real.tolist(), "im": rho.imag.tolist()},
        )
        sim = tmp_path / "sim.json"
        assert (
            main(
                [
                    "simulate",
                    "--state", state,
                    "--num-qubits", "2",
                    "--shots", "300",
                    "--seed", "3",
                    "--out", str(sim),
                ]
            )
            == 0
        )
        return str(sim), psi

    def test_observable_fom_with_auto_step(self, tmp_path):
        sim, _ = self._two_qubit_dataset(tmp_path)
        sx = np.array([[0, 1], [1, 0]])
        sy = np.array([[0, -1j], [1j, 0]])
        sz = np.diag([1.0, -1.0])
        witness = -np.eye(4) - np.kron(sx, sy) + np.kron(sy, sx) - np.kron(sz, sz)
        obs = write_json(
            tmp_path / "witness.json",
            {"re": witness.real.tolist(), "im": witness.imag.tolist()},
        )
        out_dir = tmp_path / "obs_out"
        code = main(
            [
                "analyze",
                "--dataset", sim,
                "--fom", "observable",
                "--observable", obs,
                "--extremum", "2",
                "--extremum-kind", "max",
                "--step-size", "auto",
                "--n-samples", "1500",
                "--n-therm", "50",
                "--walkers", "2",
                "--seed", "9",
                "--epsilon", "0.05",
                "--delta", "0.05",
                "--w-range", "4",
                "--out", str(out_dir),
            ]
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["figure_of_merit"] == {"kind": "observable", "h": 2.0, "s": -1}
        # Tuner targets the acceptance window.
        for ratio in report["walk"]["acceptance_ratios"]:
            assert 0.15 <= ratio <= 0.55
        # Witness expectation peaks below its maximum; region shifts by w*delta.
        assert report["fit"]["quantum_error_bars"]["f0"] < 2.0
        conf = report["confidence"]
        assert conf["f_reported"] == pytest.approx(conf["f_star"] - 0.2)

    def test_trace_distance_to_mle_reference(self, tmp_path):
        sim, _ = self._two_qubit_dataset(tmp_path)
        out_dir = tmp_path / "mle_out"
        code = main(
            [
                "analyze",
                "--dataset", sim,
                "--fom", "trace-dist",
                "--ref", "mle",
                "--n-samples", "1500",
                "--n-therm", "100",
                "--step-size", "0.02",
                "--walkers", "2",
                "--seed", "13",
                "--out", str(out_dir),
            ]
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["figure_of_merit"] == {"kind": "trace-dist", "h": 0.0, "s": 1}
        # Distance to the estimate concentrates near zero but not at zero.
        f0 = report["fit"]["quantum_error_bars"]["f0"]
        assert 0.0 < f0 < 0.3


class TestBootstrapCommand:
    def test_small_bootstrap_run(self, tmp_path, capsys):
        state = write_json(
            tmp_path / "state.json", {"re": [[0.9, 0.0], [0.0, 0.1]], "im": ZERO2}
        )
        sim = tmp_path / "sim.json"
        main(
            [
                "simulate",
                "--state", state,
                "--num-qubits", "1",
                "--shots", "200",
                "--seed", "5",
                "--out", str(sim),
            ]
        )
        ref = write_json(
            tmp_path / "ref.json", {"re": [[1.0, 0.0], [0.0, 0.0]], "im": ZERO2}
        )
        code = main(
            [
                "bootstrap",
                "--dataset", str(sim),
                "--fom", "fidelity2",
                "--ref", ref,
                "--num-qubits", "1",
                "--shots", "200",
                "--reps", "10",
                "--seed", "6",
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["values"]) == 10
        assert all(0.0 <= v <= 1.0 for v in doc["values"])
