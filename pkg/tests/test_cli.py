"""Experiment driver determinism, curves, and the command surface."""

import json

import numpy as np
import pytest

from juntalab import dist_learn, qac0, qstate
from juntalab.cli import (
    CELL_RUNNERS,
    ExperimentSpec,
    ResultRecord,
    emit_curve,
    load_records,
    main,
    run_experiment,
    write_records,
)
from juntalab.hypercube import save_distribution
from juntalab.qstate import save_state


@pytest.fixture
def small_spec():
    return ExperimentSpec(
        command="learn-dist",
        grid={"n": [5], "k": [1, 2], "eps": [0.25], "delta": [0.1]},
        trials=2,
        seed=11,
    )


class TestRunExperiment:
    def test_record_count_matches_grid(self):
        spec = ExperimentSpec(
            command="address-distance",
            grid={"D": [1, 2], "k": [0, 1, 2]},
            trials=5,
            seed=0,
        )
        records = run_experiment(spec)
        assert len(records) == 2 * 3 * 5
        assert all(r.status == "ok" for r in records)

    def test_byte_identical_across_thread_counts(self, small_spec, tmp_path):
        first = run_experiment(small_spec, threads=1)
        second = run_experiment(small_spec, threads=4)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_records(first, a)
        write_records(second, b)
        assert a.read_bytes() == b.read_bytes()

    def test_replay_from_record_seed(self, small_spec):
        records = run_experiment(small_spec)
        record = records[-1]
        again = CELL_RUNNERS[record.command](record.parameters, record.seed)
        assert again == record.metrics

    def test_failures_recorded_not_raised(self):
        spec = ExperimentSpec(
            command="test-state",
            grid={"n": [4], "k": [1], "eps": [0.1], "delta": [0.2],
                  "case": ["nonsense"], "certifier": ["oracle"]},
            trials=1,
            seed=3,
        )
        records = run_experiment(spec)
        assert len(records) == 1
        assert records[0].status == "error"
        assert "nonsense" in records[0].error

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(command="unknown", grid={"x": [1]}, trials=1, seed=0)
        with pytest.raises(ValueError):
            ExperimentSpec(command="learn-dist", grid={"n": []}, trials=1, seed=0)
        with pytest.raises(ValueError):
            ExperimentSpec(command="learn-dist", grid={"n": [4]}, trials=0, seed=0)


class TestEmitCurve:
    def test_error_decreases_with_samples(self):
        spec = ExperimentSpec(
            command="shadows-bench",
            grid={"n": [2], "T": [500, 4000, 32000], "k": [1]},
            trials=4,
            seed=7,
        )
        records = run_experiment(spec)
        csv = emit_curve(records, "T", "max_abs_error", "mean")
        rows = [line.split(",") for line in csv.strip().splitlines()[1:]]
        values = [float(v) for _, v, _ in rows]
        assert [int(x) for x, _, _ in rows] == [500, 4000, 32000]
        assert values[0] > values[1] > values[2]
        assert all(c == "4" for _, _, c in rows)

    def test_quantile_of_constant_metric(self):
        spec = ExperimentSpec(
            command="address-distance", grid={"D": [1], "k": [1]}, trials=6, seed=0
        )
        records = run_experiment(spec)
        csv = emit_curve(records, "D", "distance", "quantile", q=0.9)
        row = csv.strip().splitlines()[1].split(",")
        assert float(row[1]) == 0.25

    def test_empty_selection_errors(self):
        with pytest.raises(ValueError):
            emit_curve([], "T", "metric")

    def test_mixed_commands_error(self):
        a = ResultRecord("learn-dist", 0, 0, {"n": 4}, 1, "ok", {"tv_exact": 0.1})
        b = ResultRecord("learn-state", 0, 0, {"n": 4}, 1, "ok", {"tv_exact": 0.1})
        with pytest.raises(ValueError):
            emit_curve([a, b], "n", "tv_exact")

    def test_missing_metric_errors(self):
        a = ResultRecord("learn-dist", 0, 0, {"n": 4}, 1, "ok", {"tv_exact": 0.1})
        with pytest.raises(ValueError):
            emit_curve([a], "n", "nope")


class TestJsonLines:
    def test_round_trip(self, small_spec, tmp_path):
        records = run_experiment(small_spec)
        path = tmp_path / "records.jsonl"
        write_records(records, path)
        back = load_records(path)
        assert back == records

    def test_record_has_no_timing(self, small_spec):
        record = run_experiment(small_spec)[0]
        payload = json.loads(record.to_json_line())
        assert "elapsed_ms" not in payload["metrics"]
        assert payload["version"].startswith("juntalab-")


class TestCommands:
    def test_learn_dist_command(self, tmp_path, capsys):
        truth, _ = dist_learn.random_junta_distribution(6, 2, np.random.default_rng(1))
        truth_path = tmp_path / "p.json"
        save_distribution(truth, truth_path)
        before = truth_path.read_bytes()
        rc = main(
            [
                "learn-dist", "--k", "2", "--eps", "0.25", "--delta", "0.1",
                "--seed", "5", "--truth", str(truth_path),
                "--out", str(tmp_path / "res.json"),
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"T", "tv_exact", "elapsed_ms", "surviving_sets"}
        assert payload["tv_exact"] <= 0.25
        stored = json.loads((tmp_path / "res.json").read_text())
        assert "elapsed_ms" not in stored
        assert truth_path.read_bytes() == before  # inputs never mutated

    def test_learn_state_command(self, tmp_path, capsys):
        truth = qstate.embed_on(
            qstate.random_density_matrix(1, np.random.default_rng(2)), (2,), 3
        )
        truth_path = tmp_path / "state.json"
        save_state(truth, truth_path)
        rc = main(
            [
                "learn-state", "--k", "1", "--eps", "0.3", "--delta", "0.1",
                "--seed", "4", "--truth", str(truth_path),
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {
            "T", "trace_distance", "frobenius_merit", "support_recovered", "elapsed_ms",
        }
        assert payload["trace_distance"] <= 2**0.5 * 0.3

    def test_test_state_command(self, tmp_path, capsys):
        truth = qstate.embed_on(
            qstate.random_density_matrix(1, np.random.default_rng(3)), (1,), 3
        )
        truth_path = tmp_path / "state.json"
        save_state(truth, truth_path)
        rc = main(
            [
                "test-state", "--k", "1", "--eps", "0.15", "--delta", "0.1",
                "--seed", "2", "--truth", str(truth_path), "--certifier", "oracle",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["decision"] == "junta-close"
        assert len(payload["transcript"]) == 3

    def test_qac0_commands(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        circuit = qac0.random_circuit(2, 1, 2, rng)
        circuit_path = tmp_path / "circuit.json"
        qac0.save_circuit(circuit, circuit_path)

        rc = main(["qac0", "choi", "--circuit", str(circuit_path),
                   "--out", str(tmp_path / "choi.json")])
        assert rc == 0
        capsys.readouterr()
        state = qstate.load_state(tmp_path / "choi.json")
        assert state.n == circuit.n + 1

        rc = main(["qac0", "analyze", "--circuit", str(circuit_path)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["concentration_residual"] <= 1e-10
        assert payload["size"] == circuit.size

    def test_shadows_bench_command(self, capsys):
        rc = main(["shadows", "bench", "--n", "2", "--T", "5000", "--k", "1", "--seed", "9"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["max_abs_error"] < 0.1

    def test_address_command(self, capsys):
        rc = main(["address", "distance", "--D", "2", "--k", "1"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload == {"degree": 3, "distance": 0.375, "lower_bound": 0.375}

    def test_run_command_exit_codes(self, tmp_path, capsys):
        spec = {"command": "address-distance", "grid": {"D": [1], "k": [0]},
                "trials": 1, "seed": 0}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        rc = main(["run", str(spec_path), "--out", str(tmp_path / "o.jsonl")])
        assert rc == 0

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"command": "unknown", "grid": {"x": [1]}}))
        assert main(["run", str(bad)]) == 1

        failing = {"command": "test-state",
                   "grid": {"n": [4], "k": [1], "eps": [0.1], "delta": [0.2],
                            "case": ["nonsense"], "certifier": ["oracle"]},
                   "trials": 1, "seed": 0}
        failing_path = tmp_path / "failing.json"
        failing_path.write_text(json.dumps(failing))
        assert main(["run", str(failing_path), "--out", str(tmp_path / "f.jsonl")]) == 2

    def test_thread_env_default(self, monkeypatch):
        from juntalab.cli import default_thread_count

        monkeypatch.setenv("JUNTALAB_THREADS", "5")
        assert default_thread_count() == 5
        monkeypatch.setenv("JUNTALAB_THREADS", "bogus")
        assert default_thread_count() == 1
        monkeypatch.delenv("JUNTALAB_THREADS")
        assert default_thread_count() == 1

    def test_curve_command(self, tmp_path, capsys):
        spec = {"command": "address-distance", "grid": {"D": [1, 2], "k": [1]},
                "trials": 2, "seed": 0}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out_path = tmp_path / "records.jsonl"
        assert main(["run", str(spec_path), "--out", str(out_path)]) == 0
        rc = main(["curve", "--records", str(out_path), "--x", "D", "--y", "distance"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "D,distance_mean,count"
        assert len(lines) == 3
