import csv
import io
import json
import os
import subprocess
import sys

import pytest

from dampen.checks import run_checks
from dampen.core import InvalidInputError
from dampen.fixtures import clustered_vector, example_graph, separable_table
from dampen.harness import (
    ExperimentSpec,
    ResultRow,
    cell_seed,
    load_dataset,
    parse_emitted_csv,
    parse_emitted_json,
    rows_to_text,
    run_experiment,
)


@pytest.fixture(scope="module")
def vector_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "values.txt"
    path.write_text("".join(f"{v}\n" for v in clustered_vector().values()))
    return str(path)


@pytest.fixture(scope="module")
def graph_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "edges.txt"
    lines = ["# demo graph"]
    lines += [f"{u} {v}" for u, v in example_graph().edges()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture(scope="module")
def table_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("data")
    table = separable_table()
    data = base / "toy.csv"
    with open(data, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["A", "B", "C", "D", "label"])
        writer.writeheader()
        for row in table.row_dicts():
            writer.writerow(row)
    schema = base / "toy.schema.json"
    schema.write_text(json.dumps({
        "A": {"categorical": [0, 1]},
        "B": {"categorical": [0, 1]},
        "C": {"categorical": [0, 1]},
        "D": {"categorical": [0, 1]},
        "class": "label",
        "classes": ["no", "yes"],
    }))
    return str(data), str(schema)


class TestSpecValidation:
    def test_empty_epsilon_list_rejected(self):
        with pytest.raises(InvalidInputError):
            ExperimentSpec("percentile", "d", epsilons=(), mechanisms=("em",))

    def test_nonpositive_epsilon_rejected(self):
        with pytest.raises(InvalidInputError):
            ExperimentSpec("percentile", "d", epsilons=(0.0,), mechanisms=("em",))

    def test_unknown_application_rejected(self):
        with pytest.raises(InvalidInputError):
            ExperimentSpec("nope", "d", epsilons=(1.0,), mechanisms=("em",))


class TestRunExperiment:
    def test_percentile_rows_and_ordering(self, vector_file):
        dataset = load_dataset(vector_file, "vector", lambda_cap=100.0)
        spec = ExperimentSpec(
            "percentile", "values", epsilons=(0.5, 2.0),
            mechanisms=("em", "ld"), base_seed=3, params={"p": 50},
        )
        rows = run_experiment(spec, dataset)
        assert [(r.mechanism, r.epsilon) for r in rows] == [
            ("em", 0.5), ("em", 2.0), ("ld", 0.5), ("ld", 2.0),
        ]
        assert all(r.metric == "expectedError" and r.dispersion == 0.0
                   for r in rows)
        by_eps = {r.epsilon: {} for r in rows}
        for r in rows:
            by_eps[r.epsilon][r.mechanism] = r.value
        for eps, vals in by_eps.items():
            assert vals["ld"] <= vals["em"] + 1e-9

    def test_pf_rows_have_dispersion(self, vector_file):
        dataset = load_dataset(vector_file, "vector", lambda_cap=100.0)
        spec = ExperimentSpec(
            "percentile", "values", epsilons=(1.0,), mechanisms=("pf",),
            params={"pf_runs": 2000},
        )
        (row,) = run_experiment(spec, dataset)
        assert row.metric == "meanError" and row.dispersion > 0

    def test_deterministic_across_runs_and_threads(self, vector_file):
        dataset = load_dataset(vector_file, "vector", lambda_cap=100.0)
        spec = ExperimentSpec(
            "percentile", "values", epsilons=(0.5, 1.0),
            mechanisms=("em", "pf", "ld", "sld"), base_seed=11,
            params={"pf_runs": 500},
        )

        def run_serialized():
            rows = run_experiment(spec, dataset)
            return [
                (r.application, r.mechanism, r.epsilon, r.metric, r.value,
                 r.dispersion)
                for r in rows
            ]

        first = run_serialized()
        assert run_serialized() == first
        os.environ["DAMPEN_THREADS"] = "4"
        try:
            assert run_serialized() == first
        finally:
            del os.environ["DAMPEN_THREADS"]

    def test_cell_seed_is_stable(self):
        assert cell_seed(1, "a", 2) == cell_seed(1, "a", 2)
        assert cell_seed(1, "a", 2) != cell_seed(1, "a", 3)

    def test_topk_accuracy_rows(self, graph_file):
        dataset = load_dataset(graph_file, "graph")
        spec = ExperimentSpec(
            "topk", "g", epsilons=(50.0,), mechanisms=("sld",),
            params={"k": 2, "runs": 10},
        )
        (row,) = run_experiment(spec, dataset)
        assert row.metric == "topkAccuracy"
        assert 0.0 <= row.value <= 1.0

    def test_tree_rows(self, table_files):
        data, schema = table_files
        dataset = load_dataset(data, "table", schema=schema)
        spec = ExperimentSpec(
            "tree", "toy", epsilons=(1e6,), mechanisms=("global",),
            params={"depth": 4, "folds": 5},
        )
        (row,) = run_experiment(spec, dataset)
        assert row.metric == "cvAccuracy"
        assert row.value == 1.0


class TestEmit:
    def _rows(self):
        return [
            ResultRow("percentile", "d", "em", 1.0, "expectedError", 4.2, 0.0, 1.5),
            ResultRow("percentile", "d", "ld", 1.0, "expectedError", 4.0, 0.0, 2.5),
        ]

    def test_json_round_trip(self):
        text = rows_to_text(self._rows(), "json")
        doc = json.loads(text)
        assert list(doc) == ["experiment", "params", "results"]
        assert parse_emitted_json(text) == self._rows()

    def test_csv_round_trip_matches_json(self):
        rows = self._rows()
        from_csv = parse_emitted_csv(rows_to_text(rows, "csv"))
        from_json = parse_emitted_json(rows_to_text(rows, "json"))
        assert from_csv == from_json == rows

    def test_single_row_results_array(self):
        doc = json.loads(rows_to_text(self._rows()[:1], "json"))
        assert len(doc["results"]) == 1

    def test_empty_rows_rejected(self):
        with pytest.raises(InvalidInputError):
            rows_to_text([], "json")


class TestChecks:
    def test_default_suites_pass(self):
        report = run_checks("core", seed=0)
        assert report.passed
        assert any("PASS" in line for line in report.lines())

    def test_unknown_suite_rejected(self):
        with pytest.raises(ValueError):
            run_checks("bogus")


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "dampen.cli", *args],
        capture_output=True, text=True, timeout=300,
    )


class TestCli:
    def test_percentile_json(self, vector_file):
        proc = run_cli(
            "percentile", "--data", vector_file, "--lambda", "100",
            "--epsilon", "0.5,1", "--mechanism", "em,sld",
        )
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(proc.stdout)
        assert len(doc["results"]) == 4

    def test_output_file_and_csv(self, vector_file, tmp_path):
        out = tmp_path / "rows.csv"
        proc = run_cli(
            "percentile", "--data", vector_file, "--lambda", "100",
            "--epsilon", "1", "--mechanism", "em", "--output", "csv",
            "--out", str(out),
        )
        assert proc.returncode == 0
        parsed = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(parsed) == 1 and parsed[0]["mechanism"] == "em"

    def test_same_seed_same_bytes(self, vector_file):
        args = (
            "percentile", "--data", vector_file, "--lambda", "100",
            "--epsilon", "1", "--mechanism", "em,pf", "--seed", "5",
            "--runs", "300",
        )
        assert run_cli(*args).stdout == run_cli(*args).stdout

    def test_topk(self, graph_file):
        proc = run_cli(
            "topk", "--graph", graph_file, "--k", "2", "--epsilon", "20",
            "--mechanism", "ld,sld", "--runs", "5", "--output", "csv",
        )
        assert proc.returncode == 0, proc.stderr

    def test_tree(self, table_files):
        data, schema = table_files
        proc = run_cli(
            "tree", "--data", data, "--schema", schema, "--depth", "2",
            "--epsilon", "5", "--variant", "shifted", "--folds", "4",
        )
        assert proc.returncode == 0, proc.stderr

    def test_check_exit_zero(self):
        proc = run_cli("check", "core")
        assert proc.returncode == 0
        assert "PASS" in proc.stdout

    def test_missing_file_is_io_error(self):
        proc = run_cli(
            "percentile", "--data", "/definitely/missing", "--lambda", "10",
            "--epsilon", "1",
        )
        assert proc.returncode == 3

    def test_validation_error_exit_one(self, vector_file):
        proc = run_cli(
            "percentile", "--data", vector_file, "--lambda", "1",
            "--epsilon", "1",
        )   # values exceed the cap
        assert proc.returncode == 1

    def test_bad_flags_exit_one(self):
        proc = run_cli("percentile", "--lambda", "10", "--epsilon", "1")
        assert proc.returncode == 1


class TestLoaderRejections:
    def test_csv_value_outside_domain_is_named(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("A,label\nweird,no\n")
        schema = tmp_path / "bad.schema.json"
        schema.write_text(json.dumps({
            "A": {"categorical": ["x", "y"]},
            "class": "label", "classes": ["no", "yes"],
        }))
        with pytest.raises(InvalidInputError, match="'weird'"):
            load_dataset(str(data), "table", schema=str(schema))

    def test_check_budget_overrun_is_reported(self):
        report = run_checks("core", seed=0, budget_s=1e-9)
        assert not report.passed
        assert any(r.suite == "runtime" and not r.passed for r in report.results)
