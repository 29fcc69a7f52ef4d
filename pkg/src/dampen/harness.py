"""Experiment orchestration: run (application, mechanism, epsilon, seed)
grids, derive metrics from exact distributions where available, and emit
machine-readable rows.

Determinism contract: every grid cell derives its own generator from the
base seed and the cell coordinates, so results are byte-identical across
runs and independent of scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BudgetAccountant, InvalidInputError
from . import graphs as graphs_mod
from . import mechanisms
from . import percentile as percentile_mod
from . import trees as trees_mod
from .sensitivity import flatten_sensitivity

#: Monte Carlo defaults: permute-and-flip error runs and top-k simulations.
DEFAULT_PF_RUNS = 100_000
DEFAULT_TOPK_RUNS = 100

APPLICATIONS = ("percentile", "topk", "tree", "mechanism-compare")


@dataclass(frozen=True)
class ExperimentSpec:
    application: str
    dataset_ref: str
    epsilons: tuple
    mechanisms: tuple
    base_seed: int = 0
    runs: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.application not in APPLICATIONS:
            raise InvalidInputError(f"unknown application {self.application!r}")
        if not self.epsilons:
            raise InvalidInputError("epsilon list must be nonempty")
        if any(not (e > 0) for e in self.epsilons):
            raise InvalidInputError("all epsilons must be positive")
        if not self.mechanisms:
            raise InvalidInputError("mechanism list must be nonempty")
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))


@dataclass(frozen=True)
class ResultRow:
    application: str
    dataset: str
    mechanism: str
    epsilon: float
    metric: str
    value: float
    dispersion: float
    runtime_ms: float

    FIELDS = (
        "application", "dataset", "mechanism", "epsilon",
        "metric", "value", "dispersion", "runtime_ms",
    )


def cell_seed(base_seed: int, *coords) -> int:
    """Stable per-cell seed: hash of the base seed and cell coordinates."""
    text = "|".join([str(base_seed)] + [str(c) for c in coords])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def load_dataset(path: str, kind: str, **options):
    """Dispatch to the per-model loaders; see each for format details."""
    if kind == "vector":
        if "lambda_cap" not in options:
            raise InvalidInputError("numeric vectors need a lambda_cap")
        return percentile_mod.load_vector(path, options["lambda_cap"])
    if kind == "graph":
        graph, _report = graphs_mod.load_edge_list(path)
        return graph
    if kind == "table":
        if "schema" not in options:
            raise InvalidInputError("tables need a schema sidecar path")
        return trees_mod.load_table(path, options["schema"])
    raise InvalidInputError(f"unknown dataset kind {kind!r}")


def _percentile_setup(spec: ExperimentSpec, dataset):
    p = int(spec.params.get("p", 50))
    query = percentile_mod.PercentileQuery(p, len(dataset))
    problem = percentile_mod.percentile_problem(dataset, query)
    delta = percentile_mod.bounded_ls_percentile(dataset, query)
    flat = flatten_sensitivity(delta, problem)
    return problem, {"ld": flat, "sld": delta}


def _percentile_cell(problem, deltas, mechanism, epsilon, rng, runs):
    if mechanism in ("em", "ld", "sld"):
        _, dist = mechanisms.select(
            mechanism, problem, epsilon, rng, delta=deltas.get(mechanism)
        )
        return "expectedError", mechanisms.expected_error(dist, problem), 0.0
    # permute-and-flip has no closed-form distribution; Monte Carlo mean
    u = {r: problem.utility(problem.database, r) for r in problem.candidates}
    u_star = max(u.values())
    errors = np.empty(runs)
    for i in range(runs):
        picked = mechanisms.select_permute_and_flip(problem, epsilon, rng)
        errors[i] = u_star - u[picked]
    stderr = float(errors.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return "meanError", float(errors.mean()), stderr


def run_experiment(spec: ExperimentSpec, dataset=None) -> list[ResultRow]:
    """Run every (mechanism, epsilon) cell of the spec and return stable-
    ordered rows.  ``DAMPEN_THREADS`` caps the parallel cell evaluation;
    ordering and values do not depend on the schedule."""
    if dataset is None:
        raise InvalidInputError("run_experiment needs a loaded dataset")
    record_runtime = bool(spec.params.get("record_runtime", False))

    def elapsed_ms(t0: float) -> float:
        # wall clock is only recorded on request: the determinism contract
        # promises byte-identical output for a fixed (spec, seed)
        return (time.perf_counter() - t0) * 1e3 if record_runtime else 0.0

    jobs: list[tuple] = []
    if spec.application in ("percentile", "mechanism-compare"):
        problem, deltas = _percentile_setup(spec, dataset)
        runs = int(spec.params.get("pf_runs", DEFAULT_PF_RUNS))

        def make_job(mech, eps_ix, eps):
            def job():
                rng = np.random.default_rng(
                    cell_seed(spec.base_seed, spec.application, mech, eps_ix)
                )
                t0 = time.perf_counter()
                metric, value, dispersion = _percentile_cell(
                    problem, deltas, mech, eps, rng, runs
                )
                return ResultRow(
                    application=spec.application,
                    dataset=spec.dataset_ref,
                    mechanism=mech,
                    epsilon=eps,
                    metric=metric,
                    value=value,
                    dispersion=dispersion,
                    runtime_ms=elapsed_ms(t0),
                )
            return job

        for mech in spec.mechanisms:
            for eps_ix, eps in enumerate(spec.epsilons):
                jobs.append(make_job(mech, eps_ix, eps))

    elif spec.application == "topk":
        k = int(spec.params.get("k", 1))
        runs = int(spec.params.get("runs", DEFAULT_TOPK_RUNS))

        def make_job(mech, eps_ix, eps):
            def job():
                t0 = time.perf_counter()
                scores = np.empty(runs)
                for run_ix in range(runs):
                    rng = np.random.default_rng(
                        cell_seed(spec.base_seed, "topk", mech, eps_ix, run_ix)
                    )
                    result = graphs_mod.priv_topk(
                        dataset, eps, k, mech, rng,
                        accountant=BudgetAccountant(),
                    )
                    scores[run_ix] = graphs_mod.topk_accuracy(result, dataset, k)
                stderr = (
                    float(scores.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
                )
                return ResultRow(
                    application="topk",
                    dataset=spec.dataset_ref,
                    mechanism=mech,
                    epsilon=eps,
                    metric="topkAccuracy",
                    value=float(scores.mean()),
                    dispersion=stderr,
                    runtime_ms=elapsed_ms(t0),
                )
            return job

        for mech in spec.mechanisms:
            for eps_ix, eps in enumerate(spec.epsilons):
                jobs.append(make_job(mech, eps_ix, eps))

    elif spec.application == "tree":
        depth = int(spec.params.get("depth", 2))
        folds = int(spec.params.get("folds", 10))

        def make_job(variant, eps_ix, eps):
            def job():
                t0 = time.perf_counter()
                score = trees_mod.cross_validate(
                    dataset, depth, eps, variant,
                    seed=cell_seed(spec.base_seed, "tree", variant, eps_ix),
                    folds=folds,
                )
                return ResultRow(
                    application="tree",
                    dataset=spec.dataset_ref,
                    mechanism=variant,
                    epsilon=eps,
                    metric="cvAccuracy",
                    value=score,
                    dispersion=0.0,
                    runtime_ms=elapsed_ms(t0),
                )
            return job

        for variant in spec.mechanisms:
            if variant not in trees_mod.VARIANTS:
                raise InvalidInputError(
                    f"tree variant must be one of {trees_mod.VARIANTS}, "
                    f"got {variant!r}"
                )
            for eps_ix, eps in enumerate(spec.epsilons):
                jobs.append(make_job(variant, eps_ix, eps))

    threads = int(os.environ.get("DAMPEN_THREADS", "1") or "1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda j: j(), jobs))
    else:
        rows = [job() for job in jobs]
    return rows


def emit(rows: Sequence[ResultRow], fmt: str, sink) -> None:
    """Write rows as JSON ({"experiment":…, "params":…, "results":[…]}) or
    CSV with the fixed ResultRow header."""
    if not rows:
        raise InvalidInputError("no rows to emit")
    if fmt == "json":
        doc = {
            "experiment": rows[0].application,
            "params": {"datasets": sorted({r.dataset for r in rows})},
            "results": [
                {k: getattr(r, k) for k in ResultRow.FIELDS} for r in rows
            ],
        }
        json.dump(doc, sink, indent=2)
        sink.write("\n")
    elif fmt == "csv":
        writer = csv.writer(sink)
        writer.writerow(ResultRow.FIELDS)
        for r in rows:
            writer.writerow([getattr(r, k) for k in ResultRow.FIELDS])
    else:
        raise InvalidInputError(f"unknown output format {fmt!r}")


def rows_to_text(rows: Sequence[ResultRow], fmt: str) -> str:
    buf = io.StringIO()
    emit(rows, fmt, buf)
    return buf.getvalue()


def parse_emitted_json(text: str) -> list[ResultRow]:
    doc = json.loads(text)
    return [ResultRow(**entry) for entry in doc["results"]]


def parse_emitted_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for entry in reader:
        rows.append(
            ResultRow(
                application=entry["application"],
                dataset=entry["dataset"],
                mechanism=entry["mechanism"],
                epsilon=float(entry["epsilon"]),
                metric=entry["metric"],
                value=float(entry["value"]),
                dispersion=float(entry["dispersion"]),
                runtime_ms=float(entry["runtime_ms"]),
            )
        )
    return rows
