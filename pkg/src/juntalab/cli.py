"""Experiment driver and command-line interface.

Grid experiments are replayable: every cell/trial derives its own integer
seed from (master seed, cell index, trial index), records are canonically
ordered and serialized with sorted keys, and no wall-clock data enters the
record stream, so reruns at any thread count produce byte-identical output.
Interactive single-run commands do print an ``elapsed_ms`` alongside their
metrics; when they also write ``--out`` files the timing field is dropped.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dist_learn, qac0, qstate, shadows, state_learn, state_test
from .hypercube import load_distribution, mask_to_variables, tv_distance

ARTIFACT_VERSION = "juntalab-0.1.0"
THREADS_ENV = "JUNTALAB_THREADS"


def _derive_seed(*parts: int) -> int:
    words = np.random.SeedSequence([int(p) for p in parts]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def default_thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def frobenius_merit(truth, approx, scale_qubits: int) -> float:
    """Dimension-scaled squared Frobenius error 2^scale_qubits * ||a - b||_F^2."""
    return float(2**scale_qubits * qstate.frobenius_distance(truth, approx) ** 2)


def support_recovered(truth: qstate.DensityMatrix, spectrum: qstate.PauliSpectrum,
                      drop_tol: float = 1e-12) -> bool:
    """Whether the learned Pauli support matches the truth's nonzero support."""
    exact = qstate.pauli_expand(truth, drop_tol=drop_tol)
    return set(exact.strings()) == set(spectrum.strings())


# ---------------------------------------------------------------------------
# Cell runners: one metrics dict per (parameters, seed), fully deterministic.
# ---------------------------------------------------------------------------


def _run_learn_dist(params: dict, seed: int) -> dict:
    n, k = int(params["n"]), int(params["k"])
    eps, delta = float(params["eps"]), float(params["delta"])
    c = float(params.get("c", dist_learn.DEFAULT_C))
    instance_rng = np.random.default_rng([seed, 0])
    truth, variables = dist_learn.random_junta_distribution(n, k, instance_rng)
    sampler = dist_learn.SimulatedSampler(truth, _derive_seed(seed, 1))
    result = dist_learn.learn_junta_distribution(
        sampler, dist_learn.LearnerConfig(k=k, eps=eps, delta=delta, c=c)
    )
    return {
        "T": result.sample_count,
        "tv_exact": tv_distance(result.distribution, truth),
        "surviving_sets": [list(mask_to_variables(m, n)) for m, _ in result.surviving.items()],
        "junta_variables": list(result.junta_variables),
        "planted_variables": list(variables),
    }


def _planted_junta_state(n: int, k: int, rng: np.random.Generator):
    variables = tuple(sorted(int(v) + 1 for v in rng.choice(n, size=k, replace=False)))
    block = qstate.random_density_matrix(k, rng) if k else qstate.DensityMatrix(np.ones((1, 1)))
    return qstate.embed_on(block, variables, n), variables


def _run_learn_state(params: dict, seed: int) -> dict:
    n, k = int(params["n"]), int(params["k"])
    eps, delta = float(params["eps"]), float(params["delta"])
    c = float(params.get("c", state_learn.DEFAULT_C))
    truth, variables = _planted_junta_state(n, k, np.random.default_rng([seed, 0]))
    access = state_learn.SimulatedStateAccess(truth, _derive_seed(seed, 1))
    result = state_learn.learn_junta_state(
        access, k, eps, delta, c, basis_seed=_derive_seed(seed, 2)
    )
    return {
        "T": result.copies_used,
        "trace_distance": qstate.trace_distance(result.psd_projected, truth),
        "frobenius_merit": frobenius_merit(truth, result.matrix, n),
        "support_recovered": support_recovered(truth, result.spectrum),
        "planted_variables": list(variables),
    }


def _run_test_state(params: dict, seed: int) -> dict:
    n, k = int(params["n"]), int(params["k"])
    eps, delta = float(params["eps"]), float(params["delta"])
    case = str(params.get("case", "close"))
    certifier_kind = str(params.get("certifier", "oracle"))
    rng = np.random.default_rng([seed, 0])
    if case == "close":
        truth, _ = _planted_junta_state(n, k, rng)
        want = state_test.JUNTA_CLOSE
    elif case == "far":
        amplitudes = np.zeros(1 << n)
        amplitudes[0] = 1.0
        truth = qstate.DensityMatrix.pure(amplitudes)
        want = state_test.JUNTA_FAR
    else:
        raise ValueError(f"unknown case {case!r}")
    access = state_learn.SimulatedStateAccess(truth, _derive_seed(seed, 1))
    if certifier_kind == "oracle":
        certifier = state_test.OracleCertifier(truth)
    elif certifier_kind == "frobenius":
        certifier = state_test.FrobeniusCertifier(seed=_derive_seed(seed, 2))
    else:
        raise ValueError(f"unknown certifier {certifier_kind!r}")
    verdict = state_test.test_junta(
        access, k, eps, delta, certifier, seed=_derive_seed(seed, 3)
    )
    return {
        "decision": verdict.decision,
        "correct": verdict.decision == want,
        "copies_used": verdict.copies_used,
        "best_K": list(verdict.best_variables),
    }


def _run_shadows_bench(params: dict, seed: int) -> dict:
    n, total = int(params["n"]), int(params["T"])
    k = int(params.get("k", 2))
    truth = qstate.random_density_matrix(n, np.random.default_rng([seed, 0]))
    shadow_set = shadows.collect_shadows(truth, total, _derive_seed(seed, 1))
    estimates = shadows.estimate_lowdeg(shadow_set, k)
    exact = qstate.pauli_tensor(truth).reshape(-1)
    errors = [abs(value - exact[p.packed]) for p, value in estimates.items()]
    return {
        "T": total,
        "k": k,
        "max_abs_error": max(errors),
        "rms_error": math.sqrt(sum(e * e for e in errors) / len(errors)),
    }


def _run_address(params: dict, seed: int) -> dict:
    d, k = int(params["D"]), int(params["k"])
    f = qac0.address_function(d)
    from .hypercube import degree, fourier_transform

    return {
        "degree": degree(fourier_transform(f)),
        "distance": qac0.boolean_distance_to_junta(f, k),
        "lower_bound": ((1 << d) - k) / (1 << (d + 1)),
    }


def _run_qac0_analyze(params: dict, seed: int) -> dict:
    n, a = int(params["n"]), int(params["a"])
    depth = int(params.get("depth", 2))
    arity = int(params.get("arity", 3))
    circuit = qac0.random_circuit(n, a, depth, np.random.default_rng([seed, 0]))
    cone = qac0.light_cone(circuit, circuit.output_qubit)
    full = qac0.choi_state_full(circuit)
    _, residual = qac0.concentration_search(full.state, len(cone) + 1)
    mass, removed = qac0.removal_pauli_mass_shift(circuit, arity)
    return {
        "size": circuit.size,
        "depth": circuit.depth,
        "cone_size": len(cone),
        "concentration_residual": residual,
        "removal_mass_shift": mass,
        "removed_gates": removed,
    }


def _run_qac0_learn(params: dict, seed: int) -> dict:
    n, a = int(params["n"]), int(params["a"])
    depth = int(params.get("depth", 1))
    eps, delta = float(params["eps"]), float(params["delta"])
    c = float(params.get("c", state_learn.DEFAULT_C))
    circuit = qac0.random_circuit(n, a, depth, np.random.default_rng([seed, 0]))
    truth = qac0.choi_state_with_ancilla(circuit)
    access = state_learn.SimulatedStateAccess(truth.state, _derive_seed(seed, 1))
    result = state_learn.learn_qac0_choi(
        access, circuit.size, circuit.depth, a, eps, delta, c,
        basis_seed=_derive_seed(seed, 2),
    )
    return {
        "T": result.copies_used,
        "junta_arity": result.junta_arity,
        "frobenius_merit": frobenius_merit(truth.state, result.matrix, n),
        "trace_distance": qstate.trace_distance(result.psd_projected, truth.state),
    }


CELL_RUNNERS = {
    "learn-dist": _run_learn_dist,
    "learn-state": _run_learn_state,
    "test-state": _run_test_state,
    "shadows-bench": _run_shadows_bench,
    "address-distance": _run_address,
    "qac0-analyze": _run_qac0_analyze,
    "qac0-learn": _run_qac0_learn,
}


# ---------------------------------------------------------------------------
# Experiment spec, records, runner, curves.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    grid: dict
    trials: int
    seed: int
    out: str | None = None

    def __post_init__(self) -> None:
        if self.command not in CELL_RUNNERS:
            raise ValueError(f"unknown experiment command {self.command!r}")
        if not self.grid or any(not isinstance(v, list) or not v for v in self.grid.values()):
            raise ValueError("grid must map parameter names to nonempty lists")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSpec":
        return cls(
            command=str(payload["command"]),
            grid=dict(payload["grid"]),
            trials=int(payload.get("trials", 1)),
            seed=int(payload.get("seed", 0)),
            out=payload.get("out"),
        )

    def cells(self) -> list[dict]:
        keys = sorted(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]


@dataclass(frozen=True)
class ResultRecord:
    command: str
    cell_index: int
    trial_index: int
    parameters: dict
    seed: int
    status: str
    metrics: dict = field(default_factory=dict)
    error: str | None = None

    def to_json_line(self) -> str:
        payload = {
            "command": self.command,
            "cell": self.cell_index,
            "trial": self.trial_index,
            "parameters": self.parameters,
            "seed": self.seed,
            "status": self.status,
            "metrics": self.metrics,
            "version": ARTIFACT_VERSION,
        }
        if self.error is not None:
            payload["error"] = self.error
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[ResultRecord]:
    """One record per (cell, trial); failures are recorded, never raised.

    Output ordering is canonical (cell, then trial) regardless of scheduling.
    """
    runner = CELL_RUNNERS[spec.command]
    cells = spec.cells()
    jobs = [(ci, ti) for ci in range(len(cells)) for ti in range(spec.trials)]

    def work(job: tuple[int, int]) -> ResultRecord:
        ci, ti = job
        params = cells[ci]
        seed = _derive_seed(spec.seed, ci, ti)
        try:
            metrics = runner(params, seed)
            return ResultRecord(spec.command, ci, ti, params, seed, "ok", metrics)
        except Exception as exc:  # recorded per cell, grid keeps going
            return ResultRecord(spec.command, ci, ti, params, seed, "error", {}, repr(exc))

    if threads <= 1:
        records = [work(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, jobs))
    records.sort(key=lambda r: (r.cell_index, r.trial_index))
    return records


def write_records(records: list[ResultRecord], path) -> None:
    Path(path).write_text("\n".join(r.to_json_line() for r in records) + "\n")


def load_records(path) -> list[ResultRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        records.append(
            ResultRecord(
                command=payload["command"],
                cell_index=int(payload["cell"]),
                trial_index=int(payload["trial"]),
                parameters=payload["parameters"],
                seed=int(payload["seed"]),
                status=payload["status"],
                metrics=payload.get("metrics", {}),
                error=payload.get("error"),
            )
        )
    return records


def emit_curve(records, x_param: str, y_metric: str, aggregator: str = "mean", q: float = 0.9) -> str:
    """CSV with one row per x value: aggregated metric and trial count."""
    usable = [r for r in records if r.status == "ok"]
    if not usable:
        raise ValueError("no successful records selected")
    commands = {r.command for r in usable}
    if len(commands) != 1:
        raise ValueError(f"records mix commands {sorted(commands)}")
    if aggregator not in ("mean", "quantile"):
        raise ValueError(f"unknown aggregator {aggregator!r}")
    groups: dict = {}
    for record in usable:
        if x_param not in record.parameters:
            raise ValueError(f"records missing parameter {x_param!r}")
        if y_metric not in record.metrics:
            raise ValueError(f"records missing metric {y_metric!r}")
        groups.setdefault(record.parameters[x_param], []).append(float(record.metrics[y_metric]))
    lines = [f"{x_param},{y_metric}_{aggregator},count"]
    for x_value in sorted(groups):
        values = groups[x_value]
        agg = float(np.mean(values)) if aggregator == "mean" else float(np.quantile(values, q))
        lines.append(f"{x_value},{agg!r},{len(values)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Single-run command handlers.
# ---------------------------------------------------------------------------


def _emit(payload: dict, out: str | None) -> None:
    print(json.dumps(payload, sort_keys=True))
    if out:
        stripped = {k: v for k, v in payload.items() if k != "elapsed_ms"}
        Path(out).write_text(json.dumps(stripped, sort_keys=True) + "\n")


def _check_declared_n(declared, actual: int) -> None:
    if declared is not None and declared != actual:
        raise ValueError(f"--n {declared} does not match the truth file ({actual} variables)")


def _cmd_learn_dist(args) -> int:
    truth = load_distribution(args.truth)
    _check_declared_n(args.n, truth.n)
    sampler = dist_learn.SimulatedSampler(truth, _derive_seed(args.seed, 1))
    cfg = dist_learn.LearnerConfig(k=args.k, eps=args.eps, delta=args.delta, c=args.c)
    start = time.perf_counter()
    result = dist_learn.learn_junta_distribution(sampler, cfg)
    elapsed = (time.perf_counter() - start) * 1000.0
    _emit(
        {
            "T": result.sample_count,
            "tv_exact": tv_distance(result.distribution, truth),
            "elapsed_ms": elapsed,
            "surviving_sets": [
                list(mask_to_variables(m, truth.n)) for m, _ in result.surviving.items()
            ],
        },
        args.out,
    )
    return 0


def _cmd_learn_state(args) -> int:
    truth = qstate.load_state(args.truth)
    _check_declared_n(args.n, truth.n)
    access = state_learn.SimulatedStateAccess(truth, _derive_seed(args.seed, 1))
    start = time.perf_counter()
    result = state_learn.learn_junta_state(
        access, args.k, args.eps, args.delta, args.c, basis_seed=_derive_seed(args.seed, 2)
    )
    elapsed = (time.perf_counter() - start) * 1000.0
    _emit(
        {
            "T": result.copies_used,
            "trace_distance": qstate.trace_distance(result.psd_projected, truth),
            "frobenius_merit": frobenius_merit(truth, result.matrix, truth.n),
            "support_recovered": support_recovered(truth, result.spectrum),
            "elapsed_ms": elapsed,
        },
        args.out,
    )
    return 0


def _cmd_test_state(args) -> int:
    truth = qstate.load_state(args.truth)
    _check_declared_n(args.n, truth.n)
    access = state_learn.SimulatedStateAccess(truth, _derive_seed(args.seed, 1))
    if args.certifier == "oracle":
        certifier = state_test.OracleCertifier(truth)
    else:
        certifier = state_test.FrobeniusCertifier(seed=_derive_seed(args.seed, 2))
    verdict = state_test.test_junta(
        access, args.k, args.eps, args.delta, certifier, seed=_derive_seed(args.seed, 3)
    )
    _emit(verdict.to_dict(), args.out)
    return 0


def _cmd_qac0_choi(args) -> int:
    circuit = qac0.load_circuit(args.circuit)
    choi = (
        qac0.choi_state_full(circuit)
        if args.kind == "full"
        else qac0.choi_state_with_ancilla(circuit)
    )
    qstate.save_state(choi.state, args.out)
    print(json.dumps({"kind": args.kind, "qubits": choi.state.n, "out": args.out}))
    return 0


def _cmd_qac0_analyze(args) -> int:
    circuit = qac0.load_circuit(args.circuit)
    cone = qac0.light_cone(circuit, circuit.output_qubit)
    payload: dict = {
        "size": circuit.size,
        "depth": circuit.depth,
        "light_cone": list(cone),
    }
    if circuit.total_qubits <= qac0.MAX_FULL_CHOI_CIRCUIT_QUBITS:
        full = qac0.choi_state_full(circuit)
        best, residual = qac0.concentration_search(full.state, len(cone) + 1)
        mass, removed = qac0.removal_pauli_mass_shift(circuit, args.arity)
        payload.update(
            {
                "concentration_K": list(best),
                "concentration_residual": residual,
                "removal_mass_shift": mass,
                "removed_gates": removed,
            }
        )
    _emit(payload, args.out)
    return 0


def _cmd_qac0_learn(args) -> int:
    circuit = qac0.load_circuit(args.circuit)
    truth = qac0.choi_state_with_ancilla(circuit)
    access = state_learn.SimulatedStateAccess(truth.state, _derive_seed(args.seed, 1))
    result = state_learn.learn_qac0_choi(
        access, circuit.size, circuit.depth, circuit.a, args.eps, args.delta, args.c,
        basis_seed=_derive_seed(args.seed, 2),
    )
    _emit(
        {
            "T": result.copies_used,
            "junta_arity": result.junta_arity,
            "frobenius_merit": frobenius_merit(truth.state, result.matrix, circuit.n),
            "trace_distance": qstate.trace_distance(result.psd_projected, truth.state),
        },
        args.out,
    )
    return 0


def _cmd_shadows_bench(args) -> int:
    if args.truth:
        truth = qstate.load_state(args.truth)
    else:
        truth = qstate.random_density_matrix(args.n, np.random.default_rng([args.seed, 0]))
    start = time.perf_counter()
    shadow_set = shadows.collect_shadows(truth, args.T, _derive_seed(args.seed, 1))
    estimates = shadows.estimate_lowdeg(shadow_set, args.k)
    elapsed = (time.perf_counter() - start) * 1000.0
    exact = qstate.pauli_tensor(truth).reshape(-1)
    errors = [abs(v - exact[p.packed]) for p, v in estimates.items()]
    _emit(
        {
            "T": args.T,
            "k": args.k,
            "max_abs_error": max(errors),
            "rms_error": math.sqrt(sum(e * e for e in errors) / len(errors)),
            "elapsed_ms": elapsed,
        },
        args.out,
    )
    return 0


def _cmd_address(args) -> int:
    f = qac0.address_function(args.D)
    from .hypercube import degree, fourier_transform

    _emit(
        {
            "degree": degree(fourier_transform(f)),
            "distance": qac0.boolean_distance_to_junta(f, args.k),
            "lower_bound": ((1 << args.D) - args.k) / (1 << (args.D + 1)),
        },
        args.out,
    )
    return 0


def _cmd_run(args) -> int:
    try:
        spec = ExperimentSpec.from_dict(json.loads(Path(args.spec).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        print(f"invalid experiment spec: {exc}", file=sys.stderr)
        return 1
    records = run_experiment(spec, threads=args.threads)
    out = args.out or spec.out
    if out:
        write_records(records, out)
    else:
        for record in records:
            print(record.to_json_line())
    failures = sum(r.status != "ok" for r in records)
    if failures:
        print(f"{failures}/{len(records)} records failed", file=sys.stderr)
        return 2
    return 0


def _cmd_curve(args) -> int:
    records = load_records(args.records)
    aggregator, q = ("quantile", float(args.agg[1:])) if args.agg.startswith("q") else (args.agg, 0.9)
    csv = emit_curve(records, args.x, args.y, aggregator, q)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        print(csv, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="juntalab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, c_default=8.0):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        return p

    p = common(sub.add_parser("learn-dist", help="learn a junta distribution from samples"))
    p.add_argument("--n", type=int, required=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--c", type=float, default=dist_learn.DEFAULT_C)
    p.add_argument("--truth", required=True, help="distribution JSON file")
    p.set_defaults(func=_cmd_learn_dist)

    p = common(sub.add_parser("learn-state", help="learn a junta state from Pauli shadows"))
    p.add_argument("--n", type=int, required=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--c", type=float, default=state_learn.DEFAULT_C)
    p.add_argument("--truth", required=True, help="state JSON file")
    p.set_defaults(func=_cmd_learn_state)

    p = common(sub.add_parser("test-state", help="test whether a state is close to a junta"))
    p.add_argument("--n", type=int, required=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--truth", required=True, help="state JSON file")
    p.add_argument("--certifier", choices=("frobenius", "oracle"), default="frobenius")
    p.set_defaults(func=_cmd_test_state)

    qac0_parser = sub.add_parser("qac0", help="circuit Choi-state tooling")
    qac0_sub = qac0_parser.add_subparsers(dest="qac0_command", required=True)

    p = qac0_sub.add_parser("choi", help="write a circuit's Choi state")
    p.add_argument("--circuit", required=True)
    p.add_argument("--kind", choices=("sigma", "full"), default="sigma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_qac0_choi)

    p = common(qac0_sub.add_parser("analyze", help="light cone and spectrum concentration"))
    p.add_argument("--circuit", required=True)
    p.add_argument("--arity", type=int, default=3)
    p.set_defaults(func=_cmd_qac0_analyze)

    p = common(qac0_sub.add_parser("learn", help="learn a circuit's Choi state"))
    p.add_argument("--circuit", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--c", type=float, default=state_learn.DEFAULT_C)
    p.set_defaults(func=_cmd_qac0_learn)

    shadows_parser = sub.add_parser("shadows", help="shadow estimation tooling")
    shadows_sub = shadows_parser.add_subparsers(dest="shadows_command", required=True)
    p = common(shadows_sub.add_parser("bench", help="estimation error against a known state"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=_cmd_shadows_bench)

    address_parser = sub.add_parser("address", help="address-function tooling")
    address_sub = address_parser.add_subparsers(dest="address_command", required=True)
    p = common(address_sub.add_parser("distance", help="exact distance to k-juntas"))
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=_cmd_address)

    p = sub.add_parser("run", help="run a grid experiment spec")
    p.add_argument("spec", help="experiment spec JSON file")
    p.add_argument("--threads", type=int, default=default_thread_count())
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("curve", help="aggregate records into a CSV curve")
    p.add_argument("--records", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--agg", default="mean", help="'mean' or 'q<float>' for a quantile")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_curve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
