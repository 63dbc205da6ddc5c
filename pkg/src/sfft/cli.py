"""Experiment harness and command-line entry point.

Runs batch recovery experiments described by a declarative key-value spec
file (optionally overridden by flags), aggregates per-trial statistics into
one row per parameter combination, and emits the table as CSV or JSON.  Also
exposes the sampling-parameter planner as a subcommand.

Exit codes: 0 success, 2 configuration error, 3 oracle-call budget exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np

from .detect import DetectionConfig, OracleInterrupt, plan_b, plan_r, sparse_fft
from .lattice import SearchBox, SparseSpectrum
from .testbed import (
    bspline_exact_coefficients,
    bspline_norm_sq,
    bspline_test_function,
    gen_random_sparse_poly,
    NoisyOracle,
    relative_l2_error,
    relative_spectrum_l2_error,
    sigma_for_snr,
)

__all__ = [
    "ExperimentSpec",
    "ConfigError",
    "BudgetExceeded",
    "parse_spec_file",
    "build_spec",
    "run_experiment",
    "emit",
    "main",
]

CSV_HEADER = (
    "scenario,d,N,sparsity,snr_db,delta,r,b,lattice_kind,reps,"
    "max_samples,min_correct,success_rate,max_rel_err,seconds"
)

SCENARIOS = ("exact_recovery", "noisy_recovery", "bspline_sparse", "bspline_threshold")

_BSPLINE_DIM = 10


class ConfigError(ValueError):
    """Invalid experiment specification (CLI exit code 2)."""


class BudgetExceeded(OracleInterrupt):
    """The oracle-call budget would be exceeded (CLI exit code 3)."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one batch experiment.

    ``sparsity``, ``snr_db``, ``delta`` and ``r`` are swept as a full product;
    each combination contributes one output row aggregated over
    ``repetitions`` trials with fresh ground truth and detection seeds.
    """

    scenario: str
    dimensions: int
    extent: int
    sparsity: tuple[int, ...] = ()
    snr_db: tuple[float, ...] = ()
    delta: tuple[float, ...] = (1e-12,)
    r: tuple[int, ...] = (1,)
    b: int = 10
    s: int | None = None
    s_local: int | None = None
    repetitions: int = 10
    seed: int = 0
    lattice_kind: str = "multiple"
    coeff_model: str | None = None
    out: str | None = None
    format: str = "csv"
    jobs: int = 1
    budget: int | None = None
    timings: bool = False

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose one of {', '.join(SCENARIOS)}")
        if self.dimensions < 1:
            raise ConfigError("dimensions must be >= 1")
        if self.extent < 1:
            raise ConfigError("N must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.b < 1:
            raise ConfigError("b must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.lattice_kind not in ("multiple", "single"):
            raise ConfigError("lattice_kind must be 'multiple' or 'single'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        if not self.delta or any(d <= 0 for d in self.delta):
            raise ConfigError("delta values must be positive")
        if not self.r or any(v < 1 for v in self.r):
            raise ConfigError("r values must be >= 1")
        if self.s is not None and self.s < 1:
            raise ConfigError("s must be >= 1")
        if self.s_local is not None and self.s_local < 1:
            raise ConfigError("s_local must be >= 1")

        grid = (2 * self.extent + 1) ** self.dimensions
        if self.scenario in ("exact_recovery", "noisy_recovery"):
            if not self.sparsity or any(v < 1 for v in self.sparsity):
                raise ConfigError("sparsity values must be >= 1")
            if any(v > grid for v in self.sparsity):
                raise ConfigError(f"sparsity exceeds the search-grid cardinality {grid}")
            if self.coeff_model is not None and self.coeff_model not in ("box", "unit_modulus"):
                raise ConfigError("coeff_model must be 'box' or 'unit_modulus'")
        else:
            if self.coeff_model is not None:
                raise ConfigError(f"coeff_model does not apply to scenario {self.scenario}")
            if self.dimensions != _BSPLINE_DIM:
                raise ConfigError(f"scenario {self.scenario} requires dimensions = {_BSPLINE_DIM}")
        if self.scenario == "noisy_recovery":
            if not self.snr_db:
                raise ConfigError("noisy_recovery requires at least one snr_db value")
        elif self.snr_db:
            raise ConfigError(f"snr_db does not apply to scenario {self.scenario}")
        if self.scenario == "bspline_sparse":
            if not self.sparsity or any(v < 1 for v in self.sparsity):
                raise ConfigError("sparsity values must be >= 1")
        if self.scenario == "bspline_threshold" and self.sparsity:
            raise ConfigError("bspline_threshold sweeps delta only; omit sparsity")

    def combinations(self) -> list[tuple]:
        """Ordered (sparsity, snr_db, delta, r) combinations; None marks N/A axes."""
        sparsity_axis: tuple = self.sparsity if self.scenario != "bspline_threshold" else (None,)
        snr_axis: tuple = self.snr_db if self.scenario == "noisy_recovery" else (None,)
        return list(itertools.product(sparsity_axis, snr_axis, self.delta, self.r))


# ---------------------------------------------------------------------------
# spec-file parsing

_LIST_FIELDS = {"sparsity", "snr_db", "delta", "r"}
_INT_FIELDS = {"dimensions", "extent", "b", "s", "s_local", "repetitions", "seed", "jobs", "budget"}
_KEY_ALIASES = {
    "d": "dimensions",
    "n": "extent",
    "reps": "repetitions",
    "kind": "lattice_kind",
}


def parse_spec_file(path) -> dict:
    """Read a key = value experiment file; '#' starts a comment, lists use commas."""
    raw: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        key = _KEY_ALIASES.get(key.lower(), key.lower())
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key: str, value: str):
    try:
        if key in _LIST_FIELDS:
            parts = [part.strip() for part in value.split(",") if part.strip()]
            if key == "snr_db" or key == "delta":
                return tuple(float(part) for part in parts)
            return tuple(int(part) for part in parts)
        if key in _INT_FIELDS:
            return int(value)
        if key == "timings":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        return value
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {value!r}") from None


def build_spec(raw: dict, overrides: dict | None = None) -> ExperimentSpec:
    """Assemble a validated spec from file values and flag overrides (flags win)."""
    fields = {f.name for f in dataclasses.fields(ExperimentSpec)}
    values: dict = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown spec key {key!r}")
        values[key] = _convert(key, value) if isinstance(value, str) else value
    for key, value in (overrides or {}).items():
        if value is not None and value is not False:
            values[key] = value
    for required in ("scenario", "dimensions", "extent"):
        if required not in values:
            if required == "dimensions" and values.get("scenario", "").startswith("bspline"):
                values["dimensions"] = _BSPLINE_DIM
                continue
            raise ConfigError(f"missing required spec key {required!r}")
    spec = ExperimentSpec(**values)
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# trial execution

class _BudgetedOracle:
    """Raises BudgetExceeded before any evaluation that would pass the cap."""

    def __init__(self, inner, limit: int):
        self._inner = inner
        self._limit = int(limit)
        self._used = 0
        self.dim = inner.dim

    @property
    def call_count(self) -> int:
        return self._inner.call_count

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self._used + len(points) > self._limit:
            raise BudgetExceeded(
                f"oracle-call budget {self._limit} exhausted ({self._used} used, {len(points)} requested)"
            )
        values = self._inner(points)
        self._used += len(points)
        return values


def _detection_seed(seed_seq: np.random.SeedSequence) -> int:
    return int(seed_seq.generate_state(1, np.uint64)[0])


def _run_trial(spec: ExperimentSpec, combo_index: int, trial_index: int, budget_cap: int | None) -> dict:
    """One independent trial: fresh ground truth, fresh detection seed, metrics."""
    sparsity, snr_db, delta, iterations = spec.combinations()[combo_index]
    root = np.random.SeedSequence([spec.seed, combo_index, trial_index])
    truth_seed, detect_seed, noise_seed = root.spawn(3)
    box = SearchBox.centered(spec.dimensions, spec.extent)

    truth: SparseSpectrum | None = None
    config_kwargs = dict(
        box=box,
        delta=delta,
        r=iterations,
        b=spec.b,
        lattice_kind=spec.lattice_kind,
        rng_seed=_detection_seed(detect_seed),
    )
    if spec.scenario in ("exact_recovery", "noisy_recovery"):
        model = spec.coeff_model or ("box" if spec.scenario == "exact_recovery" else "unit_modulus")
        truth, oracle = gen_random_sparse_poly(spec.dimensions, spec.extent, sparsity, model, seed=truth_seed)
        if spec.scenario == "noisy_recovery":
            oracle = NoisyOracle(oracle, sigma_for_snr(sparsity, snr_db), seed=noise_seed)
        config_kwargs.update(s=spec.s or sparsity, s_local=spec.s_local)
    elif spec.scenario == "bspline_sparse":
        oracle = bspline_test_function()
        config_kwargs.update(s=spec.s or sparsity, s_local=spec.s_local)
    else:  # bspline_threshold: cap-free detection driven by the threshold alone
        oracle = bspline_test_function()
        config_kwargs.update(
            s=box.cardinality, s_local=spec.s_local or box.cardinality, component_delta=delta / 10.0
        )

    if budget_cap is not None:
        oracle = _BudgetedOracle(oracle, budget_cap)
    report = sparse_fft(oracle, DetectionConfig(**config_kwargs))

    result = {
        "samples": report.oracle_calls,
        "seconds": report.wall_time,
        "correct": None,
        "exact": None,
    }
    if truth is not None:
        truth_keys = truth.as_dict().keys()
        detected_keys = report.detected.as_dict().keys()
        result["correct"] = len(truth_keys & detected_keys)
        result["exact"] = truth_keys == detected_keys
        result["rel_err"] = relative_spectrum_l2_error(report.detected, truth)
    else:
        result["rel_err"] = relative_l2_error(report.detected, bspline_exact_coefficients, bspline_norm_sq())
    return result


def _trial_task(args: tuple) -> tuple[int, int, dict | None]:
    spec, combo_index, trial_index, budget_cap = args
    try:
        return combo_index, trial_index, _run_trial(spec, combo_index, trial_index, budget_cap)
    except BudgetExceeded:
        return combo_index, trial_index, None


def _format_float(value: float) -> float:
    return float(f"{value:.6g}")


def _aggregate_row(spec: ExperimentSpec, combo: tuple, trials: list[dict]) -> dict:
    sparsity, snr_db, delta, iterations = combo
    blank = ""
    row = {
        "scenario": spec.scenario,
        "d": spec.dimensions,
        "N": spec.extent,
        "sparsity": sparsity if sparsity is not None else blank,
        "snr_db": _format_float(snr_db) if snr_db is not None else blank,
        "delta": _format_float(delta),
        "r": iterations,
        "b": spec.b,
        "lattice_kind": spec.lattice_kind,
        "reps": len(trials),
        "max_samples": max(t["samples"] for t in trials),
        "max_rel_err": _format_float(max(t["rel_err"] for t in trials)),
        "seconds": _format_float(sum(t["seconds"] for t in trials)) if spec.timings else blank,
    }
    if trials[0]["correct"] is not None:
        row["min_correct"] = min(t["correct"] for t in trials)
        row["success_rate"] = _format_float(sum(t["exact"] for t in trials) / len(trials))
    else:
        row["min_correct"] = blank
        row["success_rate"] = blank
    return {key: row[key] for key in CSV_HEADER.split(",")}


def run_experiment(spec: ExperimentSpec) -> tuple[list[dict], int]:
    """Run all combinations x repetitions; returns (rows, exit_code).

    On budget exhaustion the rows aggregated from fully completed trials are
    returned with exit code 3.  Rows are ordered by combination regardless of
    completion order.
    """
    spec.validate()
    combos = spec.combinations()
    tasks = [(ci, ti) for ci in range(len(combos)) for ti in range(spec.repetitions)]
    results: dict[tuple[int, int], dict] = {}
    aborted = False

    if spec.jobs == 1:
        consumed = 0
        for ci, ti in tasks:
            cap = None if spec.budget is None else spec.budget - consumed
            try:
                outcome = _run_trial(spec, ci, ti, cap)
            except BudgetExceeded:
                aborted = True
                break
            results[(ci, ti)] = outcome
            consumed += outcome["samples"]
    else:
        args = [(spec, ci, ti, spec.budget) for ci, ti in tasks]
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            for ci, ti, outcome in pool.map(_trial_task, args):
                if outcome is None:
                    aborted = True
                    continue
                results[(ci, ti)] = outcome
        if spec.budget is not None and sum(t["samples"] for t in results.values()) > spec.budget:
            aborted = True

    rows = []
    for ci, combo in enumerate(combos):
        trials = [results[(ci, ti)] for ti in range(spec.repetitions) if (ci, ti) in results]
        if trials:
            rows.append(_aggregate_row(spec, combo, trials))
    return rows, (3 if aborted else 0)


# ---------------------------------------------------------------------------
# output

def emit(rows: list[dict], fmt: str) -> str:
    """Serialize aggregated rows; CSV uses the fixed header, JSON mirrors it."""
    if not rows:
        raise ValueError("refusing to emit an empty result table")
    columns = CSV_HEADER.split(",")
    if fmt == "csv":
        buffer = StringIO()
        buffer.write(CSV_HEADER + "\n")
        for row in rows:
            buffer.write(",".join(_cell(row[col]) for col in columns) + "\n")
        return buffer.getvalue()
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")


def _cell(value) -> str:
    if value == "":
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfft", description="Sparse FFT experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a spec file")
    run.add_argument("spec_file", help="key = value experiment description")
    run.add_argument("--jobs", type=int, default=None, help="parallel trial workers")
    run.add_argument("--budget", type=int, default=None, help="total oracle-call cap")
    run.add_argument("--format", choices=("csv", "json"), default=None, dest="format")
    run.add_argument("--out", default=None, help="output path (default: stdout)")
    run.add_argument("--seed", type=int, default=None, help="override the spec seed")
    run.add_argument("--timings", action="store_true", help="fill the seconds column (breaks byte determinism)")

    plan = sub.add_parser("plan", help="print planned detection iterations and retries")
    plan.add_argument("--sparsity", type=int, required=True)
    plan.add_argument("--dim", type=int, required=True)
    plan.add_argument("--eps", type=float, required=True)
    plan.add_argument("--gamma", type=float, default=0.5)
    return parser


def _cmd_run(args) -> int:
    overrides = {
        "jobs": args.jobs,
        "budget": args.budget,
        "format": args.format,
        "out": args.out,
        "seed": args.seed,
        "timings": args.timings,
    }
    spec = build_spec(parse_spec_file(args.spec_file), overrides)
    rows, status = run_experiment(spec)
    if not rows:
        print("error: budget exhausted before any trial completed", file=sys.stderr)
        return 3
    payload = emit(rows, spec.format)
    if spec.out:
        Path(spec.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    if status == 3:
        print("warning: oracle-call budget exceeded; partial results emitted", file=sys.stderr)
    return status


def _cmd_plan(args) -> int:
    if args.sparsity < 1 or args.dim < 1 or not (0 < args.eps < 1) or not (0 < args.gamma < 1):
        print("error: require sparsity >= 1, dim >= 1, 0 < eps < 1, 0 < gamma < 1", file=sys.stderr)
        return 2
    print(f"r_multiple = {plan_r(args.sparsity, args.dim, args.eps, 'multiple')}")
    print(f"r_single = {plan_r(args.sparsity, args.dim, args.eps, 'single')}")
    print(f"b = {plan_b(args.dim, args.eps, args.gamma)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports its own message
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_plan(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
