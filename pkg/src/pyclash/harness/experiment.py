"""Monte Carlo sweeps over methods and l1 budgets, plus median summaries."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..clash import ClashConfig, check_trace, clash_run, model_sp_run
from ..convex import SolverConfig, lasso_solve
from ..core import InfeasibleModelError, data_error, generate_instance
from ..projections import ClusteredChainModel, PartitionBudgetModel, UniformModel

__all__ = [
    "METHODS",
    "WORKERS_ENV",
    "ExperimentSpec",
    "TrialRecord",
    "SummaryRow",
    "PRESETS",
    "default_lambda_grid",
    "trial_seed",
    "run_experiment",
    "run_trial",
    "summarize",
    "records_to_csv",
    "records_from_csv",
    "summary_to_csv",
    "summary_from_csv",
    "parse_config",
]

log = logging.getLogger(__name__)

METHODS = ("lasso", "sparse-clash", "model-clash", "model-sp")
WORKERS_ENV = "PYCLASH_WORKERS"


def default_lambda_grid() -> tuple[float, ...]:
    """20 log-spaced multiples of ||x*||_1 from 0.1 to ~7.9, including exactly 1."""
    exps = np.round(np.linspace(-1.0, 0.9, 20), 10)
    return tuple(float(10.0 ** e) for e in exps)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep. ``lambda_grid`` holds multiples of each trial's ``||x*||_1``."""

    n: int = 800
    m: int = 240
    k: int = 89
    model: str = "uniform"
    C: int = 5
    blocks: int = 10
    budget: int = 0
    noise_energy: float = 0.05
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    methods: tuple[str, ...] = METHODS
    trials: int = 500
    master_seed: int = 0
    eta: float = 1e-5
    max_iterations: int = 100
    inner_tolerance: float = 1e-8
    max_inner_iterations: int = 1000

    def __post_init__(self):
        grid = tuple(float(g) for g in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "methods", tuple(self.methods))
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(not g > 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be positive and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.model not in ("uniform", "clustered", "partition"):
            raise ValueError(f"unknown model {self.model!r}")

    def sparsity_model(self):
        if self.model == "uniform":
            return UniformModel(self.k)
        if self.model == "clustered":
            return ClusteredChainModel(self.k, self.C)
        budget = self.budget or math.ceil(self.k / self.blocks)
        return PartitionBudgetModel.contiguous(self.n, self.blocks, budget, self.k)

    def clash_config(self) -> ClashConfig:
        solver = SolverConfig(self.inner_tolerance, self.max_inner_iterations)
        return ClashConfig(self.eta, self.max_iterations, solver, trace=True)

    def validate(self):
        """Raise InfeasibleModelError when no instance can be generated."""
        if not 0 < self.k <= self.m <= self.n or 2 * self.k > self.n:
            raise InfeasibleModelError(
                f"need 0 < k <= m <= n and 2k <= n, got n={self.n}, m={self.m}, k={self.k}"
            )
        try:
            model = self.sparsity_model()
        except ValueError as exc:
            raise InfeasibleModelError(str(exc)) from exc
        model.validate(self.n)
        if isinstance(model, PartitionBudgetModel) and model.capacity() < self.k:
            raise InfeasibleModelError("block budgets cannot hold k indices")


PRESETS = {
    "exp1-noisy": dict(n=800, m=240, k=89, model="uniform", noise_energy=0.05, trials=500),
    "exp1-noiseless": dict(n=800, m=250, k=93, model="uniform", noise_energy=0.0, trials=500),
    "exp2-clustered": dict(n=500, m=125, k=50, model="clustered", C=5, noise_energy=0.05,
                           trials=100),
    "exp2-partition": dict(n=500, m=125, k=50, model="partition", blocks=10, budget=5,
                           noise_energy=0.05, trials=100),
}


@dataclass(frozen=True)
class TrialRecord:
    method: str
    lambda_scale: float
    lam: float
    trial: int
    seed: int
    signal_error: float
    data_error: float
    iterations: int
    converged: bool
    wall_time: float = 0.0
    status: str = "ok"


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit instance seed for trial ``trial`` of a sweep."""
    state = np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint64)
    return int(state[0])


def _run_method(method, inst, scale, model, config):
    lam = scale * float(np.abs(inst.x_star).sum())
    k = inst.model.k
    if method == "lasso":
        res = lasso_solve(inst.phi, inst.y, lam, config.solver)
        return res.x, res.iterations, res.converged, []
    if method == "model-sp":
        x, trace = model_sp_run(inst.phi, inst.y, model, config)
    else:
        use = UniformModel(k) if method == "sparse-clash" else model
        x, trace = clash_run(inst.phi, inst.y, lam, use, config)
    return x, trace.iterations, trace.converged, check_trace(trace, k, lam)


def run_trial(spec: ExperimentSpec, trial: int) -> list[TrialRecord]:
    """Every (method, lambda) pair on the same instance of trial ``trial``."""
    seed = trial_seed(spec.master_seed, trial)
    model = spec.sparsity_model()
    inst = generate_instance(spec.n, spec.m, spec.k, model, spec.noise_energy, "exact", seed)
    config = spec.clash_config()
    l1 = float(np.abs(inst.x_star).sum())
    out = []
    for method in spec.methods:
        scales = (math.inf,) if method == "model-sp" else spec.lambda_grid
        for scale in scales:
            start = time.perf_counter()
            status = "ok"
            try:
                x, iters, converged, problems = _run_method(method, inst, scale, model, config)
                if problems:
                    status = "invariant: " + problems[0]
                    log.warning("trial %d %s: %s", trial, method, problems[0])
                err = float(np.linalg.norm(x - inst.x_star))
                derr = data_error(inst.phi, inst.y, x)
            except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                log.warning("trial %d %s lambda=%g failed: %s", trial, method, scale, exc)
                err, derr, iters, converged = math.nan, math.nan, 0, False
                status = f"failed: {exc}"
            out.append(TrialRecord(
                method=method,
                lambda_scale=scale,
                lam=scale * l1,
                trial=trial,
                seed=seed,
                signal_error=err,
                data_error=derr,
                iterations=iters,
                converged=converged,
                wall_time=time.perf_counter() - start,
                status=status,
            ))
    return out


def _run_trial_packed(args):
    return run_trial(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[TrialRecord]:
    """Run all trials; output is ordered by (method, lambda, trial) regardless of workers."""
    spec.validate()
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(spec, t) for t in range(spec.trials)]
    if workers == 1:
        batches = [run_trial(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_trial_packed, jobs))
    order = {m: i for i, m in enumerate(METHODS)}
    records = [r for batch in batches for r in batch]
    records.sort(key=lambda r: (order[r.method], r.lambda_scale, r.trial))
    return records


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryRow:
    method: str
    lam: float
    median_error: float
    q25: float
    q75: float
    mean_iters: float
    n_converged: int


def _lower_quantile(sorted_vals, q):
    return sorted_vals[int(math.floor(q * (len(sorted_vals) - 1)))]


def summarize(records) -> list[SummaryRow]:
    """Per (method, lambda multiple) order statistics of the signal error.

    The median of an even number of values is the lower of the two middle
    ones; the quartiles use the same lower rule, ``sorted[floor(q (N - 1))]``.
    Failed runs (NaN error) sort last.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple[str, float], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.method, r.lambda_scale), []).append(r)
    order = {m: i for i, m in enumerate(METHODS)}
    rows = []
    for (method, scale), rs in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0])):
        errs = sorted(r.signal_error for r in rs if not math.isnan(r.signal_error))
        errs += [math.nan] * (len(rs) - len(errs))
        rows.append(SummaryRow(
            method=method,
            lam=scale,
            median_error=_lower_quantile(errs, 0.5),
            q25=_lower_quantile(errs, 0.25),
            q75=_lower_quantile(errs, 0.75),
            mean_iters=float(np.mean([r.iterations for r in rs])),
            n_converged=sum(r.converged for r in rs),
        ))
    return rows


# ---------------------------------------------------------------------------
# CSV

RECORD_COLUMNS = ["method", "lambda", "lambda_value", "trial", "seed", "signal_error",
                  "data_error", "iterations", "converged", "wall_time", "status"]
SUMMARY_COLUMNS = ["method", "lambda", "median_error", "q25", "q75", "mean_iters", "n_converged"]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, timings: bool = False) -> str:
    """Serialize records. Wall times are omitted unless ``timings`` so reruns are byte-identical."""
    cols = RECORD_COLUMNS if timings else [c for c in RECORD_COLUMNS if c != "wall_time"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = {
            "method": r.method, "lambda": r.lambda_scale, "lambda_value": r.lam,
            "trial": r.trial, "seed": r.seed, "signal_error": r.signal_error,
            "data_error": r.data_error, "iterations": r.iterations, "converged": r.converged,
            "wall_time": r.wall_time, "status": r.status,
        }
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def records_from_csv(text: str) -> list[TrialRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(TrialRecord(
            method=row["method"],
            lambda_scale=float(row["lambda"]),
            lam=float(row["lambda_value"]),
            trial=int(row["trial"]),
            seed=int(row["seed"]),
            signal_error=float(row["signal_error"]),
            data_error=float(row["data_error"]),
            iterations=int(row["iterations"]),
            converged=row["converged"] == "1",
            wall_time=float(row.get("wall_time") or 0.0),
            status=row.get("status", "ok"),
        ))
    return out


def summary_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in (r.method, r.lam, r.median_error, r.q25, r.q75,
                                       r.mean_iters, r.n_converged)])
    return buf.getvalue()


def summary_from_csv(text: str) -> list[SummaryRow]:
    return [
        SummaryRow(row["method"], float(row["lambda"]), float(row["median_error"]),
                   float(row["q25"]), float(row["q75"]), float(row["mean_iters"]),
                   int(row["n_converged"]))
        for row in csv.DictReader(io.StringIO(text))
    ]


# ---------------------------------------------------------------------------
# key=value configuration files

_INT_KEYS = {f.name for f in fields(ExperimentSpec) if f.type in ("int", int)}


def _coerce(key, value):
    if key == "lambda_grid":
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key == "methods":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if key == "model":
        return value.strip()
    if key in _INT_KEYS:
        return int(value)
    return float(value)


def parse_config(text: str, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build a spec from ``key = value`` lines; ``#`` starts a comment.

    A ``preset`` key loads one of :data:`PRESETS` before the other keys apply.
    """
    known = {f.name for f in fields(ExperimentSpec)}
    values = {}
    preset = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "preset":
            preset = value
            continue
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    spec = base or ExperimentSpec()
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        spec = replace(spec, **PRESETS[preset])
    return replace(spec, **values)


def spec_to_config(spec: ExperimentSpec) -> str:
    lines = []
    for key, value in asdict(spec).items():
        if isinstance(value, (tuple, list)):
            value = ",".join(_fmt(v) for v in value)
        else:
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
