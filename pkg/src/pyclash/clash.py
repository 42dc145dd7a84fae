"""The CLASH iteration and its unconstrained-norm limit, model-based Subspace Pursuit.

Each outer iteration

1. merges the current support with the model projection of the gradient
   restricted to the complement of that support,
2. solves l1-constrained least squares on the merged support,
3. projects that solution back onto the model,
4. re-solves l1-constrained least squares on the projected support.

With ``lam = inf`` the least-squares steps are unconstrained and the method
is exactly model-based Subspace Pursuit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .convex import SolverConfig, restricted_lasso_solve
from .core import DimensionError, SupportSet, as_matrix, as_vector, gradient
from .projections import SparsityModel, project

__all__ = [
    "ClashConfig",
    "IterationRecord",
    "IterationTrace",
    "clash_run",
    "model_sp_run",
    "check_trace",
]

_L1_SLACK = 1e-9


@dataclass(frozen=True)
class ClashConfig:
    eta: float = 1e-5
    max_iterations: int = 100
    solver: SolverConfig = field(default_factory=SolverConfig)
    trace: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    """What one outer iteration selected and produced."""

    i: int
    S: tuple[int, ...]
    v_objective: float
    v_l1: float
    v_support: tuple[int, ...]
    Gamma: tuple[int, ...]
    x_objective: float
    x_l1: float
    x_support: tuple[int, ...]
    relative_change: float
    error: float | None = None
    inner_converged: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    inner_failures: int = 0

    def to_lines(self) -> list[str]:
        """One JSON object per iteration, then one summary object."""
        summary = {"summary": True, "iterations": self.iterations, "converged": self.converged,
                   "inner_failures": self.inner_failures}
        return [r.to_json() for r in self.records] + [json.dumps(summary, separators=(",", ":"))]

    @classmethod
    def from_lines(cls, lines) -> "IterationTrace":
        trace = cls()
        for line in lines:
            raw = json.loads(line)
            if raw.pop("summary", False):
                trace.iterations = raw["iterations"]
                trace.converged = raw["converged"]
                trace.inner_failures = raw["inner_failures"]
                continue
            for key in ("S", "v_support", "Gamma", "x_support"):
                raw[key] = tuple(raw[key])
            trace.records.append(IterationRecord(**raw))
        if not trace.iterations:
            trace.iterations = len(trace.records)
        return trace


def _check_inputs(phi, y, model, lam):
    phi, y = as_matrix(phi), as_vector(y, "y")
    m, n = phi.shape
    if y.size != m:
        raise DimensionError(f"phi is {phi.shape} but y has length {y.size}")
    if not isinstance(model, SparsityModel):
        raise TypeError("model must be a SparsityModel")
    model.validate(n)
    if 2 * model.k > n:
        raise ValueError(f"need 2k <= n, got k={model.k}, n={n}")
    if not lam > 0:
        raise ValueError(f"lam must be positive or inf, got {lam}")
    return phi, y


def clash_run(phi, y, lam: float, model: SparsityModel, config: ClashConfig | None = None,
              x_star=None) -> tuple[np.ndarray, IterationTrace]:
    """Run CLASH from ``x = 0``.

    Parameters
    ----------
    phi : (m, n) array
    y : (m,) array
    lam : float
        l1-norm budget; ``np.inf`` turns the method into model-based SP.
    model : SparsityModel
    config : ClashConfig, optional
    x_star : (n,) array, optional
        Ground truth; when given, the trace records ``||x_i - x*||``.

    Returns
    -------
    x : (n,) array
        Final iterate.
    trace : IterationTrace
    """
    phi, y = _check_inputs(phi, y, model, lam)
    config = config or ClashConfig()
    n = phi.shape[1]
    if x_star is not None:
        x_star = as_vector(x_star, "x_star")
        if x_star.size != n:
            raise DimensionError(f"x_star has length {x_star.size}, expected {n}")

    x = np.zeros(n)
    X = SupportSet.empty(n)
    trace = IterationTrace()
    for i in range(config.max_iterations):
        # step 1: grow the support along the projected gradient off the current support
        g = gradient(phi, y, x)
        g[X.array] = 0.0
        g_proj, _ = project(g, model)
        S = SupportSet.support_of(g_proj) | X
        if len(S) > 2 * model.k:
            raise AssertionError(f"merged support has {len(S)} > 2k indices")

        # step 2: l1-constrained least squares on the merged support
        step2 = restricted_lasso_solve(phi, y, S, lam, config.solver, x0=x)
        v = step2.x

        # step 3: back onto the model
        _, Gamma_sel = project(v, model)
        Gamma = SupportSet.support_of(v).intersection(Gamma_sel)

        # step 4: de-bias on the projected support
        step4 = restricted_lasso_solve(phi, y, Gamma, lam, config.solver, x0=v)
        x_new = step4.x
        X = SupportSet.support_of(x_new)

        diff = float(np.linalg.norm(x_new - x))
        norm_new = float(np.linalg.norm(x_new))
        rel = diff / norm_new if norm_new > 0 else (0.0 if diff == 0 else np.inf)
        inner_ok = step2.converged and step4.converged
        if not inner_ok:
            trace.inner_failures += 1
        if config.trace:
            trace.records.append(IterationRecord(
                i=i,
                S=S.indices,
                v_objective=step2.objective,
                v_l1=float(np.abs(v).sum()),
                v_support=SupportSet.support_of(v).indices,
                Gamma=Gamma.indices,
                x_objective=step4.objective,
                x_l1=float(np.abs(x_new).sum()),
                x_support=X.indices,
                relative_change=rel,
                error=None if x_star is None else float(np.linalg.norm(x_new - x_star)),
                inner_converged=inner_ok,
            ))
        x = x_new
        trace.iterations = i + 1
        if diff <= config.eta * norm_new:
            trace.converged = True
            break
    return x, trace


def model_sp_run(phi, y, model: SparsityModel, config: ClashConfig | None = None,
                 x_star=None) -> tuple[np.ndarray, IterationTrace]:
    """Model-based Subspace Pursuit: CLASH without the l1 constraint."""
    return clash_run(phi, y, np.inf, model, config, x_star)


def check_trace(trace: IterationTrace, k: int, lam: float) -> list[str]:
    """List every violated per-iteration invariant (empty when all hold)."""
    problems = []
    for r in trace.records:
        S, G = set(r.S), set(r.Gamma)
        if len(S) > 2 * k:
            problems.append(f"iteration {r.i}: |S| = {len(S)} > 2k")
        if len(G) > k:
            problems.append(f"iteration {r.i}: |Gamma| = {len(G)} > k")
        if not G <= S:
            problems.append(f"iteration {r.i}: Gamma not inside S")
        if not set(r.v_support) <= S:
            problems.append(f"iteration {r.i}: supp(v) not inside S")
        if not set(r.x_support) <= G:
            problems.append(f"iteration {r.i}: supp(x) not inside Gamma")
        if np.isfinite(lam):
            if r.v_l1 > lam + _L1_SLACK:
                problems.append(f"iteration {r.i}: ||v||_1 = {r.v_l1} > lam")
            if r.x_l1 > lam + _L1_SLACK:
                problems.append(f"iteration {r.i}: ||x||_1 = {r.x_l1} > lam")
    return problems
