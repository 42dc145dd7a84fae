"""Convergence constants of the CLASH iteration invariant and related bounds.

The recursion bounds the relative error of consecutive iterates::

    e_{i+1} <= rho * e_i + c1 / SNR + c2 + c3 * sqrt(1 / SNR)

with ``SNR = ||x*|| / ||noise||``. Every constant is a closed-form function of
the isometry constants ``delta_k <= delta_2k <= delta_3k`` and the projection
accuracy ``epsilon`` (0 for exact projections). These evaluators are for
analysis only; the solvers never consult them.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .core import DimensionError, as_matrix, as_vector
from .projections import SparsityModel, UniformModel

__all__ = [
    "IsometryTriple",
    "ConvergenceConstants",
    "convergence_constants",
    "closed_form_rho",
    "recursion_bound",
    "recursion_fixed_point",
    "recursion_slack",
    "mismatch_bound",
    "estimate_rip",
]

_RADICAND_GUARD = 1e-14


@dataclass(frozen=True)
class IsometryTriple:
    delta_k: float
    delta_2k: float
    delta_3k: float
    epsilon: float = 0.0

    def __post_init__(self):
        dk, d2, d3 = self.delta_k, self.delta_2k, self.delta_3k
        if not 0.0 <= dk <= d2 <= d3 < 1.0:
            raise ValueError(
                f"need 0 <= delta_k <= delta_2k <= delta_3k < 1, got {dk}, {d2}, {d3}"
            )
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class ConvergenceConstants:
    rho: float
    c1: float
    c2: float
    c3: float
    D1: float
    D2: float
    D3: float
    D4: float
    D5: float


def _sqrt_guarded(value, what):
    if value < 0.0:
        if value < -_RADICAND_GUARD:
            raise ValueError(f"negative radicand in {what}: {value}")
        return 0.0
    return sqrt(value)


def convergence_constants(iso: IsometryTriple) -> ConvergenceConstants:
    """Evaluate rho, c1..c3 and the auxiliary constants D1..D5."""
    dk, d2, d3, eps = iso.delta_k, iso.delta_2k, iso.delta_3k, iso.epsilon
    se = sqrt(eps)
    a = (1.0 - eps) + 2.0 * sqrt(1.0 - eps)
    base = 1.0 + a * d3 * d3
    q = base + 2.0 * d3 * se + eps
    sq = sqrt(q)
    one_m_d2 = sqrt(1.0 - d2 * d2)

    D1 = (sqrt(base) * sqrt(a * (1.0 + d2)) + sqrt(eps * (1.0 + d2))) / sq
    D2 = (d3 * se + eps) / sq + _sqrt_guarded(eps - (eps + d3 * se) ** 2 / q, "D2")
    D3 = sqrt(2.0 * sqrt(eps * (1.0 + d2)))
    D4 = D1 + sqrt(1.0 + d2) / (1.0 - d3) * sq
    lead = sqrt(q / (1.0 - d3 * d3))
    D5 = lead * (sqrt(2.0 * (1.0 + d3)) + sqrt(eps * (1.0 + d2))) + D4

    rho = (d3 + d2 + se * (1.0 + d2)) / one_m_d2 * lead
    c1 = D5 / one_m_d2 + sqrt(1.0 + dk) / (1.0 - d2)
    c2 = D2 / one_m_d2
    c3 = D3 / one_m_d2
    return ConvergenceConstants(rho, c1, c2, c3, D1, D2, D3, D4, D5)


def closed_form_rho(delta_2k: float, delta_3k: float) -> float:
    """Contraction factor for exact projections, in its compact closed form."""
    d2, d3 = delta_2k, delta_3k
    return (d3 + d2) / sqrt(1.0 - d2 * d2) * sqrt((1.0 + 3.0 * d3 * d3) / (1.0 - d3 * d3))


def recursion_bound(iso: IsometryTriple, err_prev: float, noise: float, x_star_norm: float) -> float:
    """One step of the relative-error recursion.

    ``err_prev`` is ``||x_i - x*|| / ||x*||``; the return value bounds the
    same ratio at the next iterate.
    """
    if not x_star_norm > 0:
        raise ValueError("x_star_norm must be positive")
    if noise < 0 or err_prev < 0:
        raise ValueError("noise and err_prev must be nonnegative")
    c = convergence_constants(iso)
    inv_snr = noise / x_star_norm
    return c.rho * err_prev + c.c1 * inv_snr + c.c2 + c.c3 * sqrt(inv_snr)


def recursion_fixed_point(iso: IsometryTriple, noise: float, x_star_norm: float) -> float:
    """Limit of the recursion when it contracts (``rho < 1``)."""
    c = convergence_constants(iso)
    if not c.rho < 1:
        raise ValueError(f"recursion does not contract: rho = {c.rho}")
    return recursion_bound(iso, 0.0, noise, x_star_norm) / (1.0 - c.rho)


def recursion_slack(errors, iso: IsometryTriple, noise: float, x_star_norm: float) -> list[float]:
    """Per-step margin of an observed error sequence against the recursion.

    ``errors`` holds absolute errors ``||x_i - x*||`` for consecutive iterates.
    Entry ``i`` of the result is ``bound_i - e_{i+1}`` in relative units, so a
    negative value marks a step the recursion fails to cover at the supplied
    isometry constants. Diagnostic only: the true constants are unknowable.
    """
    rel = [float(e) / x_star_norm for e in errors]
    return [recursion_bound(iso, a, noise, x_star_norm) - b for a, b in zip(rel, rel[1:])]


def mismatch_bound(beta, x_star, k: int, delta_k: float) -> float:
    """Bound on ``||phi (beta - x*)||`` for the plain k-sparse model."""
    beta, x_star = as_vector(beta, "beta"), as_vector(x_star, "x_star")
    if beta.shape != x_star.shape:
        raise DimensionError(f"beta is {beta.shape}, x_star is {x_star.shape}")
    if k < 1:
        raise ValueError("k must be positive")
    if not 0.0 <= delta_k < 1.0:
        raise ValueError("delta_k must lie in [0, 1)")
    d = beta - x_star
    return sqrt(1.0 + delta_k) * (float(np.linalg.norm(d)) + float(np.abs(d).sum()) / sqrt(k))


def estimate_rip(phi, k: int, model: SparsityModel | None = None, trials: int = 100,
                 seed: int = 0) -> float:
    """Monte Carlo LOWER bound on the restricted isometry constant.

    Draws ``trials`` model supports of size ``k``; on each, the unit vectors
    with the most extreme ``||phi x||^2`` are the extreme eigenvectors of
    ``phi_S^T phi_S``, so the largest observed distortion there is
    ``max |eig - 1|``. The maximum over sampled supports can only
    under-estimate the true constant, which needs every support.
    """
    phi = as_matrix(phi)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = phi.shape[1]
    model = model or UniformModel(k)
    if model.k != k:
        raise ValueError(f"model sparsity {model.k} differs from k={k}")
    model.validate(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        idx = model.sample_support(n, rng).array
        A = phi[:, idx]
        eig = np.linalg.eigvalsh(A.T @ A)
        worst = max(worst, float(np.max(np.abs(eig - 1.0))))
    return worst
