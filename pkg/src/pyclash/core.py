"""Numeric building blocks: supports, the data-error functional and random instances.

Vectors and matrices are plain ``float64`` numpy arrays. Supports are
:class:`SupportSet` objects, which carry the ambient dimension so that
complements are well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "DimensionError",
    "InfeasibleModelError",
    "SupportSet",
    "ProblemInstance",
    "as_vector",
    "as_matrix",
    "data_error",
    "gradient",
    "restrict",
    "instance_streams",
    "generate_instance",
]


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


class InfeasibleModelError(ValueError):
    """Raised when a sparsity model cannot be satisfied for the given sizes."""


def as_vector(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(phi, name="phi"):
    arr = np.asarray(phi, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_shapes(phi, y, x):
    m, n = phi.shape
    if y.shape != (m,) or x.shape != (n,):
        raise DimensionError(
            f"shape mismatch: phi is {phi.shape}, y is {y.shape}, x is {x.shape}"
        )


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing index set inside ``range(n)``."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if self.n < 0:
            raise ValueError("ambient dimension must be nonnegative")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("support indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise IndexError(f"support index out of range [0, {self.n})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> "SupportSet":
        """Build from an arbitrary iterable; duplicates are merged."""
        return cls(tuple(sorted({int(i) for i in indices})), n)

    @classmethod
    def from_mask(cls, mask) -> "SupportSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask).tolist()), mask.size)

    @classmethod
    def support_of(cls, x) -> "SupportSet":
        """Indices of the nonzero entries of ``x``."""
        return cls.from_mask(np.asarray(x) != 0)

    @classmethod
    def empty(cls, n: int) -> "SupportSet":
        return cls((), n)

    @classmethod
    def full(cls, n: int) -> "SupportSet":
        return cls(tuple(range(n)), n)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return int(i) in set(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.intp)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.indices)] = True
        return out

    def _same_space(self, other):
        if self.n != other.n:
            raise DimensionError(f"supports live in different spaces ({self.n} vs {other.n})")

    def union(self, other: "SupportSet") -> "SupportSet":
        self._same_space(other)
        return SupportSet.from_mask(self.mask() | other.mask())

    def intersection(self, other: "SupportSet") -> "SupportSet":
        self._same_space(other)
        return SupportSet.from_mask(self.mask() & other.mask())

    def difference(self, other: "SupportSet") -> "SupportSet":
        self._same_space(other)
        return SupportSet.from_mask(self.mask() & ~other.mask())

    def complement(self) -> "SupportSet":
        return SupportSet.from_mask(~self.mask())

    def issubset(self, other: "SupportSet") -> bool:
        self._same_space(other)
        return bool(np.all(other.mask()[list(self.indices)]))

    __or__ = union
    __and__ = intersection
    __sub__ = difference


def restrict(x, support: SupportSet) -> np.ndarray:
    """Return ``(x)_S``: a copy of ``x`` with entries outside ``support`` zeroed."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (support.n,):
        raise DimensionError(f"vector of shape {x.shape} vs support over {support.n}")
    out = np.zeros_like(x)
    idx = support.array
    out[idx] = x[idx]
    return out


def data_error(phi, y, x) -> float:
    """Squared residual norm ``||y - phi @ x||^2``."""
    phi, y, x = as_matrix(phi), as_vector(y, "y"), as_vector(x)
    _check_shapes(phi, y, x)
    r = y - phi @ x
    return float(r @ r)


def gradient(phi, y, x) -> np.ndarray:
    """Gradient of :func:`data_error` with respect to ``x``: ``-2 phi^T (y - phi x)``."""
    phi, y, x = as_matrix(phi), as_vector(y, "y"), as_vector(x)
    _check_shapes(phi, y, x)
    return -2.0 * (phi.T @ (y - phi @ x))


@dataclass(frozen=True)
class ProblemInstance:
    """One synthetic recovery task ``y = phi @ x_star + noise``."""

    phi: np.ndarray
    y: np.ndarray
    x_star: np.ndarray
    noise: np.ndarray
    model: object
    lam: float
    seed: int
    noise_energy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "noise_energy", float(np.linalg.norm(self.noise)))
        for arr in (self.phi, self.y, self.x_star, self.noise):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def support(self) -> SupportSet:
        return SupportSet.support_of(self.x_star)


def instance_streams(seed: int):
    """Independent generators for (matrix, support, amplitudes, noise).

    The instance seed feeds a :class:`numpy.random.SeedSequence` whose first
    four spawned children drive, in order, the sensing matrix, the support
    draw, the nonzero amplitudes and the noise direction. All four use PCG64.
    """
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def _resolve_lambda(policy, x_star):
    l1 = float(np.abs(x_star).sum())
    if isinstance(policy, str):
        if policy == "exact":
            return l1
        if policy == "inf":
            return np.inf
        raise ValueError(f"unknown lambda policy {policy!r}")
    scale = float(policy)
    if np.isinf(scale):
        return np.inf
    if not scale >= 1.0:
        raise ValueError("numeric lambda policy is a multiple of ||x*||_1 and must be >= 1")
    return scale * l1


def generate_instance(n, m, k, model=None, noise_energy=0.0, lambda_policy="exact", seed=0):
    """Draw a random problem instance.

    Parameters
    ----------
    n, m, k : int
        Signal length, number of measurements and sparsity, ``0 < k <= m <= n``.
    model : SparsityModel, optional
        Model the support is drawn from (uniformly over its size-k members).
        Defaults to the plain k-sparse model.
    noise_energy : float
        Exact Euclidean norm of the additive noise.
    lambda_policy : {"exact", "inf"} or float
        ``"exact"`` sets the instance lambda to ``||x*||_1``, ``"inf"`` to
        infinity, and a number ``s >= 1`` to ``s * ||x*||_1``.
    seed : int
        Instance seed, see :func:`instance_streams`.
    """
    from .projections import UniformModel  # circular at import time

    if not (0 < k <= m <= n):
        raise InfeasibleModelError(f"need 0 < k <= m <= n, got n={n}, m={m}, k={k}")
    if noise_energy < 0:
        raise ValueError("noise_energy must be nonnegative")
    if model is None:
        model = UniformModel(k)
    if model.k != k:
        raise InfeasibleModelError(f"model sparsity {model.k} differs from k={k}")
    model.validate(n)

    rng_phi, rng_supp, rng_amp, rng_noise = instance_streams(seed)
    phi = rng_phi.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    support = model.sample_support(n, rng_supp)
    x_star = np.zeros(n)
    amps = rng_amp.standard_normal(len(support))
    x_star[support.array] = amps / np.linalg.norm(amps)

    noise = np.zeros(m)
    if noise_energy > 0:
        direction = rng_noise.standard_normal(m)
        noise = noise_energy * direction / np.linalg.norm(direction)
    y = phi @ x_star + noise
    lam = _resolve_lambda(lambda_policy, x_star)
    return ProblemInstance(phi, y, x_star, noise, model, lam, int(seed))
