"""Exact Euclidean projections onto combinatorial sparsity models.

Projecting ``x`` onto a model reduces to picking the feasible support that
maximizes the captured energy ``F(S; x) = sum_{i in S} x_i^2`` and then hard
thresholding ``x`` to it. Each model kind gets its own exact selector:

* ``UniformModel``         sort and keep the k largest magnitudes
* ``PartitionBudgetModel`` matroid greedy with a per-block budget oracle
* ``ClusteredChainModel``  dynamic program over k/C disjoint runs of length C
* ``ExplicitIlpModel``     exhaustive search (small n only)

All selectors break ties toward the lowest index. :func:`brute_force_project`
is an independent exhaustive oracle for checking the fast paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Sequence

import numpy as np

from .core import DimensionError, InfeasibleModelError, SupportSet, as_vector, restrict

__all__ = [
    "SparsityModel",
    "UniformModel",
    "PartitionBudgetModel",
    "ClusteredChainModel",
    "ExplicitIlpModel",
    "IlpDescription",
    "BudgetOracle",
    "variance_reduction",
    "project",
    "project_uniform",
    "project_matroid_greedy",
    "project_clustered",
    "build_ilp",
    "solve_ilp_brute_force",
    "brute_force_project",
    "BRUTE_FORCE_MAX_N",
]

BRUTE_FORCE_MAX_N = 24
_TIE_RTOL = 1e-13


class SparsityModel:
    """Base class for combinatorial sparsity models.

    A model is a downward-closed family of supports of size at most ``k``.
    """

    kind = "abstract"
    k: int

    def validate(self, n: int) -> None:
        raise NotImplementedError

    def is_feasible(self, support: SupportSet) -> bool:
        raise NotImplementedError

    def sample_support(self, n: int, rng: np.random.Generator) -> SupportSet:
        """Draw a size-k member uniformly at random."""
        raise NotImplementedError


@dataclass(frozen=True)
class UniformModel(SparsityModel):
    k: int
    kind = "uniform"

    def validate(self, n):
        if not 1 <= self.k <= n:
            raise InfeasibleModelError(f"uniform model needs 1 <= k <= n, got k={self.k}, n={n}")

    def is_feasible(self, support):
        return len(support) <= self.k

    def sample_support(self, n, rng):
        self.validate(n)
        return SupportSet.of(rng.choice(n, size=self.k, replace=False).tolist(), n)


@dataclass(frozen=True)
class PartitionBudgetModel(SparsityModel):
    """Disjoint blocks covering ``range(n)``, each with its own sparsity budget."""

    k: int
    blocks: tuple[tuple[int, ...], ...]
    budgets: tuple[int, ...]
    kind = "partition"

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        budgets = tuple(int(b) for b in self.budgets)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "budgets", budgets)
        if len(blocks) != len(budgets):
            raise ValueError("one budget per block is required")
        if any(b < 0 for b in budgets):
            raise ValueError("block budgets must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be positive")
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(len(flat))):
            raise ValueError("blocks must partition range(n)")

    @classmethod
    def contiguous(cls, n, n_blocks, budget, k):
        """``n_blocks`` equal contiguous blocks sharing the same budget."""
        if n_blocks < 1 or n % n_blocks:
            raise ValueError("n must split evenly into n_blocks")
        size = n // n_blocks
        blocks = tuple(tuple(range(j * size, (j + 1) * size)) for j in range(n_blocks))
        return cls(k, blocks, (budget,) * n_blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.intp)
        for j, b in enumerate(self.blocks):
            out[list(b)] = j
        return out

    def capacity(self) -> int:
        return min(self.k, sum(min(b, len(B)) for b, B in zip(self.budgets, self.blocks)))

    def validate(self, n):
        if n != self.n:
            raise DimensionError(f"partition covers {self.n} indices, vector has {n}")

    def oracle(self) -> "BudgetOracle":
        return BudgetOracle(self.labels, np.array(self.budgets))

    def is_feasible(self, support):
        self.validate(support.n)
        return len(support) <= self.k and self.oracle()(support.indices)

    def sample_support(self, n, rng):
        self.validate(n)
        sizes = [len(b) for b in self.blocks]
        caps = [min(b, s) for b, s in zip(self.budgets, sizes)]
        # ways[j][t]: number of ways to place t indices in blocks j..end
        nb = len(sizes)
        ways = [[0] * (self.k + 1) for _ in range(nb + 1)]
        ways[nb][0] = 1
        for j in range(nb - 1, -1, -1):
            for t in range(self.k + 1):
                ways[j][t] = sum(
                    comb(sizes[j], c) * ways[j + 1][t - c] for c in range(min(caps[j], t) + 1)
                )
        if ways[0][self.k] == 0:
            raise InfeasibleModelError("block budgets cannot accommodate k indices")
        chosen = []
        left = self.k
        for j in range(nb):
            weights = [
                Fraction(comb(sizes[j], c) * ways[j + 1][left - c], ways[j][left])
                for c in range(min(caps[j], left) + 1)
            ]
            c = int(rng.choice(len(weights), p=np.array([float(w) for w in weights])))
            if c:
                chosen.extend(rng.choice(self.blocks[j], size=c, replace=False).tolist())
            left -= c
        return SupportSet.of(chosen, n)


@dataclass(frozen=True)
class ClusteredChainModel(SparsityModel):
    """Supports made of ``k // C`` disjoint runs of ``C`` consecutive indices."""

    k: int
    C: int
    kind = "clustered"

    def __post_init__(self):
        if self.C < 1 or self.k < 1 or self.k % self.C:
            raise ValueError(f"need C >= 1 dividing k, got k={self.k}, C={self.C}")

    @property
    def runs(self) -> int:
        return self.k // self.C

    def validate(self, n):
        if self.k > n:
            raise InfeasibleModelError(f"{self.runs} runs of length {self.C} do not fit in n={n}")

    def is_feasible(self, support):
        n, C = support.n, self.C
        mask = support.mask()
        # fewest runs covering every selected index within range(p)
        big = n + 1
        need = [0] + [big] * n
        for p in range(1, n + 1):
            best = need[p - 1] if not mask[p - 1] else big
            if p >= C:
                best = min(best, need[p - C] + 1)
            need[p] = best
        return need[n] <= self.runs

    def sample_support(self, n, rng):
        self.validate(n)
        r, C = self.runs, self.C
        # n - k free cells and r runs arranged in a row: choose the run slots
        slots = np.sort(rng.choice(n - self.k + r, size=r, replace=False))
        starts = slots + np.arange(r) * (C - 1)
        return SupportSet.of((s + c for s in starts.tolist() for c in range(C)), n)


@dataclass(frozen=True)
class ExplicitIlpModel(SparsityModel):
    """Supports whose indicator ``z`` satisfies ``A z <= b``.

    The first row of ``A`` must be all ones with ``b[0] == k``.
    """

    A: np.ndarray
    b: np.ndarray
    kind = "ilp"

    def __post_init__(self):
        A = np.asarray(self.A)
        b = np.asarray(self.b)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise DimensionError(f"A is {A.shape}, b is {b.shape}")
        if not (np.array_equal(A, np.round(A)) and np.array_equal(b, np.round(b))):
            raise ValueError("A and b must be integral")
        A = A.astype(np.int64)
        b = b.astype(np.int64)
        if not np.all(A[0] == 1):
            raise ValueError("first row of A must be all ones")
        if b[0] < 1:
            raise ValueError("b[0] is the sparsity k and must be positive")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, ExplicitIlpModel)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )

    @property
    def k(self) -> int:
        return int(self.b[0])

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def validate(self, n):
        if n != self.n:
            raise DimensionError(f"constraint matrix has {self.n} columns, vector has {n}")

    def is_feasible(self, support):
        self.validate(support.n)
        z = support.mask().astype(np.int64)
        return bool(np.all(self.A @ z <= self.b))

    def sample_support(self, n, rng):
        self.validate(n)
        masks = [m for chunk in _feasible_masks(self, n) for m in chunk if m.sum() == self.k]
        if not masks:
            raise InfeasibleModelError("no feasible support of size k")
        return SupportSet.from_mask(masks[int(rng.integers(len(masks)))])


@dataclass(frozen=True)
class IlpDescription:
    """``min w^T z`` over binary ``z`` with ``A z <= b``."""

    w: np.ndarray
    A: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.w.size


class BudgetOracle:
    """Independence test for a partition matroid: per-block counts within budget."""

    def __init__(self, labels, budgets):
        self.labels = np.asarray(labels, dtype=np.intp)
        self.budgets = np.asarray(budgets, dtype=np.int64)

    def __call__(self, indices: Sequence[int]) -> bool:
        if len(indices) == 0:
            return True
        counts = np.bincount(self.labels[list(indices)], minlength=self.budgets.size)
        return bool(np.all(counts <= self.budgets))


def variance_reduction(support: SupportSet, x) -> float:
    """Energy of ``x`` captured by ``support``."""
    x = as_vector(x)
    if support.n != x.size:
        raise IndexError(f"support over {support.n} indices, vector has {x.size}")
    vals = x[support.array]
    return float(vals @ vals)


def _magnitude_order(x):
    # decreasing |x|, lowest index first among equal magnitudes
    return np.argsort(-np.abs(x), kind="stable")


def project_uniform(x, k: int) -> SupportSet:
    """Indices of the ``k`` largest magnitudes of ``x``."""
    x = as_vector(x)
    if not 1 <= k <= x.size:
        raise ValueError(f"k must lie in [1, {x.size}], got {k}")
    return SupportSet.of(_magnitude_order(x)[:k].tolist(), x.size)


def _check_downward_closed(oracle, n, k, chains=20, seed=0):
    rng = np.random.default_rng(seed)
    length = min(n, 2 * k + 1)
    for _ in range(chains):
        perm = rng.permutation(n)[:length].tolist()
        closed = False
        for size in range(1, length + 1):
            ok = oracle(sorted(perm[:size]))
            if closed and ok:
                raise ValueError("independence oracle is not downward closed")
            closed = closed or not ok


def project_matroid_greedy(
    x, k: int, oracle: Callable[[Sequence[int]], bool], check_oracle: bool = True
) -> SupportSet:
    """Greedy basis of a matroid truncated at cardinality ``k``.

    Indices are scanned by decreasing magnitude and kept whenever the enlarged
    set stays independent. This is the exact maximizer of the captured energy
    when ``oracle`` describes a matroid.
    """
    x = as_vector(x)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if not oracle([]):
        raise ValueError("independence oracle must accept the empty set")
    if check_oracle:
        _check_downward_closed(oracle, x.size, max(k, 1))
    chosen: list[int] = []
    for i in _magnitude_order(x).tolist():
        if len(chosen) >= k:
            break
        if oracle(sorted(chosen + [i])):
            chosen.append(i)
    return SupportSet.of(chosen, x.size)


def _partition_greedy(x, model: PartitionBudgetModel) -> SupportSet:
    # same scan as project_matroid_greedy with the budget test done incrementally
    labels = model.labels
    left = list(model.budgets)
    chosen = []
    for i in _magnitude_order(x).tolist():
        if len(chosen) >= model.k:
            break
        j = labels[i]
        if left[j] > 0:
            left[j] -= 1
            chosen.append(i)
    return SupportSet.of(chosen, x.size)


def project_clustered(x, k: int, C: int) -> SupportSet:
    """Best ``k // C`` disjoint runs of ``C`` consecutive indices.

    Suffix dynamic program over (position, runs still to place); a run is
    taken whenever that is at least as good as skipping, which places runs
    as far left as ties allow.
    """
    x = as_vector(x)
    n = x.size
    if C < 1 or k < 1 or k % C:
        raise ValueError(f"need C >= 1 dividing k, got k={k}, C={C}")
    r = k // C
    if k > n:
        raise InfeasibleModelError(f"{r} runs of length {C} do not fit in n={n}")
    sq = x * x
    run = np.lib.stride_tricks.sliding_window_view(sq, C).sum(axis=1)  # energy of [p, p + C)
    # sums of equal energies taken in different orders may differ by rounding,
    # so near-equal alternatives count as ties (same tolerance as the oracle)
    tol = _TIE_RTOL * float(sq.sum())
    neg = -np.inf
    best = np.full((n + C + 1, r + 1), neg)
    best[:, 0] = 0.0
    for p in range(n - 1, -1, -1):
        for t in range(1, r + 1):
            skip = best[p + 1, t]
            take = run[p] + best[p + C, t - 1] if p + C <= n else neg
            best[p, t] = take if take >= skip - tol else skip
    chosen = []
    p, t = 0, r
    while t > 0:
        take = run[p] + best[p + C, t - 1] if p + C <= n else neg
        if take >= best[p + 1, t] - tol:
            chosen.extend(range(p, p + C))
            p += C
            t -= 1
        else:
            p += 1
    return SupportSet(tuple(chosen), n)


def _select(x, model) -> SupportSet:
    n = x.size
    model.validate(n)
    if isinstance(model, UniformModel):
        return project_uniform(x, model.k)
    if isinstance(model, PartitionBudgetModel):
        return _partition_greedy(x, model)
    if isinstance(model, ClusteredChainModel):
        return project_clustered(x, model.k, model.C)
    if isinstance(model, ExplicitIlpModel):
        return brute_force_project(x, model)
    raise TypeError(f"unsupported sparsity model {type(model).__name__}")


def project(x, model: SparsityModel) -> tuple[np.ndarray, SupportSet]:
    """Euclidean projection of ``x`` onto ``model``.

    Returns the hard-thresholded vector and the selected support.
    """
    x = as_vector(x)
    support = _select(x, model)
    return restrict(x, support), support


def build_ilp(x, model: SparsityModel) -> IlpDescription:
    """Integer program whose optimum is the support of ``project(x, model)``."""
    x = as_vector(x)
    n = x.size
    model.validate(n)
    w = -(x * x)
    if isinstance(model, UniformModel):
        A = np.ones((1, n), dtype=np.int64)
        b = np.array([model.k], dtype=np.int64)
    elif isinstance(model, PartitionBudgetModel):
        rows = [np.ones(n, dtype=np.int64)]
        for block in model.blocks:
            row = np.zeros(n, dtype=np.int64)
            row[list(block)] = 1
            rows.append(row)
        A = np.vstack(rows)
        b = np.array((model.k,) + model.budgets, dtype=np.int64)
    elif isinstance(model, ExplicitIlpModel):
        A, b = model.A.copy(), model.b.copy()
    elif isinstance(model, ClusteredChainModel):
        raise NotImplementedError("run-structured models are not emitted as linear constraints")
    else:
        raise TypeError(f"unsupported sparsity model {type(model).__name__}")
    return IlpDescription(w, A, b)


# ---------------------------------------------------------------------------
# exhaustive search


def _mask_chunks(n, chunk=1 << 16):
    bits = np.arange(n, dtype=np.uint64)
    total = 1 << n
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        yield ((codes[:, None] >> bits) & np.uint64(1)).astype(bool)


def _feasible_masks(model, n):
    """Yield boolean support masks of every feasible support (maximal ones for runs)."""
    if isinstance(model, ClusteredChainModel):
        C, r = model.C, model.runs
        for starts in itertools.combinations(range(n - C + 1), r):
            if all(b - a >= C for a, b in zip(starts, starts[1:])):
                mask = np.zeros(n, dtype=bool)
                for s in starts:
                    mask[s : s + C] = True
                yield mask
        return
    if isinstance(model, UniformModel):
        A, b = np.ones((1, n), dtype=np.int64), np.array([model.k])
    else:
        ilp = build_ilp(np.zeros(n), model)
        A, b = ilp.A, ilp.b
    for masks in _mask_chunks(n):
        yield masks[np.all(masks.astype(np.int64) @ A.T <= b, axis=1)]


def _argmax_support(scored):
    """Pick the best of (score, mask) pairs: max score, then size, then lexicographic."""
    best_score = max(s for s, _ in scored)
    tol = _TIE_RTOL * max(abs(best_score), 1e-300)
    tied = [tuple(np.flatnonzero(m).tolist()) for s, m in scored if s >= best_score - tol]
    return min(tied, key=lambda t: (-len(t), t))


def _exhaustive(weights, candidates, n):
    scored = []
    running = -np.inf
    for masks in _batched(candidates):
        if len(masks) == 0:
            continue
        scores = masks.astype(np.float64) @ weights
        top = scores.max()
        if top > running:
            running = top
        tol = _TIE_RTOL * max(abs(running), 1e-300)
        keep = scores >= running - tol
        scored.extend(zip(scores[keep].tolist(), masks[keep]))
        scored = [(s, m) for s, m in scored if s >= running - tol]
    if not scored:
        raise InfeasibleModelError("model has no feasible support")
    return SupportSet(_argmax_support(scored), n)


def _batched(mask_iter, size=1 << 14):
    buf = []
    for m in mask_iter:
        if isinstance(m, np.ndarray) and m.ndim == 2:
            yield m
            continue
        buf.append(m)
        if len(buf) >= size:
            yield np.array(buf)
            buf = []
    if buf:
        yield np.array(buf)


def brute_force_project(x, model: SparsityModel) -> SupportSet:
    """Exhaustive maximizer of the captured energy over the model.

    Ties go to the larger support, then to the lexicographically smallest
    index tuple, which coincides with the lowest-index rule of the fast paths.
    """
    x = as_vector(x)
    n = x.size
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    model.validate(n)
    return _exhaustive(x * x, _feasible_masks(model, n), n)


def solve_ilp_brute_force(ilp: IlpDescription) -> tuple[SupportSet, float]:
    """Enumerate binary ``z`` with ``A z <= b`` and minimize ``w^T z``."""
    n = ilp.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")

    def feasible():
        for masks in _mask_chunks(n):
            yield masks[np.all(masks.astype(np.int64) @ ilp.A.T <= ilp.b, axis=1)]

    support = _exhaustive(-np.asarray(ilp.w, dtype=np.float64), feasible(), n)
    return support, float(np.asarray(ilp.w)[support.array].sum())
