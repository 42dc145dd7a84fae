import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyclash import (
    ClusteredChainModel,
    DimensionError,
    InfeasibleModelError,
    PartitionBudgetModel,
    SupportSet,
    UniformModel,
    data_error,
    generate_instance,
    gradient,
)
from pyclash.core import restrict


# data_error / gradient


def test_data_error_zero_residual():
    assert data_error(np.eye(2), [1.0, 2.0], [1.0, 2.0]) == 0.0


def test_data_error_is_squared_norm_of_y_at_zero():
    assert data_error(np.eye(2), [1.0, 2.0], [0.0, 0.0]) == 5.0


def test_data_error_matches_double_loop():
    rng = np.random.default_rng(3)
    phi, y, x = rng.normal(size=(4, 6)), rng.normal(size=4), rng.normal(size=6)
    total = 0.0
    for i in range(4):
        r = y[i]
        for j in range(6):
            r -= phi[i, j] * x[j]
        total += r * r
    assert data_error(phi, y, x) == pytest.approx(total, rel=1e-13)


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 2\).*\(3,\)"):
        data_error(np.eye(2), [1.0, 2.0, 3.0], [1.0, 2.0])
    with pytest.raises(DimensionError):
        gradient(np.eye(2), [1.0, 2.0], [1.0, 2.0, 3.0])


def test_nonfinite_input_rejected():
    with pytest.raises(ValueError):
        data_error(np.eye(2), [1.0, np.nan], [0.0, 0.0])


def test_gradient_identity_zero_y():
    x = np.array([1.5, -2.0, 0.25])
    np.testing.assert_array_equal(gradient(np.eye(3), np.zeros(3), x), 2 * x)


def test_gradient_vanishes_at_truth():
    inst = generate_instance(30, 12, 3, seed=4)
    assert np.max(np.abs(gradient(inst.phi, inst.y, inst.x_star))) < 1e-14


def _fd_gradient(phi, y, x, h=1e-6):
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (data_error(phi, y, x + e) - data_error(phi, y, x - e)) / (2 * h)
    return g


def test_gradient_small_fd():
    rng = np.random.default_rng(0)
    phi, y, x = rng.normal(size=(3, 5)), rng.normal(size=3), rng.normal(size=5)
    np.testing.assert_allclose(gradient(phi, y, x), _fd_gradient(phi, y, x), atol=1e-5)


def test_gradient_fd_100_instances():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m, n = rng.integers(1, 21, size=2)
        phi, y, x = rng.normal(size=(m, n)), rng.normal(size=m), rng.normal(size=n)
        np.testing.assert_allclose(gradient(phi, y, x), _fd_gradient(phi, y, x), atol=1e-5)


# SupportSet


def test_support_rejects_unsorted_and_out_of_range():
    with pytest.raises(ValueError):
        SupportSet((2, 1), 4)
    with pytest.raises(ValueError):
        SupportSet((1, 1), 4)
    with pytest.raises(IndexError):
        SupportSet((0, 4), 4)


def test_support_different_spaces():
    with pytest.raises(DimensionError):
        SupportSet.of([0], 3) | SupportSet.of([0], 4)


def _bits(s: SupportSet) -> int:
    return sum(1 << i for i in s)


def _from_bits(b: int, n: int) -> SupportSet:
    return SupportSet(tuple(i for i in range(n) if b >> i & 1), n)


def test_support_algebra_exhaustive_small():
    for n in range(0, 6):
        full = (1 << n) - 1
        for a, b in itertools.product(range(1 << n), repeat=2):
            A, B = _from_bits(a, n), _from_bits(b, n)
            assert _bits(A | B) == a | b
            assert _bits(A & B) == a & b
            assert _bits(A - B) == a & ~b
            assert _bits(A.complement()) == full & ~a
            assert A.issubset(B) == (a & ~b == 0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 64).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1), st.integers(0, (1 << n) - 1))))
def test_support_algebra_bitset(args):
    n, a, b = args
    A, B = _from_bits(a, n), _from_bits(b, n)
    full = (1 << n) - 1
    assert _bits(A | B) == a | b
    assert _bits(A & B) == a & b
    assert _bits(A - B) == a & ~b
    assert _bits(A.complement()) == full & ~a
    assert len(A) == bin(a).count("1")


def test_restrict_zeroes_outside():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(restrict(x, SupportSet.of([0, 2], 3)), [1.0, 0.0, 3.0])


# generate_instance


def test_noiseless_instance_is_exact():
    inst = generate_instance(50, 20, 4, seed=1)
    np.testing.assert_array_equal(inst.y, inst.phi @ inst.x_star)
    assert inst.noise_energy == 0.0


def test_large_noisy_configuration_accepted():
    inst = generate_instance(800, 240, 89, noise_energy=0.05, seed=7)
    assert inst.phi.shape == (240, 800)
    assert len(inst.support) == 89
    assert np.linalg.norm(inst.x_star) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(inst.y - inst.phi @ inst.x_star) == pytest.approx(0.05, rel=1e-10)
    assert inst.lam == pytest.approx(np.abs(inst.x_star).sum())


def test_same_seed_bit_identical():
    a = generate_instance(40, 20, 5, noise_energy=0.1, seed=99)
    b = generate_instance(40, 20, 5, noise_energy=0.1, seed=99)
    for name in ("phi", "y", "x_star", "noise"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    c = generate_instance(40, 20, 5, noise_energy=0.1, seed=100)
    assert a.phi.tobytes() != c.phi.tobytes()


@pytest.mark.parametrize("energy", [1e-3, 0.05, 1.0, 7.5])
def test_noise_energy_exact(energy):
    for seed in range(10):
        inst = generate_instance(60, 30, 5, noise_energy=energy, seed=seed)
        assert np.linalg.norm(inst.y - inst.phi @ inst.x_star) == pytest.approx(energy, rel=1e-10)
        assert inst.noise_energy == pytest.approx(energy, rel=1e-12)


def test_phi_variance_is_one_over_m():
    inst = generate_instance(400, 100, 5, seed=2)
    assert inst.phi.mean() == pytest.approx(0.0, abs=5e-3)
    assert inst.phi.var() == pytest.approx(1 / 100, rel=0.02)


@pytest.mark.parametrize("model", [
    UniformModel(6),
    ClusteredChainModel(6, 3),
    PartitionBudgetModel.contiguous(30, 5, 2, 6),
])
def test_support_feasible_and_lambda(model):
    for seed in range(20):
        inst = generate_instance(30, 15, 6, model, seed=seed)
        assert model.is_feasible(inst.support)
        assert len(inst.support) == 6
        assert np.abs(inst.x_star).sum() <= inst.lam + 1e-12


def test_clustered_supports_cover_every_placement():
    # all C(n-k+r, r) placements of r runs should appear under uniform sampling
    model = ClusteredChainModel(4, 2)
    counts = {}
    for s in range(1500):
        key = generate_instance(8, 4, 4, model, seed=s).support.indices
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 15  # C(8 - 4 + 2, 2)
    assert min(counts.values()) > 50 and max(counts.values()) < 160  # mean 100


def test_lambda_policies():
    inst = generate_instance(30, 15, 3, lambda_policy="inf", seed=0)
    assert np.isinf(inst.lam)
    inst = generate_instance(30, 15, 3, lambda_policy=2.0, seed=0)
    assert inst.lam == pytest.approx(2 * np.abs(inst.x_star).sum())
    with pytest.raises(ValueError):
        generate_instance(30, 15, 3, lambda_policy=0.5, seed=0)
    with pytest.raises(ValueError):
        generate_instance(30, 15, 3, lambda_policy="loose", seed=0)


@pytest.mark.parametrize("n,m,k", [(10, 12, 3), (10, 5, 6), (10, 5, 0)])
def test_infeasible_dimensions(n, m, k):
    with pytest.raises(InfeasibleModelError):
        generate_instance(n, m, k)


def test_infeasible_model():
    with pytest.raises(ValueError):
        generate_instance(10, 8, 6, ClusteredChainModel(6, 4))


def test_instance_is_read_only():
    inst = generate_instance(20, 10, 2, seed=0)
    with pytest.raises(ValueError):
        inst.phi[0, 0] = 1.0
