import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_gaussian, random_sft
from specrad.cocycle import (
    NORMS,
    Weight,
    adjoint_identity_check,
    backward_product,
    directional_lyapunov,
    forward_product,
    measure_exponent,
    op_norm,
    spectral_exponent,
    sup_log_norms,
)
from specrad.dynsys import DynamicsError, EventuallyPeriodic, finite_map, full_shift, sft
from specrad.estimate import EXACT
from specrad.measures import krylov_bogolyubov, periodic_orbit_measure


def log_r(A):
    return math.log(max(abs(np.linalg.eigvals(A))))


def test_operator_norms():
    M = np.array([[1, -2], [3, 4]])
    assert op_norm(M, "l1") == 6
    assert op_norm(M, "linf") == 7
    assert op_norm(M, "l2") == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-12)
    with pytest.raises(ValueError):
        op_norm(M, "l3")


def test_weight_support_and_validation():
    w = Weight(np.array([[[0, 0], [0, 0]], [[0, 1e-300], [0, 0]]]))
    assert w.support == {1}
    with pytest.raises(ValueError):
        Weight(np.ones((2, 2, 3)))
    with pytest.raises(ValueError):
        Weight.scalar([1.0, math.inf])


def test_forward_product_single_step_is_the_weight(rng):
    A = complex_gaussian(rng, 3, 3)
    s = finite_map([0])
    p = forward_product(Weight.constant(A, 1), s, 0, 1)
    assert np.allclose(p.matrix, A, rtol=1e-12, atol=0)


def test_forward_product_constant_weight_matches_repeated_squaring(rng):
    A = complex_gaussian(rng, 3, 3)
    A8 = np.linalg.matrix_power(np.linalg.matrix_power(np.linalg.matrix_power(A, 2), 2), 2)
    p = forward_product(Weight.constant(A, 2), full_shift(2), (0, 1, 1, 0, 1, 0, 0, 1), 8)
    assert np.abs(p.matrix - A8).max() <= 1e-10 * np.abs(A8).max()


def test_zero_factor_gives_minus_inf():
    w = Weight.scalar([2.0, 0.0])
    s = finite_map([1, 0])
    assert forward_product(w, s, 0, 1).log_norm == math.log(2)
    assert forward_product(w, s, 0, 2).log_norm == -math.inf
    assert np.all(forward_product(w, s, 0, 5).matrix == 0)


def test_product_order(rng):
    s = finite_map([1, 2, 0])
    w = Weight(complex_gaussian(rng, 3, 2, 2))
    a = w.values
    f = forward_product(w, s, 0, 3).matrix
    b = backward_product(w, s, 0, 3).matrix
    assert np.allclose(f, a[0] @ a[1] @ a[2], rtol=1e-12)
    assert np.allclose(b, a[2] @ a[1] @ a[0], rtol=1e-12)


def test_backward_equals_forward_for_diagonal_weights(rng):
    s = full_shift(3)
    w = Weight(np.stack([np.diag(rng.normal(size=3)) for _ in range(3)]).astype(complex))
    x = tuple(int(t) for t in rng.integers(3, size=10))
    f, b = forward_product(w, s, x, 10), backward_product(w, s, x, 10)
    assert f.log_norm == pytest.approx(b.log_norm, rel=1e-13)
    assert np.allclose(f.normalized, b.normalized, atol=1e-13)


def test_renormalized_product_matches_direct_multiplication(rng):
    for d in (1, 4, 8):
        s = full_shift(2)
        w = Weight(complex_gaussian(rng, 2, d, d))
        x = tuple(int(t) for t in rng.integers(2, size=64))
        direct = np.eye(d, dtype=complex)
        for k in x:
            direct = direct @ w.values[k]
        p = forward_product(w, s, x, 64)
        assert np.abs(p.matrix - direct).max() <= 1e-10 * np.abs(direct).max()


def test_long_orbit_does_not_overflow():
    w = Weight.constant(np.array([[1e3, 1.0], [0.0, 2.0]]), 1)
    p = forward_product(w, finite_map([0]), 0, 100_000)
    assert np.isfinite(p.log_norm)
    assert p.log_norm / 100_000 == pytest.approx(math.log(1e3), rel=1e-6)


def test_adjoint_identity_examples(rng):
    s = full_shift(2)
    diag = Weight(np.stack([np.diag([1.5, -0.5]), np.diag([2.0, 0.25])]).astype(complex))
    assert adjoint_identity_check(diag, s, (0, 1, 1), 3) == 0.0
    w = Weight(complex_gaussian(rng, 2, 2, 2))
    assert adjoint_identity_check(w, s, (1,), 1) == 0.0
    assert adjoint_identity_check(w, s, (0, 1, 0), 3) <= 1e-12


def random_walk(r, s, n):
    x = int(r.integers(s.n_states))
    path = [x]
    for _ in range(n - 1):
        x = int(r.choice(s.successors[x]))
        path.append(x)
    return [s.words[k][0] for k in path]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_adjoint_identity_property(n_symbols, d, n, seed):
    r = np.random.default_rng(seed)
    s = random_sft(r, n_symbols)
    w = Weight(complex_gaussian(r, s.n_states, d, d))
    assert adjoint_identity_check(w, s, random_walk(r, s, n), n) <= 1e-12


def test_measure_exponent_examples():
    s = finite_map([0])
    A = np.array([[1.0, 5.0], [0.0, 0.5]])
    assert measure_exponent(Weight.constant(A, 1), s, periodic_orbit_measure((0,))) == pytest.approx(0.0, abs=1e-15)
    s2 = finite_map([1, 0])
    assert measure_exponent(Weight.scalar([2.0, 8.0]), s2, periodic_orbit_measure((0, 1))) == pytest.approx(math.log(4))
    w = Weight(np.array([[[0, 2], [0, 0]], [[0, 0], [2, 0]]]))
    assert measure_exponent(w, s2, periodic_orbit_measure((0, 1))) == pytest.approx(math.log(2), rel=1e-14)


def test_measure_exponent_rejects_non_periodic_measures():
    s = finite_map([1, 0])
    with pytest.raises(ValueError):
        measure_exponent(Weight.scalar([1.0, 1.0]), s, krylov_bogolyubov(s, 0, 3))
    with pytest.raises(DynamicsError):
        measure_exponent(Weight.scalar([1.0, 1.0]), s, periodic_orbit_measure((0,)))


def test_spectral_exponent_scalar_constant_collapses_at_two_steps():
    e = spectral_exponent(Weight.scalar([3.0, 3.0]), full_shift(2), 2)
    assert e.exactness == EXACT
    assert e.lower == pytest.approx(math.log(3)) and e.width <= 1e-9


def test_spectral_exponent_zero_weight():
    e = spectral_exponent(Weight.scalar([0.0, 0.0]), full_shift(2), 10)
    assert e.lower == e.upper == -math.inf and e.r == 0.0


def test_spectral_exponent_constant_matrix(rng):
    for d in (2, 3):
        A = complex_gaussian(rng, d, d)
        e = spectral_exponent(Weight.constant(A, 2), full_shift(2), 2000)
        assert e.lower <= log_r(A) + 1e-9 and e.upper >= log_r(A) - 1e-9
        assert abs(e.estimate - log_r(A)) <= 1e-6


def test_spectral_exponent_nilpotent_pair():
    w = Weight(np.array([[[0, 2], [0, 0]], [[0, 0], [2, 0]]]))
    e = spectral_exponent(w, full_shift(2), 200)
    assert e.lower == pytest.approx(math.log(2)) and e.upper == pytest.approx(math.log(2))


def test_spectral_exponent_ignores_dead_branches():
    # state 1 is a dead end with a huge weight; only the fixed point at 0 persists
    s = finite_map([0, None])
    e = spectral_exponent(Weight.scalar([2.0, 1e6]), s, 50)
    assert e.upper == pytest.approx(math.log(2)) and e.lower == pytest.approx(math.log(2))


def _check_subadditive(u, limit):
    for m in range(1, limit + 1):
        for n in range(1, limit + 1):
            if m + n <= len(u):
                assert u[m + n - 1] <= u[m - 1] + u[n - 1] + 1e-9 * (1 + abs(u[m - 1]) + abs(u[n - 1]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sup_log_norms_subadditive_on_branching_systems(n_symbols, d, seed):
    r = np.random.default_rng(seed)
    s = random_sft(r, n_symbols)
    w = Weight(complex_gaussian(r, s.n_states, d, d))
    u, n_exact = sup_log_norms(w, s, 32, frontier_cap=5000)
    assert len(u) == n_exact >= 1
    _check_subadditive(u, 32)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sup_log_norms_subadditive_on_maps(n, d, seed):
    r = np.random.default_rng(seed)
    s = finite_map([int(r.integers(n)) for _ in range(n)])
    w = Weight(complex_gaussian(r, n, d, d))
    u, n_exact = sup_log_norms(w, s, 64)
    assert n_exact == 64
    _check_subadditive(u, 32)


def test_frontier_cap_truncates_but_keeps_a_valid_bound(rng):
    s = full_shift(2)
    w = Weight(complex_gaussian(rng, 2, 2, 2))
    e = spectral_exponent(w, s, 100, max_len=6)
    assert e.n_used < 100
    assert e.lower <= e.upper


def test_sup_log_norms_brute_force(rng):
    s = random_sft(rng, 3)
    w = Weight(complex_gaussian(rng, s.n_states, 2, 2))
    u, _ = sup_log_norms(w, s, 6)
    for n in range(1, 7):
        best = -math.inf
        stack = [(x, (x,)) for x in s.states]
        while stack:
            cur, path = stack.pop()
            if len(path) == n:
                if s.successors[cur]:
                    P = np.eye(2)
                    for k in path:
                        P = P @ w.values[k]
                    best = max(best, math.log(np.linalg.norm(P, 2)))
                continue
            stack.extend((y, path + (y,)) for y in s.successors[cur])
        assert u[n - 1] == pytest.approx(best, rel=1e-12)


def test_norm_choice_leaves_exponent_unchanged(rng):
    s = finite_map([1, 2, 0, 2])
    w = Weight(complex_gaussian(rng, 4, 3, 3))
    vals = [spectral_exponent(w, s, 2000, norm=nm).estimate for nm in NORMS]
    assert max(vals) - min(vals) <= 1e-4


def test_directional_lyapunov_diagonal():
    s = finite_map([0])
    w = Weight.constant(np.diag([2.0, 1.0]), 1)
    assert directional_lyapunov(w, s, 0, [1, 0], 200) == pytest.approx(math.log(2))
    assert directional_lyapunov(w, s, 0, [0, 1], 200) == pytest.approx(0.0, abs=1e-15)
    assert directional_lyapunov(w, s, 0, [1, 1], 200) == pytest.approx(math.log(2), abs=1e-12)


def test_directional_lyapunov_scalar_is_birkhoff_average():
    s = full_shift(2)
    w = Weight.scalar([2.0, 5.0])
    x = EventuallyPeriodic((), (0, 1, 1))
    expected = (math.log(2) + 2 * math.log(5)) / 3
    assert directional_lyapunov(w, s, x, [1.0], 300, tail=False) == pytest.approx(expected)


def test_directional_lyapunov_generic_direction(rng):
    A = rng.normal(size=(3, 3))
    v = rng.normal(size=3)
    lam = directional_lyapunov(Weight.constant(A, 1), finite_map([0]), 0, v, 5000)
    assert abs(lam - log_r(A)) <= 1e-4


def test_directional_lyapunov_hits_zero():
    w = Weight.constant(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)
    assert directional_lyapunov(w, finite_map([0]), 0, [0, 1], 10) == -math.inf
    with pytest.raises(ValueError):
        directional_lyapunov(w, finite_map([0]), 0, [0, 0], 10)
