import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_finite_maps, random_sft
from specrad.dynsys import (
    CircleLift,
    DynamicsError,
    EventuallyPeriodic,
    circle_grid,
    domain_chain,
    essential_domain,
    finite_map,
    full_shift,
    periodic_orbits,
    rotation_number,
    sft,
)

# frac(gamma^n(0)/n) at n = 10^7 for gamma(t) = t + 0.1 + 0.05 sin(2 pi t)/(2 pi),
# iterated in plain floats outside the package
ROTATION_ORACLE = 0.09969331183355391


def test_domain_chain_of_partial_map():
    ch = domain_chain(finite_map([1, 1, None]), 3)
    assert ch.delta_n[0] == {0, 1, 2}
    assert ch.delta_n[1] == {0, 1}
    assert ch.delta_minus_n[1] == {1}
    assert ch.delta_inf == {1}


def test_domain_chain_full_shift():
    s = full_shift(2)
    ch = domain_chain(s, 5)
    assert all(d == set(s.states) for d in ch.delta_n)
    assert ch.delta_inf == set(s.states)


def test_domain_chain_empty_map():
    ch = domain_chain(finite_map([None, None]), 2)
    assert ch.delta_n[1] == set() and ch.delta_inf == set()


def _brute_delta_inf(sys):
    """States with arbitrarily long forward orbits and backward chains."""
    n = sys.n_states
    fwd = set(sys.states)
    for _ in range(n + 1):
        fwd = {x for x in fwd if any(y in fwd for y in sys.successors[x])}
    pred = sys.predecessors()
    bwd = set(sys.states)
    for _ in range(n + 1):
        bwd = {y for y in bwd if any(x in bwd for x in pred[y])}
    return fwd & bwd


def test_delta_inf_brute_force_all_small_maps():
    for n in range(1, 5):
        for sys in all_finite_maps(n):
            assert essential_domain(sys) == _brute_delta_inf(sys)


def test_delta_inf_brute_force_five_states(rng):
    for _ in range(300):
        phi = [None if rng.random() < 0.2 else int(rng.integers(5)) for _ in range(5)]
        sys = finite_map(phi)
        assert essential_domain(sys) == _brute_delta_inf(sys)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(0, 5)), min_size=1, max_size=6))
def test_domain_recursion_holds_exactly(phi):
    phi = [None if (y is None or y >= len(phi)) else y for y in phi]
    sys = finite_map(phi)
    ch = domain_chain(sys, 6)
    for n in range(1, 7):
        pre = {x for x in sys.states if any(y in ch.delta_n[n - 1] for y in sys.successors[x])}
        assert ch.delta_n[n] == pre
        img = {y for x in ch.delta_n[n] for y in sys.orbit(x, n, endpoint=True)[-1:]}
        assert ch.delta_minus_n[n] == img
        assert ch.delta_inf <= ch.delta_n[n] and ch.delta_inf <= ch.delta_minus_n[n]
    assert {sys.phi(x) for x in ch.delta_inf} == set(ch.delta_inf)


def test_periodic_orbits_full_two_shift():
    assert periodic_orbits(full_shift(2), 2) == [(0,), (1,), (0, 1)]


def test_periodic_orbits_two_cycle_has_no_fixed_point():
    assert periodic_orbits(finite_map([1, 0]), 1) == []


def test_periodic_orbits_triangular_sft():
    assert periodic_orbits(sft([[1, 1], [0, 1]]), 3) == [(0,), (1,)]


def _brute_periodic_words(n_symbols, p):
    """Primitive words of length p up to rotation, as symbol tuples."""
    out = set()
    for w in itertools.product(range(n_symbols), repeat=p):
        if any(w == w[d:] + w[:d] for d in range(1, p) if p % d == 0):
            continue
        out.add(min(w[i:] + w[:i] for i in range(p)))
    return out


def test_periodic_orbit_counts_match_necklaces():
    s = full_shift(3)
    orbits = periodic_orbits(s, 4)
    for p in range(1, 5):
        got = {o for o in orbits if len(o) == p}
        assert got == _brute_periodic_words(3, p)


def test_periodic_orbits_closed_under_phi(rng):
    for _ in range(20):
        s = random_sft(rng, 3, word_depth=2)
        for orb in periodic_orbits(s, 4):
            for u, v in zip(orb, orb[1:] + orb[:1]):
                assert v in s.successors[u]
    for _ in range(20):
        phi = [int(rng.integers(6)) for _ in range(6)]
        s = finite_map(phi)
        for orb in periodic_orbits(s, 6):
            assert [s.phi(x) for x in orb] == list(orb[1:] + orb[:1])


def test_periodic_orbits_respect_restrict():
    s = full_shift(2)
    assert periodic_orbits(s, 3, restrict={1}) == [(1,)]


def test_periodic_orbits_errors():
    with pytest.raises(DynamicsError):
        periodic_orbits(full_shift(2), 0)
    with pytest.raises(DynamicsError):
        periodic_orbits(circle_grid(10, CircleLift(0.25)), 3)


def test_sft_words_are_admissible():
    A = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 0]])
    s = sft(A, 3)
    for w in s.words:
        assert all(A[w[i], w[i + 1]] for i in range(len(w) - 1))
    for u, succ in enumerate(s.successors):
        for v in succ:
            assert s.words[u][1:] == s.words[v][:-1]


def test_sft_prunes_dead_words():
    s = sft([[1, 1], [0, 0]])
    assert s.words == ((0,),)


def test_sft_orbit_of_eventually_periodic_point():
    s = full_shift(2, 2)
    x = EventuallyPeriodic((1,), (0, 1))
    labels = [s.labels[i] for i in s.orbit(x, 3)]
    assert labels == ["1,0", "0,1", "1,0"]
    with pytest.raises(DynamicsError):
        sft([[1, 1], [0, 1]]).orbit((1, 0), 2)


def test_orbit_outside_domain_rejected():
    with pytest.raises(DynamicsError):
        finite_map([1, None]).orbit(0, 2)


def test_invalid_systems_rejected():
    with pytest.raises(DynamicsError):
        finite_map([3])
    with pytest.raises(DynamicsError):
        sft([[1, 2], [1, 1]])
    with pytest.raises(DynamicsError):
        circle_grid(10, lambda t: -t)
    with pytest.raises(DynamicsError):
        circle_grid(10, CircleLift(0.0, ((2.0, 1),)))


def test_rotation_number_rigid_rotation():
    s = circle_grid(100, CircleLift(0.25))
    assert rotation_number(s, 1) == 0.25
    assert rotation_number(s, 1000) == 0.25


def test_rotation_number_identity():
    assert rotation_number(circle_grid(100, CircleLift(0.0)), 500) == 0.0


def test_rotation_number_diffeomorphism_against_long_run_oracle():
    s = circle_grid(1000, CircleLift(0.1, ((0.05, 1),)))
    assert abs(rotation_number(s, 100_000) - ROTATION_ORACLE) <= 1e-5


def test_circle_grid_is_sampled_full_map():
    s = circle_grid(8, CircleLift(0.25))
    assert s.sampled and s.deterministic
    assert [s.phi(x) for x in s.states] == [2, 3, 4, 5, 6, 7, 0, 1]
