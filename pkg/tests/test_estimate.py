import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from specrad.estimate import (
    BRACKET,
    EXACT,
    SAMPLED,
    ExponentEstimate,
    ReconciliationError,
    reconcile,
)


def est(lo, hi, method="m", exactness=BRACKET, **kw):
    return ExponentEstimate(lo, hi, method, exactness, **kw)


def test_intersection_of_two_brackets():
    r = reconcile([est(0.0, 1.0, "a"), est(0.5, 2.0, "b")])
    assert (r.lower, r.upper) == (0.5, 1.0)
    assert r.meta["lower_from"] == "b" and r.meta["upper_from"] == "a"


def test_disjoint_brackets_name_both_methods():
    with pytest.raises(ReconciliationError) as info:
        reconcile([est(0.0, 1.0, "gelfand"), est(2.0, 3.0, "karp")])
    assert set(info.value.methods) == {"gelfand", "karp"}
    assert "gelfand" in str(info.value) and "karp" in str(info.value)


def test_single_estimate_is_returned_unchanged():
    e = est(0.1, 0.2, "x")
    assert reconcile([e]) is e


def test_sampled_brackets_are_advisory():
    r = reconcile([est(0.0, 1.0, "gelfand"), est(5.0, 6.0, "extension_vp", SAMPLED)])
    assert (r.lower, r.upper) == (0.0, 1.0)
    assert r.meta["advisory"] == ["extension_vp"]


def test_only_sampled_inputs_intersect_among_themselves():
    r = reconcile([est(0.0, 1.0, "a", SAMPLED), est(0.5, 2.0, "b", SAMPLED)])
    assert r.exactness == SAMPLED and (r.lower, r.upper) == (0.5, 1.0)


def test_rounding_level_overlap_is_tolerated():
    r = reconcile([est(1.0 + 1e-13, 1.0 + 1e-13, "a", EXACT), est(1.0, 1.0, "b", EXACT)])
    assert r.lower == r.upper == 1.0


def test_invariants_enforced():
    with pytest.raises(ValueError):
        est(1.0, 0.0)
    with pytest.raises(ValueError):
        est(0.0, 1e-6, exactness=EXACT)
    with pytest.raises(ValueError):
        est(math.nan, 0.0)


def test_r_view_uses_exp_of_minus_inf_zero():
    e = est(-math.inf, -math.inf, exactness=EXACT)
    assert e.r_lower == e.r_upper == e.r == 0.0
    e = est(math.log(2), math.log(3))
    assert e.r_lower == pytest.approx(2) and e.r_upper == pytest.approx(3)


def test_json_round_trip_with_infinities():
    e = est(-math.inf, 1.5, "gelfand", witness=["0", "1"], n_used=7, estimate=1.0)
    d = e.to_dict()
    assert d["lower"] == "-inf" and d["r_lower"] == 0.0
    back = ExponentEstimate.from_dict(d)
    assert back == e


finite = st.floats(-50, 50, allow_nan=False)


@given(st.lists(st.tuples(finite, st.floats(0, 5)), min_size=1, max_size=6))
def test_reconciled_bracket_is_the_intersection(pairs):
    ests = [est(lo, lo + w, f"m{i}") for i, (lo, w) in enumerate(pairs)]
    lo = max(e.lower for e in ests)
    hi = min(e.upper for e in ests)
    if lo > hi + 1e-9 * (1 + abs(lo) + abs(hi)):
        with pytest.raises(ReconciliationError):
            reconcile(ests)
    else:
        r = reconcile(ests)
        assert r.lower <= r.upper
        assert all(e.lower - 1e-9 <= r.lower and r.upper <= e.upper + 1e-9 for e in ests)
