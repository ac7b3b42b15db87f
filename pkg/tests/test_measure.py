import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphatrim.measure import (
    DensityFn,
    DiscreteMeasure,
    IndexSetError,
    TrimmingError,
    empirical_measure,
    in_index_set,
    rn_reweight,
    sequential_update,
    transport_distance,
    trim_membership,
    trim_violations,
    trim_weights_ok,
)

from oracles import subset_trim_check, w1_line


# -- empirical_measure -------------------------------------------------------

def test_empirical_two_points():
    m = empirical_measure([[0.0], [1.0]])
    assert m.atoms.tolist() == [[0.0], [1.0]]
    assert m.probs.tolist() == [0.5, 0.5]


def test_empirical_merges_duplicates():
    m = empirical_measure([[0.0], [0.0], [1.0]])
    assert m.atoms.tolist() == [[0.0], [1.0]]
    assert np.allclose(m.probs, [2 / 3, 1 / 3], atol=1e-15)


def test_empirical_single_point():
    m = empirical_measure([[2.0, 3.0]])
    assert m.atoms.tolist() == [[2.0, 3.0]] and m.probs.tolist() == [1.0]


def test_empirical_empty_sample():
    with pytest.raises(ValueError, match="empty sample"):
        empirical_measure(np.zeros((0, 2)))


def test_measure_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [0.6, 0.6])
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure([[np.nan]], [1.0])


def test_measure_json_round_trip():
    m = DiscreteMeasure([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]], [0.25, 0.5, 0.25])
    assert DiscreteMeasure.from_dict(m.to_dict()) == m
    assert len(m) == 2


# -- trim_membership ---------------------------------------------------------

P2 = empirical_measure([[0.0], [1.0]])


def test_membership_identity_at_alpha_one():
    assert trim_membership(P2, P2, 1.0)


def test_membership_within_cap():
    assert trim_membership(DiscreteMeasure([[0.0], [1.0]], [0.8, 0.2]), P2, 0.5)


def test_membership_over_cap():
    q = DiscreteMeasure([[0.0], [1.0]], [0.9, 0.1])
    assert not trim_membership(q, P2, 0.6)
    bad = trim_violations(q, P2, 0.6)
    assert len(bad) == 1 and np.asarray(bad[0]["atom"]).tolist() == [0.0]


def test_membership_needs_support_inclusion():
    q = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])
    assert not trim_membership(q, P2, 0.5)


def test_membership_invalid_alpha():
    with pytest.raises(ValueError):
        trim_membership(P2, P2, 0.0)
    with pytest.raises(ValueError):
        trim_membership(P2, P2, 1.2)


def _random_pair(rng, n):
    atoms = rng.choice(10, size=n, replace=False).astype(float)[:, None]
    p = rng.dirichlet(np.ones(n))
    q = rng.dirichlet(np.ones(n) * 0.5)
    return DiscreteMeasure(atoms, q), DiscreteMeasure(atoms, p)


def test_membership_matches_subset_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        q, p = _random_pair(rng, n)
        alpha = float(rng.uniform(0.05, 1.0))
        expect = subset_trim_check(
            {float(a): float(w) for a, w in zip(q.atoms[:, 0], q.probs)},
            {float(a): float(w) for a, w in zip(p.atoms[:, 0], p.probs)},
            alpha,
        )
        assert trim_membership(q, p, alpha) == expect


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.integers(0, 10_000))
def test_membership_monotone_in_alpha(n, a, b, seed):
    q, p = _random_pair(np.random.default_rng(seed), n)
    lo, hi = min(a, b), max(a, b)
    if trim_membership(q, p, hi):
        assert trim_membership(q, p, lo)


# -- trimming weights and sequential updates ---------------------------------

def test_update_uniform_stays_uniform():
    out = sequential_update([0.5, 0.5], [[0.0], [1.0], [2.0]], 0.3)
    assert np.allclose(out, [1 / 3] * 3, atol=1e-15)


def test_update_cap_attained():
    out = sequential_update([1.0, 0.0], [[0.0], [1.0], [2.0]], 0.5)
    assert np.allclose(out, [2 / 3, 0.0, 1 / 3], atol=1e-15)
    assert trim_weights_ok(out, [[0.0], [1.0], [2.0]], 0.5)


def test_update_closed_form_after_k_steps():
    rng = np.random.default_rng(3)
    x = rng.random((40, 2))
    n, k, alpha = 10, 30, 0.4
    q = np.zeros(n)
    q[:4] = 0.25  # cap 1/(0.4*10) = 0.25
    cur = q
    for _ in range(k):
        cur = sequential_update(cur, x, alpha)
    expect = np.concatenate([q * n / (n + k), np.full(k, 1 / (n + k))])
    assert np.max(np.abs(cur - expect)) <= 1e-12


def test_update_rejects_invalid_weights():
    with pytest.raises(TrimmingError, match="not in trimming class"):
        sequential_update([1.0, 0.0], [[0.0], [1.0], [2.0]], 0.9)


def test_update_needs_next_point():
    with pytest.raises(ValueError):
        sequential_update([0.5, 0.5], [[0.0], [1.0]], 1.0)


def test_weights_cap_uses_merged_duplicates():
    x = [[0.0], [0.0], [1.0]]
    # 0.8 exceeds the per-position cap 1/(0.8*3) but not the merged cap
    assert trim_weights_ok([0.0, 0.8, 0.2], x, 0.8)
    assert not trim_weights_ok([0.0, 0.8, 0.2], x, 0.85)
    assert not trim_weights_ok([0.0, 0.9, 0.1], x, 0.75)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.floats(0.05, 1.0), st.integers(0, 10_000))
def test_update_closure(n, alpha, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 4, size=(n + 1, 1)).astype(float)  # plenty of duplicates
    cap = 1 / (alpha * n)
    order = rng.permutation(n)
    q = np.zeros(n)
    left = 1.0
    for i in order:
        q[i] = min(cap, left)
        left -= q[i]
    q /= q.sum()
    assert trim_weights_ok(q, x[:n], alpha)
    assert trim_weights_ok(sequential_update(q, x, alpha), x, alpha)


# -- reweighting and the index set -------------------------------------------

def test_reweight_constant_density():
    x = np.random.default_rng(0).random((7, 2))
    assert np.allclose(rn_reweight(x, DensityFn.constant(1.0), 1.0), np.full(7, 1 / 7))


def test_reweight_tabulated():
    w = rn_reweight([[0.0], [1.0], [2.0]], DensityFn.tabulated([2, 1, 0]), 0.5)
    assert np.allclose(w, [2 / 3, 1 / 3, 0.0], atol=1e-15)
    assert trim_weights_ok(w, [[0.0], [1.0], [2.0]], 0.5)


def test_reweight_index_not_in_set():
    with pytest.raises(IndexSetError, match="index not in N_Q"):
        rn_reweight([[0.0], [1.0], [2.0]], DensityFn.tabulated([0.5, 0.5, 0.5]), 0.5)


def test_reweight_degenerate_density():
    with pytest.raises(IndexSetError, match="degenerate density"):
        rn_reweight([[0.0], [1.0]], DensityFn.tabulated([0.0, 0.0]), 0.5)


def test_reweight_bound_too_large():
    with pytest.raises(ValueError):
        rn_reweight([[0.0], [1.0]], DensityFn.tabulated([3.0, 0.0]), 0.5)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.floats(0.05, 1.0), st.integers(0, 10_000))
def test_reweight_output_is_trimmed(n, alpha, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 5, size=(n, 1)).astype(float)
    vals = rng.uniform(0, 1 / alpha, size=n)
    g = DensityFn.tabulated(vals)
    if in_index_set(x, g) and vals.sum() > 0:
        w = rn_reweight(x, g, alpha)
        assert trim_membership(DiscreteMeasure.from_weights(x, w), empirical_measure(x), alpha)
    else:
        with pytest.raises(IndexSetError):
            rn_reweight(x, g, alpha)


def test_index_set_examples():
    x2 = [[0.0], [1.0]]
    assert in_index_set(x2, DensityFn.tabulated([2.0, 0.0]))
    assert not in_index_set([[0.0]], DensityFn.tabulated([0.9]))
    x = np.random.default_rng(1).random((50, 1))
    assert all(in_index_set(x[:n], DensityFn.constant(1.0)) for n in range(1, 51))


def test_density_forms_and_round_trip():
    x = np.array([[0.2, 0.9], [0.7, 0.1], [0.4, 0.4]])
    ind = DensityFn.indicator(2.0, lo=[None, 0.0], hi=[0.5, None])
    assert ind(x).tolist() == [2.0, 0.0, 2.0]
    lin = DensityFn("truncated-linear", {"intercept": 0.5, "slope": [1.0, 0.0], "cap": 1.0})
    assert np.allclose(lin(x), [0.7, 1.0, 0.9])
    for g in (ind, lin, DensityFn.tabulated([1, 2, 0]), DensityFn.constant(1.0)):
        again = DensityFn.from_dict(g.to_dict())
        assert np.array_equal(again(x), g(x)) and again.bound == g.bound
    with pytest.raises(ValueError):
        DensityFn("spline", {})


# -- transport distance ------------------------------------------------------

def test_transport_examples():
    assert transport_distance(P2, P2) == 0.0
    assert transport_distance(empirical_measure([[0.0]]), empirical_measure([[1.0]])) == 1.0
    assert math.isclose(transport_distance(P2, empirical_measure([[0.0]])), 0.5, abs_tol=1e-12)


def test_transport_dimension_mismatch():
    with pytest.raises(ValueError):
        transport_distance(P2, empirical_measure([[0.0, 1.0]]))


def test_transport_line_matches_cdf_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = rng.normal(size=6), rng.normal(size=4)
        pa, pb = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(4))
        got = transport_distance(DiscreteMeasure(a[:, None], pa), DiscreteMeasure(b[:, None], pb))
        assert abs(got - w1_line(a, pa, b, pb)) <= 1e-9


def test_transport_plane_two_by_one():
    q1 = DiscreteMeasure([[0.0, 0.0], [3.0, 4.0]], [0.5, 0.5])
    q2 = DiscreteMeasure([[0.0, 0.0]], [1.0])
    assert abs(transport_distance(q1, q2) - 2.5) <= 1e-9


def _rand_measure(rng, d):
    k = int(rng.integers(1, 5))
    return DiscreteMeasure(rng.integers(0, 3, size=(k, d)).astype(float), rng.dirichlet(np.ones(k)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(0, 10_000))
def test_transport_is_a_metric(d, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_rand_measure(rng, d) for _ in range(3))
    ab, ba = transport_distance(a, b), transport_distance(b, a)
    assert ab >= 0 and ab == ba
    assert ab <= transport_distance(a, c) + transport_distance(c, b) + 1e-9
    if ab <= 1e-9:
        assert a == b
