import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from prioritycsma.errors import ConfigError, DomainError
from prioritycsma.fluid import phi
from prioritycsma.graph import build_circle, build_from_edges, build_random_regular, build_torus
from prioritycsma.stability import (
    BOUNDARY,
    INFEASIBLE,
    STRICT,
    asymmetric_routing_drift,
    c_membership,
    conjecture_scan,
    cyclic_sum,
    fairness_objective,
    spectral_radius,
    symmetric_threshold,
    two_fairness_check,
)

from conftest import random_connected_graph

C9 = build_circle(9)
STAR = build_from_edges(4, [(0, 1), (0, 2), (0, 3)])


def test_symmetric_threshold():
    assert symmetric_threshold(build_circle(4)) == pytest.approx(1 / 3)
    assert symmetric_threshold(build_circle(12)) == pytest.approx(1 / 3)
    assert symmetric_threshold(build_torus(5, 5)) == pytest.approx(1 / 5)
    assert symmetric_threshold(STAR) is None


def test_membership_circle_examples():
    v = c_membership(np.full(9, 0.3), C9)
    assert v.status == STRICT and v.certified
    assert v.margin == pytest.approx(1 / 3 - 0.3)
    assert np.allclose(v.witness, v.witness[0])
    v = c_membership(np.full(9, 0.35), C9)
    assert v.status == INFEASIBLE and v.certified and v.witness is None
    v = c_membership(np.full(9, 1 / 3), C9)
    assert v.status == BOUNDARY


def test_membership_without_regular_shortcut_agrees():
    for lam, status in ((0.3, STRICT), (0.35, INFEASIBLE)):
        v = c_membership(np.full(9, lam), C9, budget=5000, rng=1, exact_regular=False)
        assert v.status == status
    v = c_membership(np.full(9, 0.35), C9, budget=5000, rng=1, exact_regular=False, use_spectral=False)
    assert v.status == INFEASIBLE and not v.certified


def test_membership_boundary_point():
    gen = np.random.default_rng(3)
    p = gen.uniform(0.2, 1.0, 6)
    g = random_connected_graph(gen, 6)
    v = c_membership(phi(p, g), g, budget=2000, rng=0)
    assert v.status == BOUNDARY
    assert abs(v.margin) <= 1e-9
    assert v.spectral_radius == pytest.approx(1.0)


def test_membership_rejects_bad_rates():
    with pytest.raises(DomainError):
        c_membership(np.array([0.1, 0.0, 0.1]), build_circle(3))
    with pytest.raises(DomainError):
        c_membership(np.array([0.1, 0.1]), build_circle(3))


def test_membership_search_only_finds_margin():
    for seed in range(5):
        gen = np.random.default_rng(seed)
        g = random_connected_graph(gen, 6)
        p = gen.uniform(0.1, 1.0, 6)
        lam = 0.9 * phi(p, g)
        v = c_membership(lam, g, budget=20_000, rng=seed, use_spectral=False)
        assert v.status == STRICT and v.margin > 0
        assert np.all(phi(v.witness, g) - lam >= v.margin - 1e-12)


def test_spectral_radius_matches_dense_eigs(rng):
    g = random_connected_graph(rng, 7)
    lam = rng.uniform(0.05, 0.4, 7)
    rho, v = spectral_radius(lam, g)
    dense = np.max(np.abs(np.linalg.eigvals(np.diag(lam / (1 - lam)) @ g.adjacency_matrix)))
    assert rho == pytest.approx(dense)
    assert np.all(v > 0)
    assert spectral_radius(np.full(3, 1.0), build_circle(3))[0] == np.inf


def test_star_membership():
    # centre competes with all leaves; witness found by search, certified by spectral bound otherwise
    assert c_membership(np.array([0.4, 0.4, 0.4, 0.4]), STAR, budget=5000, rng=0).status == INFEASIBLE
    v = c_membership(np.array([0.2, 0.5, 0.5, 0.5]), STAR, budget=5000, rng=0)
    assert v.status in (STRICT, BOUNDARY)


def test_fairness_objective_batched():
    x = np.array([1.0, 2.0])
    assert fairness_objective([0.5, 0.5], x) == pytest.approx(10.0)
    assert fairness_objective([0.0, 0.5], x) == np.inf
    out = fairness_objective(np.array([[0.5, 0.5], [1.0, 1.0]]), x)
    assert np.allclose(out, [10.0, 5.0])


def test_two_fairness_circle_ones():
    rep = two_fairness_check(np.ones(9), C9, 2000, 0)
    # cost 3N for x = ones, divided by N^2 after rescaling x to unit sum
    assert rep.baseline == pytest.approx(3 * 9 / 81)
    assert rep.min_gap >= -1e-9
    assert abs(rep.structured_gaps["p=x"]) <= 1e-12
    assert abs(rep.structured_gaps["p=1000.0x"]) <= 1e-12
    assert all(rep.structured_gaps[f"bump{i}"] > 0 for i in range(9))


def test_two_fairness_rejects_zero():
    with pytest.raises(DomainError):
        two_fairness_check(np.array([1.0, 0.0, 1.0]), build_circle(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_two_fairness_random_graphs(seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, 7))
    g = random_connected_graph(gen, n)
    rep = two_fairness_check(gen.uniform(0.05, 3.0, n), g, 500, gen)
    assert rep.min_gap >= -1e-9


def test_cyclic_sum_examples():
    assert cyclic_sum(np.full(7, 2.5)) == 0.0
    assert cyclic_sum([2, 1, 1]) == pytest.approx(0.25)
    assert cyclic_sum(np.zeros(5)) == 0.0


@settings(max_examples=200, deadline=None)
@given(arrays(float, 3, elements=st.floats(0.01, 100)))
def test_cyclic_sum_three_identity(x):
    closed = (np.sum(x * x) - np.sum(x * np.roll(x, -1))) / x.sum()
    assert cyclic_sum(x) == pytest.approx(closed, abs=1e-12 * max(1.0, x.max()))
    assert closed >= 0


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(3, 12), elements=st.floats(0.0, 10)), st.floats(0.01, 100))
def test_cyclic_sum_one_homogeneous(x, s):
    assert cyclic_sum(s * x) == pytest.approx(s * cyclic_sum(x), rel=1e-9, abs=1e-12)


def test_conjecture_scan_small():
    rep = conjecture_scan(range(3, 7), 20_000, 5, descent_starts=5)
    assert rep.samples == 20_000
    assert rep.min_value >= -1e-9 and not rep.counterexample
    assert rep.histogram_counts.sum() == 20_000
    assert set(rep.per_n_min) == {3, 4, 5, 6}
    assert rep.argmin.sum() == pytest.approx(1.0)
    again = conjecture_scan(range(3, 7), 20_000, 5, descent_starts=5)
    assert again.min_value == rep.min_value


def test_conjecture_scan_errors():
    with pytest.raises(DomainError):
        conjecture_scan([2, 3], 10, 0)
    with pytest.raises(DomainError):
        conjecture_scan([3], 0, 0)
    with pytest.raises(ConfigError):
        conjecture_scan([3], 10, 0, distribution="cauchy")


def test_asymmetric_routing_drift():
    x = np.full(9, 3.0)
    assert asymmetric_routing_drift(x, 0.3, 4) == pytest.approx(x.sum() * (0.3 - 1 / 3) / 4)
    assert asymmetric_routing_drift(np.zeros(9), 0.3, 4) == 0.0
    gen = np.random.default_rng(0)
    for _ in range(2000):
        assert asymmetric_routing_drift(gen.exponential(size=9), 0.3, 4) < 0
    with pytest.raises(ConfigError):
        asymmetric_routing_drift(np.ones(9), 0.3, 4, build_torus(3, 3))


def test_regular_random_graph_membership_matches_threshold():
    g = build_random_regular(10, 4, 2)
    for lam in (0.15, 0.19, 0.21, 0.3):
        v = c_membership(np.full(10, lam), g, budget=3000, rng=0, exact_regular=False)
        assert (v.status == STRICT) == (lam < 0.2)
