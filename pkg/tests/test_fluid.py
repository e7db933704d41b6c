import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from prioritycsma.errors import ConfigError, DomainError
from prioritycsma.fluid import (
    MultiHopDrift,
    SingleHopDrift,
    integrate,
    lyapunov_max,
    lyapunov_max_drift_check,
    lyapunov_utility_drift_check,
    multi_hop_drift,
    phi,
    quadratic_drift_multi_hop,
    single_hop_drift,
    utility_lyapunov,
)
from prioritycsma.graph import build_circle, build_from_edges, build_random_regular, build_torus

from conftest import random_connected_graph

C9 = build_circle(9)
weights = arrays(float, 9, elements=st.floats(0, 100, allow_nan=False))


def test_phi_examples():
    assert np.allclose(phi(np.ones(7), build_circle(7)), 1 / 3)
    assert np.array_equal(phi(np.zeros(5), build_circle(5)), np.zeros(5))
    assert np.allclose(phi([1, 3], build_from_edges(2, [(0, 1)])), [0.25, 0.75])


def test_phi_rejects_negative_and_wrong_length():
    with pytest.raises(DomainError):
        phi([1, -1, 1], build_circle(3))
    with pytest.raises(DomainError):
        phi([1, 1], build_circle(3))


def test_phi_batched_matches_rows(rng):
    p = rng.random((6, 9))
    assert np.allclose(phi(p, C9), np.array([phi(row, C9) for row in p]))


@settings(max_examples=200, deadline=None)
@given(weights, st.floats(1e-3, 1e3))
def test_phi_zero_homogeneous_and_bounded(p, s):
    r = phi(p, C9)
    assert np.all((r >= 0) & (r <= 1))
    assert np.allclose(phi(s * p, C9), r, atol=1e-12, rtol=0)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 9, elements=st.floats(0.01, 10)), st.integers(0, 8), st.floats(1e-3, 1.0))
def test_phi_non_increasing_in_neighbours(p, j, h):
    up = p.copy()
    up[j] += h
    before, after = phi(p, C9), phi(up, C9)
    for i in C9.adjacency[j]:
        assert after[i] <= before[i] + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["c9", "t55"]), st.integers(0, 2**32 - 1))
def test_convexity_inequality(which, seed):
    g = C9 if which == "c9" else build_torus(5, 5)
    m = 3 if which == "c9" else 5
    gen = np.random.default_rng(seed)
    x = gen.exponential(size=g.node_count) * (gen.random(g.node_count) < 0.8)
    assert x @ phi(x, g) - x.sum() / m >= -1e-12


def test_single_hop_drift_examples():
    assert np.allclose(single_hop_drift(np.ones(9), 0.3, C9), -1 / 30)
    assert np.array_equal(single_hop_drift(np.zeros(9), 0.3, C9, "absorbing"), np.zeros(9))
    assert np.allclose(single_hop_drift(np.zeros(9), 0.3, C9, "emitting"), 0.3)
    x = np.zeros(9)
    x[1] = 2.0
    r = single_hop_drift(x, 0.3, C9, "absorbing")
    assert r[0] == pytest.approx(0.3) and r[2] == pytest.approx(0.3)
    assert r[4] == 0.0


def test_unknown_boundary_mode():
    with pytest.raises(ConfigError):
        single_hop_drift(np.ones(9), 0.3, C9, "sticky")


def test_multi_hop_drift_examples():
    assert np.allclose(multi_hop_drift(np.ones(9), 0.3, 4, C9), (0.3 - 1 / 3) / 4)
    k3 = build_circle(3)
    assert np.allclose(multi_hop_drift([1, 0, 0], 0.0, 2, k3), [-1, 0.25, 0.25])
    x = np.random.default_rng(1).random(9)
    assert np.allclose(multi_hop_drift(x, 0.3, 1, C9), single_hop_drift(x, 0.3, C9))
    star = build_from_edges(4, [(0, 1), (0, 2), (0, 3)])
    with pytest.raises(ConfigError):
        multi_hop_drift(np.ones(4), 0.3, 2, star)


def test_integrator_matches_symmetric_closed_form():
    dt = 0.035
    traj = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 0.3)), 35.0, dt)
    exact = np.maximum(0.0, 1 + (0.3 - 1 / 3) * traj.times)
    assert np.max(np.abs(traj.states - exact[:, None])) <= 10 * dt
    assert traj.times[-1] == pytest.approx(35.0)
    assert np.all(traj.states >= 0)


def test_integrator_zero_absorbing_stays_zero():
    traj = integrate(np.zeros(9), SingleHopDrift(C9, np.full(9, 0.3)), 10.0, boundary_mode="absorbing")
    assert not np.any(traj.states)
    grow = integrate(np.zeros(9), SingleHopDrift(C9, np.full(9, 0.3)), 10.0, boundary_mode="emitting")
    # leaves zero, then chatters at the boundary since 0.3 < 1/3
    assert np.allclose(grow.states[1], 0.003)
    assert grow.states.max() <= 0.003 + 1e-15


def test_integrator_default_step_and_errors():
    traj = integrate(np.ones(3), SingleHopDrift(build_circle(3), np.full(3, 0.2)), 2.0)
    assert len(traj.times) == 1001
    with pytest.raises(DomainError):
        integrate(np.ones(3), SingleHopDrift(build_circle(3), np.full(3, 0.2)), -1.0)
    with pytest.raises(DomainError):
        integrate(-np.ones(3), SingleHopDrift(build_circle(3), np.full(3, 0.2)), 1.0)


def test_trajectory_lipschitz_and_at(rng):
    for _ in range(10):
        g = random_connected_graph(rng, 6)
        lam = rng.uniform(0.05, 1.5, 6)
        drift = SingleHopDrift(g, lam)
        traj = integrate(rng.exponential(size=6), drift, 5.0, 0.01)
        assert traj.is_lipschitz(drift.rate_bound())
    assert np.array_equal(traj.at(2.004), traj.states[200])
    assert traj.at(np.array([0.0, 99.0])).shape == (2, 6)


def test_trajectory_csv(tmp_path):
    traj = integrate(np.ones(3), SingleHopDrift(build_circle(3), np.full(3, 0.2)), 0.02, 0.01)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x0,x1,x2"
    assert len(lines) == 4


def test_dominated_rates_shrink_the_norm():
    g = build_random_regular(10, 3, 4)
    p = np.random.default_rng(4).uniform(0.2, 1.0, 10)
    lam = 0.9 * phi(p, g)
    x0 = np.random.default_rng(5).random(10)
    x0 /= x0.max()
    traj = integrate(x0, SingleHopDrift(g, lam), 50.0, 0.01)
    assert traj.states[-1].max() < 0.9


def test_lyapunov_max_examples():
    p = np.array([0.5, 2.0])
    assert lyapunov_max(p, p) == 1.0
    assert lyapunov_max([0, 0], p) == 0.0
    assert lyapunov_max([1, 2], [1, 1]) == 2.0
    with pytest.raises(DomainError):
        lyapunov_max([1, 2], [1, 0])


def test_lyapunov_max_check_symmetric_circle():
    traj = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 0.3)), 35.0, 0.01)
    rep = lyapunov_max_drift_check(traj, np.ones(9), 0.3, C9)
    assert rep.status == "ok" and rep.monotone
    assert rep.required_rate == pytest.approx(1 / 30)
    assert rep.final_value < 0.01


def test_lyapunov_max_check_boundary_not_applicable():
    traj = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 1 / 3)), 5.0)
    rep = lyapunov_max_drift_check(traj, np.ones(9), 1 / 3, C9)
    assert rep.status == "hypothesis_not_satisfied"
    assert set(rep.to_dict()) >= {"status", "first_violation_time", "worst_excess"}


def test_lyapunov_max_check_random_regular():
    for seed in range(5):
        g = build_random_regular(8, 3, seed)
        gen = np.random.default_rng(seed)
        p = gen.uniform(0.3, 1.0, 8)
        lam = 0.9 * phi(p, g)
        x0 = gen.exponential(size=8)
        x0 /= lyapunov_max(x0, p)
        T = 1.05 * p.max() / np.min(phi(p, g) - lam)
        traj = integrate(x0, SingleHopDrift(g, lam), T, min(0.01, 0.005 / np.max(lam / p)))
        rep = lyapunov_max_drift_check(traj, p, lam, g)
        assert rep.status == "ok", rep
        assert rep.final_value < 0.01


def test_lyapunov_max_check_flags_growth():
    traj = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 0.4)), 5.0)
    rep = lyapunov_max_drift_check(traj, np.ones(9), 0.3, C9)
    assert rep.status == "violated"
    assert rep.first_violation_time == 0.0


def test_utility_lyapunov_closed_form():
    x = np.array([1.0, 2.0])
    nu = np.array([0.5, 0.25])
    assert utility_lyapunov(x, nu) == pytest.approx(1 / 3 * 4 + 8 / 3 * 16)


def test_utility_check_cases():
    nu = np.full(9, 1 / 3)
    stable = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 0.3)), 35.0, 0.01)
    assert lyapunov_utility_drift_check(stable, nu, 0.3).status == "ok"
    zero = integrate(np.zeros(9), SingleHopDrift(C9, np.full(9, 0.3)), 5.0, boundary_mode="absorbing")
    rep = lyapunov_utility_drift_check(zero, nu, 0.3)
    assert rep.status == "ok" and rep.final_value == 0.0
    growing = integrate(np.ones(9), SingleHopDrift(C9, np.full(9, 0.4)), 5.0)
    neg = lyapunov_utility_drift_check(growing, nu)
    assert neg.status == "violated"
    assert lyapunov_utility_drift_check(growing, nu, 0.4).status == "hypothesis_not_satisfied"
    assert lyapunov_utility_drift_check(stable, nu, 0.3, "identity", "log").status == "ok"
    with pytest.raises(ConfigError):
        lyapunov_utility_drift_check(stable, nu, 0.3, "cube", "log")


def test_quadratic_multi_hop_drift():
    assert quadratic_drift_multi_hop(np.zeros(9), 0.3, 4, C9) == 0.0
    x = np.full(9, 2.0)
    assert quadratic_drift_multi_hop(x, 0.3, 4, C9) == pytest.approx(x.sum() * (0.3 - 1 / 3) / 4)
    gen = np.random.default_rng(0)
    eps = 1 / 3 - 0.3
    for _ in range(2000):
        x = gen.exponential(size=9)
        assert quadratic_drift_multi_hop(x, 0.3, 4, C9) < -(eps / 4) * x.sum() + 1e-9


def test_multi_hop_drift_object():
    d = MultiHopDrift(C9, 0.3, 4)
    assert np.allclose(d(np.ones(9)), (0.3 - 1 / 3) / 4)
    assert d.rate_bound() >= 1.0
