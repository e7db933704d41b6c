"""Rate function, fluid drifts, Euler integration and Lyapunov checks.

The fluid state ``x`` is a non-negative real vector indexed by graph nodes.
At an all-zero closed neighbourhood the fluid dynamics are not unique; the
``boundary_mode`` flag picks the branch: ``"emitting"`` lets such a node grow
at its arrival rate, ``"absorbing"`` keeps it at zero.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError
from .graph import InterferenceGraph, neighborhood_size

BOUNDARY_MODES = ("emitting", "absorbing")


def _neighborhood_sums(p: np.ndarray, g: InterferenceGraph) -> np.ndarray:
    padded = np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], axis=-1)
    return p + padded[..., g.padded_neighbors].sum(axis=-1)


def phi(p, g: InterferenceGraph) -> np.ndarray:
    """Per-node transmission rates ``p_i / sum_{j in N_i} p_j`` with ``0/0 = 0``.

    Leading axes of ``p`` are treated as a batch.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] != g.node_count:
        raise DomainError(f"weight vector must have length {g.node_count}, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("weights must be finite and non-negative")
    s = _neighborhood_sums(p, g)
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, p / safe, 0.0)


def _check_state(x, g: InterferenceGraph) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.node_count,):
        raise DomainError(f"state must have length {g.node_count}, got shape {x.shape}")
    if np.any(x < 0):
        raise DomainError("fluid state must be non-negative")
    return x


def _rates(lam, n: int) -> np.ndarray:
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (n,)).copy()
    if np.any(lam < 0):
        raise DomainError("arrival rates must be non-negative")
    return lam


def _apply_boundary(r: np.ndarray, x: np.ndarray, g, boundary_mode: str) -> np.ndarray:
    if boundary_mode not in BOUNDARY_MODES:
        raise ConfigError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {boundary_mode!r}")
    if boundary_mode == "absorbing":
        dead = _neighborhood_sums(x, g) == 0
        r = np.where(dead, 0.0, r)
    return r


def single_hop_drift(x, lam, g: InterferenceGraph, boundary_mode: str = "emitting") -> np.ndarray:
    """Fluid velocity ``lam_i - phi_i(x)`` of the single-hop network.

    At ``x_i = 0`` the rate ``phi_i`` vanishes, so the same expression gives
    the one-sided derivative ``lam_i``; only fully empty neighbourhoods
    depend on ``boundary_mode``.
    """
    x = _check_state(x, g)
    r = _rates(lam, g.node_count) - phi(x, g)
    return _apply_boundary(r, x, g, boundary_mode)


def multi_hop_drift(
    x, lam_total: float, k: int, g: InterferenceGraph, boundary_mode: str = "emitting"
) -> np.ndarray:
    """Fluid velocity of the symmetric multi-hop network (random-walk routing).

    Exogenous rate per node is ``lam_total / k``; a served message stays in
    the network with probability ``1 - 1/k`` and then moves to a uniformly
    chosen neighbour.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    m = neighborhood_size(g)
    x = _check_state(x, g)
    rates = phi(x, g)
    inflow = _neighborhood_sums(rates, g) - rates
    coeff = (1.0 - 1.0 / k) / (m - 1) if m > 1 else 0.0
    r = lam_total / k - rates + coeff * inflow
    return _apply_boundary(r, x, g, boundary_mode)


@dataclass(frozen=True)
class SingleHopDrift:
    graph: InterferenceGraph
    lam: np.ndarray

    def __call__(self, x, boundary_mode="emitting"):
        return single_hop_drift(x, self.lam, self.graph, boundary_mode)

    def rate_bound(self) -> float:
        return max(float(np.max(self.lam)), 1.0)


@dataclass(frozen=True)
class MultiHopDrift:
    graph: InterferenceGraph
    lam_total: float
    k: int

    def __call__(self, x, boundary_mode="emitting"):
        return multi_hop_drift(x, self.lam_total, self.k, self.graph, boundary_mode)

    def rate_bound(self) -> float:
        return max(self.lam_total / self.k, 1.0) + 1.0


@dataclass
class FluidTrajectory:
    times: np.ndarray
    states: np.ndarray
    boundary_mode: str

    def at(self, t) -> np.ndarray:
        """State at the grid point nearest to ``t`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        dt = self.times[1] - self.times[0] if len(self.times) > 1 else 1.0
        idx = np.clip(np.rint((t - self.times[0]) / dt).astype(np.int64), 0, len(self.times) - 1)
        return self.states[idx]

    def max_step_rate(self) -> float:
        """Largest ``|dx_i| / dt`` over the grid."""
        if len(self.times) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.states, axis=0)) / np.diff(self.times)[:, None]))

    def is_lipschitz(self, constant: float) -> bool:
        return self.max_step_rate() <= constant * (1 + 1e-12)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{i}" for i in range(self.states.shape[1])])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def integrate(
    x0,
    drift: Callable[..., np.ndarray],
    T: float,
    dt: float | None = None,
    boundary_mode: str = "emitting",
) -> FluidTrajectory:
    """Forward Euler with componentwise clamping at zero.

    ``drift(x, boundary_mode)`` returns the velocity; ``dt`` defaults to
    ``T / 1000``.
    """
    if T < 0:
        raise DomainError("T must be non-negative")
    if dt is None:
        dt = T * 1e-3 if T > 0 else 1.0
    if dt <= 0:
        raise DomainError("dt must be positive")
    if boundary_mode not in BOUNDARY_MODES:
        raise ConfigError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {boundary_mode!r}")
    x = np.asarray(x0, dtype=float).copy()
    if np.any(x < 0):
        raise DomainError("initial fluid state must be non-negative")
    steps = int(math.ceil(T / dt - 1e-9))
    states = np.empty((steps + 1, x.size))
    states[0] = x
    for n in range(steps):
        x = np.maximum(0.0, x + dt * drift(x, boundary_mode))
        states[n + 1] = x
    return FluidTrajectory(np.arange(steps + 1) * dt, states, boundary_mode)


def lyapunov_max(x, p) -> float:
    """Weighted sup-norm ``max_i x_i / p_i``."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise DomainError("weights must be strictly positive")
    return float(np.max(x / p))


@dataclass
class DriftReport:
    """Outcome of a discrete Lyapunov-decrease check along a trajectory.

    ``status`` is ``"ok"``, ``"violated"`` or ``"hypothesis_not_satisfied"``;
    the monotonicity scan runs in every case so negative controls still
    report where the function increased.
    """

    status: str
    hypothesis_satisfied: bool
    monotone: bool
    first_violation_time: float | None
    worst_excess: float
    required_rate: float
    tolerance: float
    checked_steps: int
    initial_value: float
    final_value: float
    values: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("values")
        return d


def _scan_decrease(times, values, required_rate, floor, tol):
    dt = np.diff(times)
    active = values[:-1] > floor
    excess = np.diff(values) + dt * required_rate - tol
    bad = np.flatnonzero(active & (excess > 0))
    worst = float(np.max(excess[active])) if np.any(active) else 0.0
    first = float(times[bad[0]]) if bad.size else None
    return bad.size == 0, first, worst, int(active.sum())


def lyapunov_max_drift_check(
    traj: FluidTrajectory,
    p,
    lam,
    g: InterferenceGraph,
    eps_margin: float | None = None,
    floor: float = 1e-2,
) -> DriftReport:
    """Check that ``F(x) = max_i x_i/p_i`` falls at rate at least ``eps/max(p)``.

    Applies while ``F`` exceeds ``floor``. Each grid step must satisfy
    ``dF <= -dt * eps/max(p) + 10 dt^2``. ``eps_margin`` defaults to
    ``min_i(phi_i(p) - lam_i)``.
    """
    p = np.asarray(p, dtype=float)
    lam = _rates(lam, g.node_count)
    margins = phi(p, g) - lam
    hyp = bool(np.all(margins > 0))
    eps = float(margins.min()) if eps_margin is None else float(eps_margin)
    values = np.max(traj.states / p, axis=1)
    dt = float(traj.times[1] - traj.times[0]) if len(traj.times) > 1 else 0.0
    tol = 10 * dt * dt
    rate = max(eps, 0.0) / float(p.max())
    ok, first, worst, n = _scan_decrease(traj.times, values, rate, floor, tol)
    status = "hypothesis_not_satisfied" if not hyp else ("ok" if ok else "violated")
    return DriftReport(status, hyp, ok, first, worst, rate, tol, n, float(values[0]), float(values[-1]), values)


def utility_lyapunov(x, nu, G: Callable = None, h_prime: Callable = None) -> np.ndarray:
    """``sum_i G(x_i) h'(nu_i)`` row-wise; defaults to ``G(y) = y^3/3``, ``h'(y) = 1/y^2``."""
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    G = G or (lambda y: y**3 / 3.0)
    h_prime = h_prime or (lambda y: 1.0 / y**2)
    return np.sum(G(x) * h_prime(nu), axis=-1)


# g(y) = y^2 with antiderivative y^3/3; h(y) = -1/y with derivative 1/y^2
UTILITY_PAIRS = {
    ("square", "inverse"): (lambda y: y**3 / 3.0, lambda y: 1.0 / y**2),
    ("identity", "log"): (lambda y: y**2 / 2.0, lambda y: 1.0 / y),
}


def lyapunov_utility_drift_check(
    traj: FluidTrajectory,
    nu,
    lam=None,
    g_spec="square",
    h_spec="inverse",
    floor: float = 1e-6,
) -> DriftReport:
    """Check strict decrease of the utility Lyapunov function along ``traj``.

    ``g_spec``/``h_spec`` name a registered pair in ``UTILITY_PAIRS`` or are
    callables giving ``G`` (antiderivative of ``g``) and ``h'`` directly.
    The hypothesis is ``lam < nu`` componentwise; without ``lam`` it is
    taken as given.
    """
    nu = np.asarray(nu, dtype=float)
    if callable(g_spec) and callable(h_spec):
        G, h_prime = g_spec, h_spec
    else:
        try:
            G, h_prime = UTILITY_PAIRS[(g_spec, h_spec)]
        except KeyError:
            raise ConfigError(f"unknown utility pair ({g_spec!r}, {h_spec!r})") from None
    hyp = True if lam is None else bool(np.all(np.asarray(lam, dtype=float) < nu))
    values = utility_lyapunov(traj.states, nu, G, h_prime)
    dt = float(traj.times[1] - traj.times[0]) if len(traj.times) > 1 else 0.0
    tol = 10 * dt * dt
    ok, first, worst, n = _scan_decrease(traj.times, values, 0.0, floor, tol)
    status = "hypothesis_not_satisfied" if not hyp else ("ok" if ok else "violated")
    return DriftReport(status, hyp, ok, first, worst, 0.0, tol, n, float(values[0]), float(values[-1]), values)


def quadratic_drift_multi_hop(x, lam_total: float, k: int, g: InterferenceGraph) -> float:
    """Time derivative of ``0.5 * sum x_i^2`` under the multi-hop fluid dynamics."""
    x = _check_state(x, g)
    return float(np.dot(x, multi_hop_drift(x, lam_total, k, g)))
