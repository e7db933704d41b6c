"""Exact slotted simulation of the priority-based CSMA protocol.

Each slot, every message draws an i.i.d. priority and a node transmits iff it
holds the best priority in its closed neighbourhood. Only the per-node best
priority matters, so node ``i`` draws a single statistic: with ``E`` a
standard exponential, ``E / X_i`` is distributed as the minimum of ``X_i``
i.i.d. Exp(1) priorities. Equivalently ``M_i = 1 - exp(-E / X_i)`` is the
minimum of ``X_i`` uniforms; comparisons are done on ``E / X_i`` because the
map is monotone and keeps precision for large queues.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .config import HopMode, ProtocolMode, ScenarioConfig
from .errors import ConfigError
from .fluid import phi
from .graph import InterferenceGraph, neighborhood_size
from ._kernel import run_block

__all__ = [
    "QueueState", "SlotOutcome", "Trace", "ProtocolMode", "HopMode",
    "draw_transmissions", "sample_transmissions", "transmit_mask", "step_single_hop", "step_multi_hop", "run",
]


@dataclass(frozen=True)
class QueueState:
    counts: np.ndarray
    slot: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or np.any(counts < 0):
            raise ConfigError("queue counts must be a non-negative vector")
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class SlotOutcome:
    transmitted: frozenset
    departures: frozenset
    moves: tuple = ()
    arrivals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _exp_from_uniform(u: np.ndarray) -> np.ndarray:
    return -np.log1p(-u)


def transmit_mask(counts, u, g: InterferenceGraph, mode: ProtocolMode):
    """Vectorised transmission rule.

    ``u`` holds uniforms with trailing axis of length N (any leading batch
    shape). Returns ``(mask, ties)`` where ``ties`` flags batch rows whose
    competition statistics collided and must be redrawn.
    """
    x = np.asarray(counts)
    u = np.asarray(u, dtype=float)
    if mode.kind == "independent_bernoulli":
        mask = (u < phi(x.astype(float), g)) & (x > 0)
        return mask, np.zeros(mask.shape[:-1], dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        keys = np.where(x > 0, _exp_from_uniform(u) / np.where(x > 0, x, 1), np.inf)
    pad = np.full(keys.shape[:-1] + (1,), np.inf)
    rival = np.concatenate([keys, pad], axis=-1)[..., g.padded_neighbors].min(axis=-1)
    mask = keys < rival
    ties = np.any((keys == rival) & np.isfinite(keys), axis=-1)
    return mask, ties


def draw_transmissions(state: QueueState, g: InterferenceGraph, mode: ProtocolMode, rng) -> frozenset:
    """Set of nodes transmitting in one slot from ``state``."""
    rng = streams.as_generator(rng)
    while True:
        mask, tie = transmit_mask(state.counts, rng.random(g.node_count), g, mode)
        if not tie:
            return frozenset(np.flatnonzero(mask).tolist())


def sample_transmissions(counts, g: InterferenceGraph, mode: ProtocolMode, draws: int, rng) -> np.ndarray:
    """``draws`` independent transmission masks from a frozen state, shape ``(draws, N)``."""
    rng = streams.as_generator(rng)
    mask, ties = transmit_mask(counts, rng.random((draws, g.node_count)), g, mode)
    idx = np.flatnonzero(ties)
    while idx.size:
        redo, again = transmit_mask(counts, rng.random((idx.size, g.node_count)), g, mode)
        mask[idx] = redo
        idx = idx[again]
    return mask


def _draw_arrivals(rng, lam: np.ndarray, model: str, slots: np.ndarray) -> np.ndarray:
    """Arrivals for the given slot indices, shape ``(len(slots), N)``."""
    shape = (len(slots), lam.size)
    if model == "poisson":
        return rng.poisson(lam, size=shape)
    if model == "bernoulli":
        if np.any(lam > 1):
            raise ConfigError("bernoulli arrivals require rates <= 1")
        return (rng.random(shape) < lam).astype(np.int64)
    if model == "deterministic_batch":
        s = slots[:, None].astype(float)
        return (np.floor(lam * (s + 1)) - np.floor(lam * s)).astype(np.int64)
    raise ConfigError(f"unknown arrival model {model!r}")


def _route(trans: np.ndarray, route_u: np.ndarray, k: int, g: InterferenceGraph):
    """Split transmitting nodes into departures and ``(src, dst)`` moves."""
    leave = route_u[trans, 0] < 1.0 / k
    movers = trans[~leave]
    deg = len(g.adjacency[0])
    pick = np.minimum((route_u[movers, 1] * deg).astype(np.int64), deg - 1)
    return trans[leave], movers, g.padded_neighbors[movers, pick]


def _check_rates(lam, g):
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (g.node_count,))
    if np.any(lam <= 0):
        raise ConfigError("arrival rates must be positive")
    return lam


def step_single_hop(state: QueueState, g, lam, arrival_model: str = "poisson",
                    mode: ProtocolMode = ProtocolMode(), rng=None):
    """Advance one slot: transmissions on the pre-arrival state, then arrivals."""
    rng = streams.as_generator(rng)
    lam = _check_rates(lam, g)
    trans = np.array(sorted(draw_transmissions(state, g, mode, rng)), dtype=np.int64)
    arrivals = _draw_arrivals(rng, lam, arrival_model, np.array([state.slot]))[0]
    counts = state.counts.copy()
    counts[trans] -= 1
    counts += arrivals
    done = frozenset(trans.tolist())
    return QueueState(counts, state.slot + 1), SlotOutcome(done, done, (), arrivals)


def step_multi_hop(state: QueueState, g, lam_total: float, k: int, arrival_model: str = "poisson",
                   mode: ProtocolMode = ProtocolMode(), rng=None):
    """Advance one slot with geometric service and random-walk routing.

    A transmitted message leaves with probability ``1/k``, otherwise it
    joins a uniformly chosen neighbour after all transmissions resolve.
    Exogenous arrivals (mean ``lam_total / k``) are added last.
    """
    rng = streams.as_generator(rng)
    neighborhood_size(g)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    lam = _check_rates(lam_total, g) / k
    trans = np.array(sorted(draw_transmissions(state, g, mode, rng)), dtype=np.int64)
    route_u = rng.random((g.node_count, 2))
    gone, src, dst = _route(trans, route_u, k, g)
    arrivals = _draw_arrivals(rng, lam, arrival_model, np.array([state.slot]))[0]
    counts = state.counts.copy()
    counts[trans] -= 1
    counts += np.bincount(dst, minlength=g.node_count)
    counts += arrivals
    outcome = SlotOutcome(
        frozenset(trans.tolist()), frozenset(gone.tolist()),
        tuple(zip(src.tolist(), dst.tolist())), arrivals,
    )
    return QueueState(counts, state.slot + 1), outcome


@dataclass
class Trace:
    """Recorded run: decimated per-node queues plus per-slot totals."""

    config_digest: str
    sample_slots: np.ndarray
    queues: np.ndarray
    totals: np.ndarray
    transmissions: np.ndarray
    departures: np.ndarray
    final_counts: np.ndarray
    service_factor: float = 1.0
    wall_time: float = 0.0

    @property
    def horizon(self) -> int:
        return len(self.totals) - 1

    def throughput(self) -> np.ndarray:
        """Realised per-node transmissions per slot, scaled by the service factor."""
        if self.horizon == 0:
            return np.zeros_like(self.transmissions, dtype=float)
        return self.transmissions / self.horizon * self.service_factor

    def summary(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "horizon": self.horizon,
            "cumulative_departures": self.departures.tolist(),
            "cumulative_transmissions": self.transmissions.tolist(),
            "mean_total_queue": float(self.totals.mean()),
            "max_total_queue": int(self.totals.max()),
            "final_queue": self.final_counts.tolist(),
            "throughput": [float(v) for v in self.throughput()],
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "total_queue"] + [f"x{i}" for i in range(self.queues.shape[1])])
            for s, row in zip(self.sample_slots.tolist(), self.queues.tolist()):
                w.writerow([s, int(self.totals[s]), *row])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def run(config: ScenarioConfig) -> Trace:
    """Simulate ``config.horizon`` slots; deterministic given ``config.seed``."""
    started = time.perf_counter()
    g = config.graph
    n = g.node_count
    mode = config.protocol
    multi = config.hop.multi
    k = config.hop.k if multi else 1
    if multi:
        neighborhood_size(g)
    lam = config.arrival_rates()
    counts = config.initial_counts().copy()
    horizon = config.horizon
    dec = config.decimation

    sample_slots = np.arange(0, horizon + 1, dec, dtype=np.int64)
    queues = np.empty((len(sample_slots), n), dtype=np.int64)
    totals = np.empty(horizon + 1, dtype=np.int64)
    transmissions = np.zeros(n, dtype=np.int64)
    departures = np.zeros(n, dtype=np.int64)
    totals[0] = counts.sum()
    queues[0] = counts

    service = streams.stream(config.seed, streams.SERVICE)
    routing = streams.stream(config.seed, streams.ROUTING)
    arrive = streams.stream(config.seed, streams.ARRIVALS)
    ties = streams.stream(config.seed, streams.TIES)

    nbr = g.padded_neighbors
    deg = g.degrees
    bernoulli = mode.kind == "independent_bernoulli"
    keys = np.empty(n)
    mask = np.zeros(n, dtype=np.bool_)
    inflow = np.zeros(n, dtype=np.int64)
    no_route = np.zeros((1, 1, 2))
    row = 1
    block = streams.BLOCK_SLOTS
    for start in range(0, horizon, block):
        size = min(block, horizon - start)
        # whole blocks are always drawn so stream positions do not depend on horizon
        u_block = service.random((block, n))
        e_block = _exp_from_uniform(u_block)
        r_block = routing.random((block, n, 2)) if multi else no_route
        a_block = _draw_arrivals(arrive, lam, config.arrival_model, np.arange(start, start + block))
        t0, forced, use_forced = 0, mask.copy(), False
        while True:
            t0, row = run_block(
                counts, start, t0, size, e_block, u_block, r_block, a_block, nbr, deg, k,
                multi, bernoulli, forced, use_forced, dec, totals, queues, row,
                transmissions, departures, keys, mask, inflow,
            )
            if t0 < 0:
                break
            forced, use_forced = _redraw(counts, ties, g, mode), True

    return Trace(
        config_digest=config.digest(),
        sample_slots=sample_slots,
        queues=queues,
        totals=totals,
        transmissions=transmissions,
        departures=departures,
        final_counts=counts,
        service_factor=mode.service_factor,
        wall_time=time.perf_counter() - started,
    )


def _redraw(counts, ties_rng, g, mode):
    while True:
        mask, tie = transmit_mask(counts, ties_rng.random(g.node_count), g, mode)
        if not tie:
            return mask
