"""Estimators and experiment drivers built on the simulator and fluid model."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng as streams
from .config import ProtocolMode, ScenarioConfig
from .errors import ConfigError, DomainError, InsufficientDataError
from .fluid import MultiHopDrift, SingleHopDrift, integrate, phi
from .graph import InterferenceGraph
from .simulator import QueueState, Trace, run, sample_transmissions


def _slope(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares slope of ``y`` (rows indexed like ``t``) against ``t``."""
    tc = t - t.mean()
    return tc @ (y - y.mean(axis=0)) / (tc @ tc)


@dataclass
class GrowthRates:
    per_node: np.ndarray
    total: float


def growth_rate(trace: Trace, tail_fraction: float = 0.5) -> GrowthRates:
    """Least-squares growth slopes (messages/slot) over the trailing ``tail_fraction``.

    Per-node slopes use the decimated samples; the total slope uses every slot.
    """
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail_fraction must lie in (0, 1]")
    start = (1 - tail_fraction) * trace.horizon
    sel = trace.sample_slots >= start
    if sel.sum() < 10:
        raise InsufficientDataError(f"only {int(sel.sum())} samples in tail, need 10")
    per_node = _slope(trace.sample_slots[sel].astype(float), trace.queues[sel].astype(float))
    slots = np.arange(math.ceil(start), trace.horizon + 1)
    total = float(_slope(slots.astype(float), trace.totals[slots].astype(float)))
    return GrowthRates(per_node, total)


@dataclass
class StabilityClass:
    verdict: str
    slope: float
    slope_lower_bound: float
    tail_mean: float
    middle_mean: float
    thresholds: tuple = (0.005, 0.02)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def classify_stability(trace: Trace, s0: float = 0.005, s1: float = 0.02,
                       tail_fraction: float = 0.5, batches: int = 10) -> StabilityClass:
    """Operational stable/unstable/inconclusive call from a finite run.

    Stable: total-queue tail slope below ``s0`` and final-third mean below
    three times the middle-third mean. Unstable: slope above ``s1`` with a
    positive lower confidence bound (t-interval over ``batches`` contiguous
    sub-window slopes). Anything else is inconclusive.
    """
    h = trace.horizon
    notes = []
    if h < 10_000:
        notes.append("horizon below 10^4 slots")
    totals = trace.totals.astype(float)
    third = h // 3
    middle_mean = float(totals[third: 2 * third].mean()) if third else float(totals.mean())
    tail_mean = float(totals[2 * third:].mean())
    start = math.ceil((1 - tail_fraction) * h)
    slots = np.arange(start, h + 1, dtype=float)
    slope = float(_slope(slots, totals[start:]))
    pieces = [p for p in np.array_split(np.arange(start, h + 1), batches) if p.size > 1]
    sub = np.array([_slope(p.astype(float), totals[p]) for p in pieces])
    half = stats.t.ppf(0.975, len(sub) - 1) * sub.std(ddof=1) / math.sqrt(len(sub)) if len(sub) > 1 else np.inf
    lower = float(sub.mean() - half)

    if h < 10_000:
        verdict = "inconclusive"
    elif slope < s0 and tail_mean < 3 * middle_mean:
        verdict = "stable"
    elif slope > s1 and lower > 0:
        verdict = "unstable"
    else:
        verdict = "inconclusive"
    return StabilityClass(verdict, slope, lower, tail_mean, middle_mean, (s0, s1), notes)


def fluid_drift_for(config: ScenarioConfig):
    if config.hop.multi:
        return MultiHopDrift(config.graph, float(config.lam), config.hop.k)
    return SingleHopDrift(config.graph, config.rates())


@dataclass
class ScalingRow:
    r: int
    slots: int
    deviation: float
    worst_time: float


def fluid_scaling_study(config: ScenarioConfig, r_values, T: float, dt: float | None = None,
                        points: int = 2000) -> list[ScalingRow]:
    """Sup-distance between ``X(r t) / r`` and the fluid path on ``[0, T]``.

    The fluid path starts at ``config.fluid_initial()``; run ``r`` starts at
    ``floor(r * x0)`` and lasts ``ceil(r T)`` slots. Each run uses a child
    seed of ``config.seed`` keyed by ``r``.
    """
    x0 = config.fluid_initial()
    traj = integrate(x0, fluid_drift_for(config), T, dt, config.boundary_mode)
    rows = []
    for r in r_values:
        r = int(r)
        horizon = math.ceil(r * T)
        dec = max(1, horizon // points)
        cfg = config.with_(
            initial_state=tuple(int(v) for v in np.floor(r * x0)),
            horizon=horizon,
            decimation=dec,
            seed=streams.derive_seed(config.seed, r),
        )
        trace = run(cfg)
        t = trace.sample_slots / r
        gap = np.abs(trace.queues / r - traj.at(t)).max(axis=1)
        j = int(np.argmax(gap))
        rows.append(ScalingRow(r, horizon, float(gap[j]), float(t[j])))
    return rows


SWEEP_FIELDS = [
    "lambda", "replication", "seed", "total_slope", "mean_node_slope",
    "classification", "mean_queue", "max_queue", "error",
]


def _sweep_row(args):
    base, lam, rep = args
    seed = streams.derive_seed(base.seed, streams.float_key(lam), rep)
    row = dict.fromkeys(SWEEP_FIELDS, "")
    row.update({"lambda": lam, "replication": rep, "seed": seed})
    try:
        trace = run(base.with_(lam=lam, seed=seed))
        rates = growth_rate(trace)
        cls = classify_stability(trace)
        row.update(
            total_slope=rates.total,
            mean_node_slope=float(rates.per_node.mean()),
            classification=cls.verdict,
            mean_queue=float(trace.totals.mean()),
            max_queue=int(trace.totals.max()),
        )
    except (ConfigError, DomainError, InsufficientDataError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(base: ScenarioConfig, lam_grid, replications: int = 1, workers: int = 1) -> list[dict]:
    """One row per (lambda, replication), in grid order.

    Row seeds depend only on the base seed, the lambda value and the
    replication index, so rows are independent of the rest of the grid.
    """
    grid = [float(v) for v in lam_grid]
    if not grid:
        raise ConfigError("lambda grid is empty")
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    jobs = [(base, lam, rep) for lam in grid for rep in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(j) for j in jobs]


def write_rows(rows: list[dict], path, fields=SWEEP_FIELDS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def parse_grid(spec: str) -> list[float]:
    """``"a:b:step"`` (inclusive) or a comma-separated list."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("lambda grid is empty")
    try:
        if ":" in spec:
            lo, hi, step = (float(v) for v in spec.split(":"))
            if step <= 0:
                raise ConfigError("grid step must be positive")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 12) for i in range(count)]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda grid {spec!r}: {exc}") from exc


@dataclass
class RateCheck:
    frequency: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    draws: int

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def one_slot_rate_check(state: QueueState, g: InterferenceGraph, draws: int = 100_000, rng=None,
                        mode: ProtocolMode = ProtocolMode()) -> RateCheck:
    """Empirical per-node transmission frequency from a frozen state versus ``phi``."""
    if draws < 10_000:
        raise DomainError("need at least 10^4 draws")
    counts = state.counts
    mask = sample_transmissions(counts, g, mode, draws, rng)
    freq = mask.mean(axis=0)
    rates = phi(counts.astype(float), g)
    sd = np.sqrt(rates * (1 - rates) / draws)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, (freq - rates) / sd, np.where(freq == rates, 0.0, np.inf))
    return RateCheck(freq, rates, z, draws)
