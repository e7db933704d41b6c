"""Stability-set membership, 2-fairness of the rates, and the cyclic-sum scan."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import rng as streams
from .errors import ConfigError, DomainError
from .fluid import phi
from .graph import InterferenceGraph, build_circle, is_circle, regularity_degree

TOL = 1e-9

STRICT = "strictly_dominated"
BOUNDARY = "boundary_member"
INFEASIBLE = "infeasible_within_budget"


@dataclass
class StabilityVerdict:
    """Result of a stability-set membership query.

    ``margin`` is ``min_i(phi_i(p) - lam_i)`` at ``witness``. ``certified``
    is true when the status is proven: a verified witness for the two
    member statuses, or an exact criterion for non-membership.
    """

    status: str
    witness: np.ndarray | None
    margin: float
    search_budget_used: int
    certified: bool = False
    method: str = "search"
    spectral_radius: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = None if self.witness is None else self.witness.tolist()
        return d


def symmetric_threshold(g: InterferenceGraph) -> float | None:
    """``1/m`` for an ``(m-1)``-regular graph, else ``None``."""
    d = regularity_degree(g)
    return None if d is None else 1.0 / (d + 1)


def spectral_radius(lam, g: InterferenceGraph) -> tuple[float, np.ndarray | None]:
    """Perron root of ``diag(lam/(1-lam)) A`` and its positive eigenvector.

    ``lam <= phi(p)`` is equivalent to ``p_i (1 - lam_i) >= lam_i (A p)_i``,
    so ``lam`` is dominated by some ``phi(p)`` exactly when this root is at
    most 1, and the eigenvector is then a witness. Returns ``(inf, None)``
    when some rate is at least 1 on a graph with edges.
    """
    lam = np.asarray(lam, dtype=float)
    if g.node_count == 1:
        return (0.0, np.ones(1)) if lam[0] <= 1 else (np.inf, None)
    if np.any(lam >= 1):
        return np.inf, None
    d = lam / (1 - lam)
    s = np.sqrt(d)
    sym = s[:, None] * g.adjacency_matrix * s[None, :]
    vals, vecs = np.linalg.eigh(sym)
    w = np.abs(vecs[:, -1])
    v = s * w
    return float(vals[-1]), v / v.sum()


def _closed_index(g: InterferenceGraph) -> np.ndarray:
    """Rows ``[i, neighbours of i..., pad]``; pad index is ``node_count``."""
    return np.concatenate([np.arange(g.node_count)[:, None], g.padded_neighbors], axis=1)


def _log_surrogate(y, lam_log, nb):
    """``min_i(log phi_i(e^y) - log lam_i)``, a supergradient, and ``phi(e^y)``."""
    n = y.size
    vals = np.append(y, -np.inf)[nb]
    top = vals.max(axis=1, keepdims=True)
    w = np.exp(vals - top)
    wsum = w.sum(axis=1)
    log_rates = y - top[:, 0] - np.log(wsum)
    terms = log_rates - lam_log
    i = int(np.argmin(terms))
    grad = np.zeros(n + 1)
    # pad entries carry zero weight, so repeated pad indices are harmless
    grad[nb[i]] -= w[i] / wsum[i]
    grad[i] += 1.0
    return float(terms[i]), grad[:n], np.exp(log_rates)


def _ascent(y0, lam, g, iters, step0=0.5, patience=2000):
    """Normalised subgradient ascent in log-weights.

    Returns the point with the best additive margin, that margin, and the
    number of iterations spent; stops after ``patience`` steps without
    improvement.
    """
    lam_log = np.log(lam)
    nb = _closed_index(g)
    y = y0 - y0.mean()
    best_p, best_margin, since = None, -np.inf, 0
    t = 0
    while t < iters:
        _, grad, rates = _log_surrogate(y, lam_log, nb)
        t += 1
        margin = float(np.min(rates - lam))
        if margin > best_margin + 1e-15:
            best_p, best_margin, since = np.exp(y - y.max()), margin, 0
        else:
            since += 1
            if since >= patience:
                break
        norm = np.linalg.norm(grad)
        if norm == 0:
            break
        y = y + step0 / np.sqrt(t) * grad / norm
        y -= y.mean()
    if best_p is not None:
        best_p = best_p / best_p.sum()
    return best_p, best_margin, t


def c_membership(lam, g: InterferenceGraph, budget: int = 100_000, rng=None,
                 use_spectral: bool = True, n_random_starts: int = 4,
                 exact_regular: bool = True) -> StabilityVerdict:
    """Search for weights ``p`` with ``lam <= phi(p)``, maximising the worst slack.

    Multi-start subgradient ascent on the concave log-surrogate from the
    all-ones vector, ``p = lam`` and log-normal random starts; ``budget``
    caps the total number of rate evaluations. With ``use_spectral`` the
    Perron eigenvector is tried first and the spectral criterion certifies
    non-membership. With ``exact_regular``, regular graphs with uniform
    rates are answered directly by the ``1/m`` threshold.
    Every returned witness is re-checked by direct evaluation.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (g.node_count,):
        raise DomainError(f"rate vector must have length {g.node_count}")
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise DomainError("arrival rates must be positive and finite")
    gen = streams.as_generator(rng)

    thr = symmetric_threshold(g)
    if exact_regular and thr is not None and np.all(lam == lam[0]):
        p = np.full(g.node_count, 1.0 / g.node_count)
        margin = float(np.min(phi(p, g) - lam))
        if margin > TOL:
            return StabilityVerdict(STRICT, p, margin, 1, True, "regular")
        if margin >= -TOL:
            return StabilityVerdict(BOUNDARY, p, margin, 1, True, "regular")
        return StabilityVerdict(INFEASIBLE, None, margin, 1, True, "regular")

    candidates = []
    rho = None
    used = 0
    if use_spectral:
        rho, v = spectral_radius(lam, g)
        used += 1
        if v is not None:
            candidates.append(("spectral", v, float(np.min(phi(v, g) - lam))))
    starts = [np.zeros(g.node_count), np.log(lam)]
    starts += [gen.normal(size=g.node_count) for _ in range(n_random_starts)]
    per_start = max(1, (budget - used) // len(starts))
    for y0 in starts:
        if used >= budget:
            break
        p, m, spent = _ascent(y0, lam, g, min(per_start, budget - used))
        used += spent
        if p is not None:
            candidates.append(("search", p, m))

    method, witness, margin = max(candidates, key=lambda c: c[2]) if candidates else ("search", None, -np.inf)
    if witness is not None:
        margin = float(np.min(phi(witness, g) - lam))
    if margin > TOL:
        status, certified = STRICT, True
    elif margin >= -TOL:
        status, certified = BOUNDARY, True
    else:
        status = INFEASIBLE
        certified = rho is not None and rho > 1 + TOL
        witness = None
    return StabilityVerdict(status, witness, margin, used, certified, method, rho)


def fairness_objective(mu, x):
    """Alpha = 2 cost ``sum_i x_i^2 / mu_i`` (lower is better); batches over leading axes."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.sum(np.where(mu > 0, x * x / np.where(mu > 0, mu, 1.0), np.inf), axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass
class FairnessReport:
    min_gap: float
    witness_p: np.ndarray
    baseline: float
    samples: int
    equality_cases: int
    structured_gaps: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness_p"] = self.witness_p.tolist()
        return d


def two_fairness_check(x, g: InterferenceGraph, samples: int = 10_000, rng=None) -> FairnessReport:
    """Compare the cost at ``phi(x)`` against rate vectors ``phi(p)`` from the stability set.

    ``x`` is rescaled to unit sum first; gaps ``J(phi(p)) - J(phi(x))`` are
    reported on that scale. Besides random log-normal ``p``, the structured
    family includes ``p = x``, ``p = c x`` and single-coordinate 10% bumps.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (g.node_count,):
        raise DomainError(f"x must have length {g.node_count}")
    if np.any(x <= 0):
        raise DomainError("x must be strictly positive")
    gen = streams.as_generator(rng)
    x = x / x.sum()
    base = fairness_objective(phi(x, g), x)

    structured = {"p=x": x.copy()}
    for c in (0.5, 3.0, 1e3):
        structured[f"p={c}x"] = c * x
    for i in range(g.node_count):
        bumped = x.copy()
        bumped[i] *= 1.1
        structured[f"bump{i}"] = bumped
    structured_gaps = {name: fairness_objective(phi(p, g), x) - base for name, p in structured.items()}

    best_gap, best_p = np.inf, x
    equal = 0
    for name, gap in structured_gaps.items():
        if abs(gap) <= TOL:
            equal += 1
        if gap < best_gap:
            best_gap, best_p = gap, structured[name]
    sigma = gen.uniform(0.1, 2.0, size=samples)
    draws = np.exp(sigma[:, None] * gen.normal(size=(samples, g.node_count)))
    gaps = fairness_objective(phi(draws, g), x) - base
    equal += int(np.sum(np.abs(gaps) <= TOL))
    if gaps.size and gaps.min() < best_gap:
        j = int(np.argmin(gaps))
        best_gap, best_p = float(gaps[j]), draws[j]
    return FairnessReport(float(best_gap), best_p, base, samples + len(structured), equal, structured_gaps)


def cyclic_sum(x) -> np.ndarray:
    """``sum_i x_i (x_i - x_{i+1}) / (x_{i-1} + x_i + x_{i+1})`` over the cycle, row-wise.

    Terms with a zero denominator contribute 0.
    """
    x = np.asarray(x, dtype=float)
    nxt = np.roll(x, -1, axis=-1)
    prv = np.roll(x, 1, axis=-1)
    den = prv + x + nxt
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(den > 0, x * (x - nxt) / den, 0.0)
    return terms.sum(axis=-1)


DISTRIBUTIONS = ("uniform", "exponential", "spiky", "sparse")


def _sample_vectors(gen, dist, count, n):
    if dist == "uniform":
        return gen.random((count, n))
    if dist == "exponential":
        return gen.exponential(size=(count, n))
    if dist == "spiky":
        x = gen.random((count, n)) * gen.uniform(1e-4, 1.0, size=(count, 1))
        x[np.arange(count), gen.integers(0, n, size=count)] += gen.exponential(5.0, size=count)
        return x
    if dist == "sparse":
        x = gen.exponential(size=(count, n))
        x[gen.random((count, n)) < 0.5] = 0.0
        empty = x.sum(axis=1) == 0
        x[empty, 0] = 1.0
        return x
    raise ConfigError(f"unknown distribution {dist!r}")


def _scan_chunk(args):
    seed, n, idx, dist, count, keep = args
    gen = streams.stream(seed, streams.SAMPLES, n, idx)
    x = _sample_vectors(gen, dist, count, n)
    x /= x.sum(axis=1, keepdims=True)
    vals = cyclic_sum(x)
    worst = np.argsort(vals, kind="stable")[:keep]
    return n, vals, x[worst]


def _descend(x0):
    n = x0.size

    def f(z):
        w = np.exp(z - z.max())
        return float(cyclic_sum(w / w.sum()))

    res = minimize(f, np.log(x0 + 1e-12), method="L-BFGS-B")
    w = np.exp(res.x - res.x.max())
    w /= w.sum()
    return float(cyclic_sum(w)), w


@dataclass
class ConjectureReport:
    min_value: float
    argmin: np.ndarray
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    per_n_min: dict
    samples: int
    descent_starts: int
    counterexample: bool

    def to_dict(self) -> dict:
        return {
            "min_value": self.min_value,
            "argmin": self.argmin.tolist(),
            "histogram_counts": self.histogram_counts.tolist(),
            "histogram_edges": self.histogram_edges.tolist(),
            "per_n_min": {str(k): v for k, v in self.per_n_min.items()},
            "samples": self.samples,
            "descent_starts": self.descent_starts,
            "counterexample": self.counterexample,
        }


CHUNK = 100_000


def conjecture_scan(n_range, samples: int, rng=None, distribution: str = "mixed",
                    descent_starts: int = 100, workers: int = 1, bins: int = 50) -> ConjectureReport:
    """Random search for negative values of the normalised cyclic sum.

    Samples are spread evenly over ``n_range`` and (for ``"mixed"``) over
    all distributions, in chunks with their own substreams, so the result
    does not depend on ``workers``. Local descent then starts from the
    ``descent_starts`` lowest samples.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    ns = sorted(set(int(n) for n in n_range))
    if not ns or ns[0] < 3:
        raise DomainError("cycle lengths must be >= 3")
    dists = DISTRIBUTIONS if distribution == "mixed" else (distribution,)
    for d in dists:
        if d not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {d!r}")
    seed = int(rng) if isinstance(rng, (int, np.integer)) else int(streams.as_generator(rng).integers(2**63))

    cells = [(n, d) for n in ns for d in dists]
    jobs = []
    for c, (n, d) in enumerate(cells):
        count = samples // len(cells) + (1 if c < samples % len(cells) else 0)
        for idx, lo in enumerate(range(0, count, CHUNK)):
            jobs.append((seed, n, idx * len(dists) + dists.index(d), d, min(CHUNK, count - lo),
                         max(descent_starts, 1)))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_scan_chunk, jobs))
    else:
        results = [_scan_chunk(j) for j in jobs]

    all_vals = np.concatenate([r[1] for r in results])
    per_n = {}
    pool_vals, pool_vecs = [], []
    for n, vals, worst in results:
        per_n[n] = min(per_n.get(n, np.inf), float(vals.min()))
        pool_vals.extend(cyclic_sum(worst).tolist())
        pool_vecs.extend(worst)
    order = np.argsort(pool_vals, kind="stable")[:descent_starts]
    best_val = float(pool_vals[order[0]])
    best_x = pool_vecs[order[0]]
    for j in order:
        v, w = _descend(pool_vecs[j])
        if v < best_val:
            best_val, best_x = v, w
    counts, edges = np.histogram(all_vals, bins=bins)
    return ConjectureReport(best_val, np.asarray(best_x), counts, edges, per_n, int(all_vals.size),
                            len(order), best_val < -TOL)


def asymmetric_routing_drift(x, lam_total: float, k: int, g: InterferenceGraph | None = None) -> float:
    """Drift of ``0.5 * sum x_i^2`` on a circle where non-departing messages move to ``i+1``."""
    x = np.asarray(x, dtype=float)
    if g is None:
        g = build_circle(x.size)
    elif not is_circle(g):
        raise ConfigError("asymmetric routing drift is defined on a circle graph only")
    if x.shape != (g.node_count,) or np.any(x < 0):
        raise DomainError("x must be a non-negative vector over the circle")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    rates = phi(x, g)
    r = lam_total / k - rates + (1.0 - 1.0 / k) * np.roll(rates, 1)
    return float(np.dot(x, r))
