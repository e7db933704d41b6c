"""Scenario configuration: strict JSON parsing, validation and digest."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .graph import InterferenceGraph, graph_from_spec, regularity_degree

SCHEMA_VERSION = 1
ARRIVAL_MODELS = ("poisson", "bernoulli", "deterministic_batch")
PROTOCOLS = ("exact_priority", "independent_bernoulli", "epsilon_window")


@dataclass(frozen=True)
class ProtocolMode:
    kind: str = "exact_priority"
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in PROTOCOLS:
            raise ConfigError(f"unknown protocol mode {self.kind!r}")
        if self.kind == "epsilon_window":
            if self.epsilon is None or not 0.0 < self.epsilon < 1.0:
                raise ConfigError(f"epsilon_window needs epsilon in (0, 1), got {self.epsilon}")
        elif self.epsilon is not None:
            raise ConfigError(f"epsilon only applies to epsilon_window, not {self.kind}")

    @property
    def service_factor(self) -> float:
        """Fraction of each slot spent transmitting, for reported throughput."""
        return 1.0 - self.epsilon if self.kind == "epsilon_window" else 1.0

    def to_json(self):
        if self.kind == "epsilon_window":
            return {"mode": self.kind, "epsilon": self.epsilon}
        return self.kind


@dataclass(frozen=True)
class HopMode:
    kind: str = "single_hop"
    k: int | None = None

    def __post_init__(self):
        if self.kind == "single_hop":
            if self.k is not None:
                raise ConfigError("k only applies to multi_hop")
        elif self.kind == "multi_hop":
            if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
                raise ConfigError(f"multi_hop needs an integer k >= 1, got {self.k!r}")
        else:
            raise ConfigError(f"unknown hop mode {self.kind!r}")

    @property
    def multi(self) -> bool:
        return self.kind == "multi_hop"

    def to_json(self):
        return {"mode": self.kind, "k": self.k} if self.multi else self.kind


def _parse_mode(value, cls, allowed_keys):
    if isinstance(value, str):
        return cls(value)
    if isinstance(value, dict):
        extra = value.keys() - allowed_keys
        if extra or "mode" not in value:
            raise ConfigError(f"bad mode object {value!r}")
        args = {k: v for k, v in value.items() if k != "mode"}
        return cls(value["mode"], **args)
    raise ConfigError(f"mode must be a string or object, got {value!r}")


_TOP_KEYS = {
    "schema", "graph", "lambda", "arrival_model", "protocol", "hop",
    "horizon", "initial_state", "seed", "decimation", "fluid",
}
_REQUIRED = {"schema", "graph", "lambda", "horizon", "seed"}
_FLUID_KEYS = {"x0", "boundary_mode"}


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    ``lam`` is a scalar (uniform) or a per-node tuple. In multi-hop mode it
    is the total per-node workload; exogenous arrivals are ``lam / k``.
    """

    graph_spec: dict
    lam: float | tuple[float, ...]
    horizon: int
    seed: int
    arrival_model: str = "poisson"
    protocol: ProtocolMode = field(default_factory=ProtocolMode)
    hop: HopMode = field(default_factory=HopMode)
    initial_state: str | tuple[int, ...] = "empty"
    decimation: int = 1
    fluid_x0: tuple[float, ...] | None = None
    boundary_mode: str = "emitting"

    def __post_init__(self):
        if isinstance(self.lam, list):
            object.__setattr__(self, "lam", tuple(self.lam))
        if isinstance(self.initial_state, list):
            object.__setattr__(self, "initial_state", tuple(self.initial_state))
        if isinstance(self.fluid_x0, list):
            object.__setattr__(self, "fluid_x0", tuple(self.fluid_x0))
        self.validate()

    @cached_property
    def graph(self) -> InterferenceGraph:
        return graph_from_spec(self.graph_spec)

    def rates(self) -> np.ndarray:
        n = self.graph.node_count
        if isinstance(self.lam, tuple):
            if len(self.lam) != n:
                raise ConfigError(f"lambda vector has length {len(self.lam)}, graph has {n} nodes")
            return np.array(self.lam, dtype=float)
        return np.full(n, float(self.lam))

    def arrival_rates(self) -> np.ndarray:
        """Exogenous mean arrivals per node and slot."""
        lam = self.rates()
        return lam / self.hop.k if self.hop.multi else lam

    def initial_counts(self) -> np.ndarray:
        n = self.graph.node_count
        if self.initial_state == "empty":
            return np.zeros(n, dtype=np.int64)
        x = np.array(self.initial_state, dtype=np.int64)
        if x.shape != (n,):
            raise ConfigError(f"initial_state has length {x.size}, graph has {n} nodes")
        return x

    def validate(self) -> None:
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool) or self.horizon < 0:
            raise ConfigError(f"horizon must be a non-negative integer, got {self.horizon!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.decimation, int) or self.decimation < 1:
            raise ConfigError(f"decimation must be a positive integer, got {self.decimation!r}")
        if self.arrival_model not in ARRIVAL_MODELS:
            raise ConfigError(f"unknown arrival model {self.arrival_model!r}")
        if self.boundary_mode not in ("emitting", "absorbing"):
            raise ConfigError(f"unknown boundary mode {self.boundary_mode!r}")
        lam = self.rates()
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ConfigError("arrival rates must be positive and finite")
        if self.hop.multi:
            if isinstance(self.lam, tuple):
                raise ConfigError("multi_hop requires a uniform scalar lambda")
            if regularity_degree(self.graph) is None:
                raise ConfigError("multi_hop requires a regular interference graph")
        if self.arrival_model == "bernoulli" and np.any(self.arrival_rates() > 1):
            raise ConfigError("bernoulli arrivals require rates <= 1")
        counts = self.initial_counts()
        if np.any(counts < 0):
            raise ConfigError("initial_state entries must be non-negative")
        if self.fluid_x0 is not None:
            x0 = np.array(self.fluid_x0, dtype=float)
            if x0.shape != (self.graph.node_count,) or np.any(x0 < 0):
                raise ConfigError("fluid.x0 must be a non-negative vector with one entry per node")

    def fluid_initial(self) -> np.ndarray:
        if self.fluid_x0 is not None:
            return np.array(self.fluid_x0, dtype=float)
        return self.initial_counts().astype(float)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = d.keys() - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = _REQUIRED - d.keys()
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        if d["schema"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {d['schema']!r}")
        lam = d["lambda"]
        if isinstance(lam, list):
            lam = tuple(float(v) for v in lam)
        elif isinstance(lam, (int, float)) and not isinstance(lam, bool):
            lam = float(lam)
        else:
            raise ConfigError(f"lambda must be a number or list, got {lam!r}")
        fluid = d.get("fluid", {})
        if not isinstance(fluid, dict) or fluid.keys() - _FLUID_KEYS:
            raise ConfigError(f"bad fluid section {fluid!r}")
        init = d.get("initial_state", "empty")
        if init != "empty":
            if not isinstance(init, list) or not all(isinstance(v, int) for v in init):
                raise ConfigError("initial_state must be 'empty' or a list of integers")
            init = tuple(init)
        x0 = fluid.get("x0")
        return cls(
            graph_spec=d["graph"],
            lam=lam,
            horizon=d["horizon"],
            seed=d["seed"],
            arrival_model=d.get("arrival_model", "poisson"),
            protocol=_parse_mode(d.get("protocol", "exact_priority"), ProtocolMode, {"mode", "epsilon"}),
            hop=_parse_mode(d.get("hop", "single_hop"), HopMode, {"mode", "k"}),
            initial_state=init,
            decimation=d.get("decimation", 1),
            fluid_x0=None if x0 is None else tuple(float(v) for v in x0),
            boundary_mode=fluid.get("boundary_mode", "emitting"),
        )

    def to_dict(self) -> dict[str, Any]:
        d = {
            "schema": SCHEMA_VERSION,
            "graph": self.graph_spec,
            "lambda": list(self.lam) if isinstance(self.lam, tuple) else self.lam,
            "arrival_model": self.arrival_model,
            "protocol": self.protocol.to_json(),
            "hop": self.hop.to_json(),
            "horizon": self.horizon,
            "initial_state": list(self.initial_state) if isinstance(self.initial_state, tuple) else "empty",
            "seed": self.seed,
            "decimation": self.decimation,
        }
        fluid = {}
        if self.fluid_x0 is not None:
            fluid["x0"] = list(self.fluid_x0)
        if self.boundary_mode != "emitting":
            fluid["boundary_mode"] = self.boundary_mode
        if fluid:
            d["fluid"] = fluid
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ScenarioConfig.from_dict(data)
