"""Command-line entry point: ``prioritycsma <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 oracle/assertion failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import load_config
from .errors import ConfigError, DomainError, InsufficientDataError, OracleFailure
from .fluid import integrate, lyapunov_max_drift_check, phi
from .simulator import run
from .stability import c_membership, conjecture_scan, symmetric_threshold, two_fairness_check

log = logging.getLogger("prioritycsma")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(obj, path=None) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg


def _write_table(rows: list[dict], fields, out: Path | None, stem: str, fmt: str) -> None:
    if out is None:
        dump_json(rows)
    elif fmt == "json":
        dump_json(rows, out / f"{stem}.json")
    else:
        ex.write_rows(rows, out / f"{stem}.csv", fields)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    trace = run(cfg)
    summary = trace.summary()
    if trace.horizon >= 10_000:
        rates = ex.growth_rate(trace)
        summary["growth"] = {"total": rates.total, "per_node": rates.per_node}
        summary["classification"] = ex.classify_stability(trace).to_dict()
    out = _outdir(args)
    if out is None:
        dump_json(summary)
        return 0
    if args.format == "json":
        dump_json({"slot": trace.sample_slots, "total_queue": trace.totals[trace.sample_slots],
                   "queues": trace.queues}, out / "trace.json")
    else:
        trace.write_csv(out / "trace.csv")
    dump_json(summary, out / "summary.json")
    return 0


def cmd_fluid(args) -> int:
    cfg = _config(args)
    drift = ex.fluid_drift_for(cfg)
    traj = integrate(cfg.fluid_initial(), drift, args.T, args.dt, cfg.boundary_mode)
    bound = drift.rate_bound() + 1.0
    summary = {
        "T": args.T,
        "dt": float(traj.times[1] - traj.times[0]) if len(traj.times) > 1 else None,
        "boundary_mode": cfg.boundary_mode,
        "final_state": traj.states[-1],
        "max_step_rate": traj.max_step_rate(),
        "lipschitz_bound": bound,
    }
    if not cfg.hop.multi:
        p = np.ones(cfg.graph.node_count)
        summary["max_lyapunov_check"] = lyapunov_max_drift_check(traj, p, cfg.rates(), cfg.graph).to_dict()
    out = _outdir(args)
    if out is None:
        dump_json(summary)
    else:
        if args.format == "json":
            dump_json({"t": traj.times, "x": traj.states}, out / "trajectory.json")
        else:
            traj.to_csv(out / "trajectory.csv")
        dump_json(summary, out / "summary.json")
    if not traj.is_lipschitz(bound):
        raise OracleFailure(f"trajectory step rate {traj.max_step_rate()} exceeds {bound}")
    return 0


def cmd_stability(args) -> int:
    cfg = _config(args)
    g = cfg.graph
    if cfg.hop.multi:
        thr = symmetric_threshold(g)
        report = {"hop": "multi_hop", "threshold": thr, "lambda": cfg.lam,
                  "stable_by_criterion": float(cfg.lam) < thr}
    else:
        verdict = c_membership(cfg.rates(), g, args.budget, cfg.seed)
        if verdict.witness is not None:
            slack = phi(verdict.witness, g) - cfg.rates()
            if np.any(slack < -1e-9):
                raise OracleFailure("returned witness does not dominate the arrival rates")
        report = verdict.to_dict()
        report["threshold"] = symmetric_threshold(g)
    out = _outdir(args)
    dump_json(report, None if out is None else out / "stability.json")
    return 0


def cmd_fairness(args) -> int:
    cfg = _config(args)
    x = cfg.fluid_initial()
    if np.any(x <= 0):
        raise ConfigError("fairness needs a strictly positive state (fluid.x0 or initial_state)")
    report = two_fairness_check(x, cfg.graph, args.samples, cfg.seed)
    out = _outdir(args)
    dump_json(report.to_dict(), None if out is None else out / "fairness.json")
    if report.min_gap < -1e-9:
        raise OracleFailure(f"fairness gap {report.min_gap} below tolerance")
    return 0


def cmd_conjecture(args) -> int:
    seed = 0 if args.seed is None else args.seed
    report = conjecture_scan(range(args.nmin, args.nmax + 1), args.samples, seed,
                             args.distribution, args.descent, args.workers)
    out = _outdir(args)
    dump_json(report.to_dict(), None if out is None else out / "conjecture.json")
    if report.counterexample:
        log.warning("candidate counterexample found: value %.3e", report.min_value)
    return 0


def cmd_scaling(args) -> int:
    cfg = _config(args)
    r_values = [int(v) for v in args.r.split(",") if v.strip()]
    if not r_values:
        raise ConfigError("--r needs at least one value")
    rows = [vars(row) for row in ex.fluid_scaling_study(cfg, r_values, args.T, args.dt)]
    _write_table(rows, ["r", "slots", "deviation", "worst_time"], _outdir(args), "scaling", args.format)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows = ex.sweep(cfg, ex.parse_grid(args.lambda_grid), args.reps, args.workers)
    _write_table(rows, ex.SWEEP_FIELDS, _outdir(args), "sweep", args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output directory (stdout JSON if omitted)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="prioritycsma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the slotted simulator")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fluid", parents=[common], help="integrate the fluid model")
    p.add_argument("--config", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_fluid)

    p = sub.add_parser("stability", parents=[common], help="stability-set membership")
    p.add_argument("--config", required=True)
    p.add_argument("--budget", type=int, default=100_000)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("fairness", parents=[common], help="2-fairness check of the rates")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_fairness)

    p = sub.add_parser("conjecture", parents=[common], help="scan the cyclic-sum inequality")
    p.add_argument("--nmin", type=int, default=3)
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--distribution", default="mixed")
    p.add_argument("--descent", type=int, default=100, help="local descents from the worst samples")
    p.set_defaults(func=cmd_conjecture)

    p = sub.add_parser("scaling", parents=[common], help="fluid-scaling convergence study")
    p.add_argument("--config", required=True)
    p.add_argument("--r", required=True, help="comma-separated scaling factors")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("sweep", parents=[common], help="arrival-rate sweep with replications")
    p.add_argument("--config", required=True)
    p.add_argument("--lambda-grid", required=True, help="'lo:hi:step' or comma list")
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, InsufficientDataError) as exc:
        log.error("%s", exc)
        return 2
    except OracleFailure as exc:
        log.error("oracle failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
