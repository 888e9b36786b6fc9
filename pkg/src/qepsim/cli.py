"""Command-line entry point: run experiments, audits and sweeps.

Usage:
    qep <experiment> [--config FILE] [--set key=value ...] [--out DIR]

Experiments: train-phase-classifier, explore-phase, optimize-sensitivity,
onsager-audit, nudge-sweep. Configuration is a flat JSON document; --set
flags override file values. Every run writes trajectory.csv, manifest.json
and summary.csv into the output directory; the manifest echoes the fully
materialized config so a run can be replayed exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, eigensolver
from .hamiltonian import build_cluster_ising
from .qep import onsager_audit
from .seeding import substream
from .training import (
    ExploreConfig,
    SensitivityConfig,
    SupervisedConfig,
    SweepConfig,
    Trajectory,
    explore_phase,
    optimize_sensitivity,
    overlap_sweep,
    phase_grid_probabilities,
    train_supervised,
)


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class AuditConfig:
    """Reciprocity audit over random dense-coupling Hamiltonians."""

    n: int = 4
    n_instances: int = 10
    n_pairs: int = 5
    delta: float = 1e-4
    coupling_scale: float = 1.0
    seed: int = 1
    deg_tol: float = 1e-8
    solver_tol: float = 1e-9
    solver_seed: int = 0


EXPERIMENTS = {
    "train-phase-classifier": SupervisedConfig,
    "explore-phase": ExploreConfig,
    "optimize-sensitivity": SensitivityConfig,
    "onsager-audit": AuditConfig,
    "nudge-sweep": SweepConfig,
}


def random_cluster_instance(n: int, scale: float, rng):
    """A cluster chain with independently drawn couplings; generically
    nondegenerate and a convenient audit target with three parameters."""
    g = rng.uniform(0.2, scale + 0.2, 3) * rng.choice([-1.0, 1.0], 3)
    return build_cluster_ising(g[0], g[1], g[2], n)


def run_onsager_audit(cfg: AuditConfig) -> Trajectory:
    traj = Trajectory(
        experiment="onsager-audit",
        config=dataclasses.asdict(cfg),
        columns=["instance", "pair", "param_j", "param_l", "asymmetry"],
    )
    eq_start = eigensolver.equilibration_count()
    rng = substream(cfg.seed, "audit")
    worst = 0.0
    produced = 0
    while produced < cfg.n_instances:
        h = random_cluster_instance(cfg.n, cfg.coupling_scale, rng)
        res = eigensolver.ground_state(h.assemble(), tol=cfg.solver_tol,
                                       seed=cfg.solver_seed, deg_tol=cfg.deg_tol)
        if res.gap <= cfg.deg_tol:
            continue  # audit needs nondegenerate points
        params = h.parameters()
        for k in range(cfg.n_pairs):
            j, l = rng.choice(len(params), size=2, replace=False)
            asym = onsager_audit(h, [(params[j], params[l])], delta=cfg.delta,
                                 deg_tol=cfg.deg_tol, tol=cfg.solver_tol,
                                 seed=cfg.solver_seed)
            worst = max(worst, asym)
            traj.add(instance=produced, pair=k, param_j=params[j],
                     param_l=params[l], asymmetry=asym)
        produced += 1
    traj.equilibrations = eigensolver.equilibration_count() - eq_start
    traj.summary = {"max_asymmetry": worst}
    return traj


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(config_cls, key, value):
    fields = {f.name: f for f in dataclasses.fields(config_cls)}
    if key not in fields:
        raise ConfigError(
            f"unknown config key {key!r} for this experiment; "
            f"known keys: {sorted(fields)}"
        )
    if isinstance(value, list):
        value = tuple(value)
    return value


def parse_config(experiment: str, doc: dict | None = None, overrides=()) -> object:
    """Materialize and validate the config for an experiment.

    ``doc`` is the (flat) JSON document; ``overrides`` are key=value strings
    from the command line. Unknown keys are rejected by name.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}"
        )
    config_cls = EXPERIMENTS[experiment]
    merged = {}
    for key, value in (doc or {}).items():
        if key == "experiment":
            if value != experiment:
                raise ConfigError(
                    f"config file names experiment {value!r} but {experiment!r} was requested"
                )
            continue
        merged[key] = _coerce(config_cls, key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        merged[key] = _coerce(config_cls, key, _parse_value(raw))
    try:
        cfg = config_cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _validate(cfg):
    get = lambda name: getattr(cfg, name, None)
    if get("beta") is not None:
        _require(cfg.beta > 0, f"beta > 0 required, got {cfg.beta}")
    if get("betas") is not None:
        _require(all(b > 0 for b in cfg.betas), "every beta in the sweep must be > 0")
    for name in ("n", "n_chain", "n_label"):
        val = get(name)
        if val is not None:
            _require(val >= 3, f"{name} >= 3 required, got {val}")
    if get("learning_rate") is not None:
        _require(cfg.learning_rate >= 0, "learning_rate must be >= 0")
    if get("shots") is not None:
        _require(cfg.shots >= 1, f"shots >= 1 (or null for exact), got {cfg.shots}")
    if get("batch_size") is not None:
        _require(cfg.batch_size >= 1, "batch_size >= 1 required")
    for name in ("n_batches", "n_steps", "n_test", "n_instances", "n_pairs", "eval_interval"):
        val = get(name)
        if val is not None:
            _require(val >= 1, f"{name} >= 1 required, got {val}")
    if get("boundary") is not None:
        _require(cfg.boundary in ("periodic", "open"),
                 f"boundary must be periodic|open, got {cfg.boundary!r}")
    if get("scheme") is not None:
        _require(cfg.scheme in ("symmetric", "one-sided"),
                 f"scheme must be symmetric|one-sided, got {cfg.scheme!r}")
    if get("delta") is not None:
        _require(cfg.delta > 0, "delta > 0 required")


def _config_echo(experiment: str, cfg) -> dict:
    doc = {"experiment": experiment}
    doc.update(dataclasses.asdict(cfg))
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
    return doc


RUNNERS = {
    "train-phase-classifier": train_supervised,
    "explore-phase": explore_phase,
    "optimize-sensitivity": optimize_sensitivity,
    "onsager-audit": run_onsager_audit,
    "nudge-sweep": overlap_sweep,
}


def _write_summary_csv(path: Path, experiment: str, cfg, traj: Trajectory):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if experiment == "train-phase-classifier":
            # plot-ready grid of sector probabilities across the diagram
            names = [c for c in traj.columns
                     if c not in ("step", "loss", "grad_norm", "n_failed",
                                  "acc_many_queries", "acc_single_shot")]
            theta = np.array([traj.rows[-1][name] for name in names])
            writer.writerow(["g_zxz", "g_zz", "g_x", "p_combo1", "p_combo2", "p_combo3"])
            for row in phase_grid_probabilities(cfg, theta):
                writer.writerow([repr(float(v)) for v in row])
        else:
            writer.writerow(["key", "value"])
            for key, value in traj.summary.items():
                writer.writerow([key, value])


def run(experiment: str, cfg, out_dir: Path) -> int:
    """Execute an experiment and persist its artifacts. Returns exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": experiment,
        "config": _config_echo(experiment, cfg),
        "version": __version__,
        "status": "INCOMPLETE",
    }
    status = 1
    try:
        traj = RUNNERS[experiment](cfg)
    except Exception as exc:  # noqa: BLE001 - failures land in the manifest
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    else:
        traj.to_csv(out_dir / "trajectory.csv")
        _write_summary_csv(out_dir / "summary.csv", experiment, cfg, traj)
        manifest["status"] = "COMPLETE"
        manifest["equilibrations"] = traj.equilibrations
        manifest["summary"] = traj.summary
        status = 0
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return status


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qep",
        description="Nudged-response training experiments on spin chains",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS))
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file (flat key/value document)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: runs/<experiment>)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    doc = None
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if not isinstance(doc, dict):
            print("config error: config file must hold a JSON object", file=sys.stderr)
            return 2
    try:
        cfg = parse_config(args.experiment, doc, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out if args.out is not None else Path("runs") / args.experiment
    return run(args.experiment, cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
