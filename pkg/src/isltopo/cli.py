"""Command-line entry point: ``isltopo {generate,optimize,evaluate,experiment}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigurationError, EigenSolverError, InfeasibleError, UndefinedMetricError
from .feasibility import FeasibilityConfig, FeasibilityModel, candidates, snapshot_candidates, stable_edge_mask
from .graph_core import evaluate_topology
from .orbit import build_constellation
from .rounding import verify_degree_feasible


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (YAML or JSON)")
    p.add_argument("--seed", type=int, default=None, help="base seed, overrides the config")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--model", choices=[m.value for m in FeasibilityModel], default=None,
                   help="feasibility model, overrides the config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isltopo", description="Inter-satellite link topology design.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the candidate link list of one constellation")
    _common(p)
    p.add_argument("--out", required=True, help="CSV path; a .constellation.json sidecar is written next to it")

    p = sub.add_parser("optimize", help="single seeded run of one method")
    _common(p)
    p.add_argument("--method", choices=harness.METHODS, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--t-max", type=int, default=None, help="gradient-ascent iterations, overrides the config")

    p = sub.add_parser("evaluate", help="metrics of a topology file as JSON on stdout")
    _common(p)
    p.add_argument("--topology", required=True, help="edge list, one u_plane,u_idx,v_plane,v_idx per line")

    p = sub.add_parser("experiment", help="full trial matrix with summary files")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trials", type=int, default=None, help="trial count, overrides the config")
    p.add_argument("--t-max", type=int, default=None, help="gradient-ascent iterations, overrides the config")
    return parser


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.model is not None:
        changes["model"] = FeasibilityModel(args.model)
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "t_max", None) is not None:
        changes["pga"] = dataclasses.replace(cfg.pga, t_max=args.t_max)
    if changes:
        cfg = cfg.with_overrides(**changes)
    cfg.validate()
    return cfg


def _metrics_doc(metrics, D=None, topology=None) -> dict:
    doc = {
        "diameter": metrics.diameter_hops,
        "avg_max_hops": metrics.avg_max_hops,
        "n_edges": metrics.n_edges,
        "connected": metrics.connected,
        "min_degree": metrics.min_degree,
        "max_degree": metrics.max_degree,
        "degree_histogram": metrics.degree_histogram,
        "stability": metrics.stability_fraction,
    }
    if D is not None and topology is not None:
        doc["degree_feasible"] = verify_degree_feasible(topology, D)[0]
    return doc


def cmd_generate(args) -> int:
    cfg = _load(args)
    seed = cfg.base_seed
    constellation = build_constellation(cfg.constellation, seed)
    es = candidates(constellation, cfg.t0_s, cfg.feasibility)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "kind", "distance_km"])
        for k in range(es.m):
            w.writerow([int(es.u[k]), int(es.v[k]), es.kind(k).value, repr(float(es.distance_km[k]))])
    sidecar = out.with_suffix(".constellation.json")
    sidecar.write_text(json.dumps({
        "seed": seed,
        "model": cfg.feasibility.model.value,
        "t0_s": cfg.t0_s,
        "d_max_km": cfg.feasibility.d_max_km,
        "n_sats": constellation.n_sats,
        "sats_per_plane": cfg.constellation.sats_per_plane,
        "orbital_radius_km": constellation.orbital_radius_km,
        "period_s": constellation.period_s,
        "phase_offsets_rad": list(constellation.phase_offsets),
        "constellation": harness.config_to_dict(cfg)["constellation"],
        "n_candidates": es.m,
    }, indent=2) + "\n")
    print(f"{es.m} candidate links over {es.n_sats} satellites -> {out}")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args).with_overrides(method=args.method, trials=1)
    results = harness.run_trial(cfg, 0)
    res = next(r for r in results if r.method == args.method)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if res.trace is not None:
        harness.write_trace_csv(res.trace, out / "trace.csv")
    if res.failed:
        print(f"isltopo: error: {res.error}", file=sys.stderr)
        return 1
    harness.write_topology(res.topology, out / "topology.txt")
    if res.accepted is not None:
        with (out / "trace.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "diameter", "avg_max_hops"])
            w.writerows(res.accepted)
    doc = _metrics_doc(res.metrics, cfg.degree_budget, res.topology)
    doc.update(method=res.method, model=res.model, seed=res.seed, d_max_km=res.d_max_km,
               lambda2=res.lambda2_final, wall_time_s=res.wall_time_s)
    (out / "metrics.json").write_text(json.dumps(harness._json_safe(doc), indent=2) + "\n")
    print(json.dumps(harness._json_safe(doc)))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    constellation = build_constellation(cfg.constellation, cfg.base_seed)
    # viable links are a subset of the snapshot set, so one lookup table serves both models
    snap_cfg = FeasibilityConfig(cfg.feasibility.d_max_km, cfg.feasibility.viability_samples)
    es = snapshot_candidates(constellation, cfg.t0_s, snap_cfg)
    topo = harness.read_topology(args.topology, es)
    stable = stable_edge_mask(es, constellation, cfg.t0_s, cfg.feasibility.d_max_km,
                              cfg.feasibility.viability_samples)
    metrics = evaluate_topology(topo, stable_mask=stable if topo.n_edges else None)
    doc = _metrics_doc(metrics, cfg.degree_budget, topo)
    doc["seed"] = cfg.base_seed
    doc["all_links_viable"] = bool(np.all(stable[topo.indices()]))
    print(json.dumps(harness._json_safe(doc), indent=2))
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    results, stats = harness.run_experiment(cfg, jobs=args.jobs)
    written = harness.write_results(results, stats, args.out, cfg)
    for g in stats.groups:
        d = g.metrics.get("diameter")
        line = f"{g.method:9s} {g.model:9s} d_max={g.d_max_km:g} ok={g.n_ok}/{g.n_trials}"
        if d is not None:
            line += f" diameter min/mean/max={d.min:g}/{d.mean:.2f}/{d.max:g}"
        if g.disconnected_count:
            line += f" disconnected={g.disconnected_count}"
        print(line)
    print(f"results -> {written['csv']}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, InfeasibleError, UndefinedMetricError, EigenSolverError, ValueError, OSError) as exc:
        print(f"isltopo: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1


if __name__ == "__main__":
    sys.exit(main())
