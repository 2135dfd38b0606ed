"""Seeded experiment orchestration: scenarios, trials, aggregation, result files.

A trial builds the constellation from its seed, extracts candidate links under
the configured feasibility model, runs the local-search baseline and, for the
spectral method, warm-starts gradient ascent from the baseline topology and
rounds the result. Trials are independent and may run in worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError, EigenSolverError
from .feasibility import (
    CandidateEdgeSet,
    FeasibilityConfig,
    FeasibilityModel,
    candidates,
    stable_edge_mask,
)
from .graph_core import Topology, TopologyMetrics, evaluate_topology
from .heuristic import HeuristicConfig, run_heuristic
from .orbit import Constellation, ConstellationConfig, build_constellation
from .rounding import round_topology
from .spectral_opt import PgaConfig, PgaTrace, fixed_intraplane_mask, run_pga, warm_start

METHODS = ("spectral", "heuristic")

CSV_COLUMNS = (
    "trial", "seed", "method", "model", "d_max_km", "diameter", "avg_max_hops",
    "n_edges", "min_degree", "stability", "lambda2", "wall_time_s",
)
LATENCY_COLUMN = "latency_ms_upper"

# metrics aggregated per (method, model, d_max) group
SUMMARY_METRICS = ("diameter", "avg_max_hops", "n_edges", "min_degree", "stability", "lambda2", "wall_time_s")


@dataclass(frozen=True)
class ExperimentConfig:
    constellation: ConstellationConfig
    feasibility: FeasibilityConfig
    method: str = "both"
    pga: PgaConfig = field(default_factory=PgaConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    trials: int = 1
    base_seed: int = 0
    t0_s: float = 0.0
    fixed_intraplane: bool = False
    d_max_sweep: tuple | None = None
    latency_report_km_per_ms: float = 300.0

    def validate(self) -> None:
        self.constellation.validate()
        self.feasibility.validate()
        self.pga.validate()
        self.heuristic.validate(self.constellation.n_sats)
        if self.method not in METHODS + ("both",):
            raise ConfigurationError("method", f"expected spectral, heuristic or both, got {self.method!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigurationError("trials", f"must be an integer >= 1, got {self.trials!r}")
        if int(self.base_seed) != self.base_seed or self.base_seed < 0:
            raise ConfigurationError("base_seed", "must be a non-negative integer")
        if self.pga.degree_budget != self.heuristic.degree_budget:
            raise ConfigurationError(
                "degree_budget",
                f"pga ({self.pga.degree_budget}) and heuristic ({self.heuristic.degree_budget}) disagree",
            )
        if self.d_max_sweep is not None:
            sweep = list(self.d_max_sweep)
            if not sweep or any(not d > 0 for d in sweep):
                raise ConfigurationError("d_max_sweep", "values must be positive")
            if any(b <= a for a, b in zip(sweep, sweep[1:])):
                raise ConfigurationError("d_max_sweep", "values must be strictly ascending")
        if not self.latency_report_km_per_ms > 0:
            raise ConfigurationError("latency_report_km_per_ms", "must be > 0")

    @property
    def degree_budget(self) -> int:
        return self.heuristic.degree_budget

    @property
    def methods(self) -> tuple:
        return METHODS if self.method == "both" else (self.method,)

    def d_max_values(self) -> list:
        if self.d_max_sweep:
            return [float(d) for d in self.d_max_sweep]
        return [float(self.feasibility.d_max_km)]

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``model``/``d_max_km`` reach into feasibility."""
        feas = {}
        for key in ("model", "d_max_km"):
            if key in changes:
                feas[key] = changes.pop(key)
        cfg = dataclasses.replace(self, **changes)
        if feas:
            cfg = dataclasses.replace(cfg, feasibility=dataclasses.replace(cfg.feasibility, **feas))
        return cfg


def _coerce(name, value, kind):
    # YAML 1.1 reads exponent literals without a dot (1e-08) as strings
    if kind not in ("float", "int") or isinstance(value, bool):
        return value
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(name, f"expected a number, got {value!r}") from None
    if kind == "int":
        if number != int(number):
            raise ConfigurationError(name, f"expected an integer, got {value!r}")
        return int(number)
    return number


def _build_section(cls, raw, section: str):
    if not isinstance(raw, dict):
        raise ConfigurationError(section, "must be a mapping")
    kinds = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(kinds))
    if unknown:
        raise ConfigurationError(f"{section}.{unknown[0]}", "unknown key")
    raw = {k: _coerce(k, v, kinds[k]) for k, v in raw.items()}
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigurationError(section, str(exc)) from None
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(section, str(exc)) from None


_SECTIONS = {
    "constellation": ConstellationConfig,
    "feasibility": FeasibilityConfig,
    "pga": PgaConfig,
    "heuristic": HeuristicConfig,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config; keys must match field names exactly."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config", "top level must be a mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(unknown[0], "unknown key")
    for required in ("constellation", "feasibility"):
        if required not in raw:
            raise ConfigurationError(required, "missing required section")
    kwargs = dict(raw)
    for name, cls in _SECTIONS.items():
        if name in kwargs:
            kwargs[name] = _build_section(cls, kwargs[name], name)
    if kwargs.get("d_max_sweep") is not None:
        kwargs["d_max_sweep"] = tuple(float(d) for d in kwargs["d_max_sweep"])
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            value = {k: (v.value if isinstance(v, FeasibilityModel) else v) for k, v in dataclasses.asdict(value).items()}
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError("config", f"cannot parse {path}: {exc}") from None
    return config_from_dict(raw or {})


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    method: str
    model: str
    d_max_km: float
    metrics: TopologyMetrics | None
    lambda2_final: float | None = None
    wall_time_s: float = 0.0
    error: str | None = None
    topology: Topology | None = field(default=None, repr=False, compare=False)
    trace: PgaTrace | None = field(default=None, repr=False, compare=False)
    # baseline only: (iteration, diameter, avg_max_hops) per accepted update
    accepted: list | None = field(default=None, repr=False, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> dict:
        m = self.metrics
        return {
            "trial": self.trial_index,
            "seed": self.seed,
            "method": self.method,
            "model": self.model,
            "d_max_km": self.d_max_km,
            "diameter": None if m is None else m.diameter_hops,
            "avg_max_hops": None if m is None else m.avg_max_hops,
            "n_edges": None if m is None else m.n_edges,
            "min_degree": None if m is None else m.min_degree,
            "stability": None if m is None else m.stability_fraction,
            "lambda2": self.lambda2_final,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class Scenario:
    """Everything a trial derives from its seed before optimisation."""

    constellation: Constellation
    edge_set: CandidateEdgeSet
    stable_mask: np.ndarray
    fixed_mask: np.ndarray | None = None


def build_scenario(cfg: ExperimentConfig, seed: int, d_max_km: float | None = None) -> Scenario:
    feas = cfg.feasibility
    if d_max_km is not None:
        feas = dataclasses.replace(feas, d_max_km=float(d_max_km))
    constellation = build_constellation(cfg.constellation, seed)
    es = candidates(constellation, cfg.t0_s, feas)
    fixed_mask = None
    if cfg.fixed_intraplane:
        ring = fixed_intraplane_mask(es, cfg.degree_budget)
        es = es.subset(np.flatnonzero(~ring.excluded))
        fixed_mask = fixed_intraplane_mask(es, cfg.degree_budget).mask
    if feas.model is FeasibilityModel.VIABILITY:
        stable = np.ones(es.m, dtype=bool)
    else:
        stable = stable_edge_mask(es, constellation, cfg.t0_s, feas.d_max_km, feas.viability_samples)
    return Scenario(constellation, es, stable, fixed_mask)


def _evaluate(topo: Topology, stable_mask) -> TopologyMetrics:
    return evaluate_topology(topo, stable_mask=stable_mask if topo.n_edges else None)


def run_trial(cfg: ExperimentConfig, trial_index: int, d_max_km: float | None = None) -> list[TrialResult]:
    """One seeded trial; returns a result per configured method.

    The spectral method always runs the baseline first (its warm start), so
    with ``method="both"`` the baseline result comes from that same run.
    A gradient-ascent eigensolver failure is recorded on the spectral result
    instead of raised.
    """
    seed = int(cfg.base_seed) + int(trial_index)
    d_max = float(cfg.feasibility.d_max_km if d_max_km is None else d_max_km)
    model = cfg.feasibility.model.value
    D = cfg.degree_budget

    start = time.perf_counter()
    sc = build_scenario(cfg, seed, d_max)
    es = sc.edge_set
    fixed_edges = frozenset() if sc.fixed_mask is None else frozenset(np.flatnonzero(sc.fixed_mask).tolist())
    rng = np.random.default_rng(seed)
    use_sigma = cfg.feasibility.model is FeasibilityModel.SNAPSHOT
    inc = run_heuristic(
        es, cfg.heuristic, rng, stable_mask=sc.stable_mask, use_stability=use_sigma, fixed=fixed_edges
    )
    heuristic_time = time.perf_counter() - start

    out = []
    if "heuristic" in cfg.methods:
        out.append(TrialResult(
            trial_index, seed, "heuristic", model, d_max, inc.metrics,
            wall_time_s=heuristic_time, topology=inc.topology, accepted=inc.accepted,
        ))
    if "spectral" in cfg.methods:
        x0 = warm_start(inc.topology, es, cfg.pga.warm_background)
        try:
            x_star, trace = run_pga(es, cfg.pga, x0, fixed_mask=sc.fixed_mask)
        except EigenSolverError as exc:
            out.insert(0, TrialResult(
                trial_index, seed, "spectral", model, d_max, None,
                wall_time_s=time.perf_counter() - start, error=f"eigensolver: {exc}",
                trace=getattr(exc, "trace", None),
            ))
            return out
        topo = round_topology(es, x_star, D, fixed_edges=fixed_edges)
        metrics = _evaluate(topo, sc.stable_mask)
        out.insert(0, TrialResult(
            trial_index, seed, "spectral", model, d_max, metrics,
            lambda2_final=trace.lambda2[-1] if len(trace) else None,
            wall_time_s=time.perf_counter() - start, topology=topo, trace=trace,
        ))
    return out


def _run_task(args):
    cfg, index, d_max = args
    results = run_trial(cfg, index, d_max)
    for r in results:
        # topologies and traces reference the whole candidate set; keep workers' payload small
        r.topology = None
        r.trace = None
        r.accepted = None
    return results


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None):
    """Run every (d_max, trial) pair and aggregate; returns ``(results, stats)``."""
    cfg.validate()
    tasks = [(cfg, i, d) for d in cfg.d_max_values() for i in range(cfg.trials)]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) == 1:
        batches = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            batches = list(pool.map(_run_task, tasks))
    results = [r for batch in batches for r in batch]
    results.sort(key=_result_order)
    return results, summarize(results)


def _result_order(r: TrialResult):
    return (r.d_max_km, r.model, r.trial_index, METHODS.index(r.method) if r.method in METHODS else 99)


@dataclass(frozen=True)
class MetricStats:
    min: float
    max: float
    mean: float
    count: int


@dataclass
class GroupSummary:
    method: str
    model: str
    d_max_km: float
    n_trials: int
    n_ok: int
    disconnected_count: int
    failed_count: int
    metrics: dict


@dataclass
class SummaryStats:
    groups: list

    def group(self, method: str, model: str | None = None, d_max_km: float | None = None) -> GroupSummary:
        for g in self.groups:
            if g.method == method and model in (None, g.model) and d_max_km in (None, g.d_max_km):
                return g
        raise KeyError((method, model, d_max_km))

    def to_dict(self) -> dict:
        return {"groups": [dataclasses.asdict(g) for g in self.groups]}


def _stats(values) -> MetricStats | None:
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return None
    lo, hi = min(vals), max(vals)
    # the exact mean lies in [lo, hi]; clamp away the final rounding step
    mean = min(hi, max(lo, math.fsum(vals) / len(vals)))
    return MetricStats(lo, hi, mean, len(vals))


def summarize(results) -> SummaryStats:
    """Min/max/mean per metric for each (method, model, d_max) group.

    Failed and disconnected trials are counted but left out of the statistics.
    """
    results = list(results)
    if not any(not r.failed for r in results):
        raise ValueError("no successful trials to summarize")
    keys = []
    for r in results:
        key = (r.method, r.model, r.d_max_km)
        if key not in keys:
            keys.append(key)
    groups = []
    for method, model, d_max in keys:
        members = [r for r in results if (r.method, r.model, r.d_max_km) == (method, model, d_max)]
        ok = [r for r in members if not r.failed]
        disconnected = [r for r in ok if not math.isfinite(r.metrics.diameter_hops)]
        finite = [r for r in ok if math.isfinite(r.metrics.diameter_hops)]
        rows = [r.row() for r in finite]
        metrics = {}
        for name in SUMMARY_METRICS:
            s = _stats(row[name] for row in rows)
            if s is not None:
                metrics[name] = s
        groups.append(GroupSummary(
            method=method, model=model, d_max_km=d_max, n_trials=len(members), n_ok=len(ok),
            disconnected_count=len(disconnected), failed_count=len(members) - len(ok), metrics=metrics,
        ))
    return SummaryStats(groups)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def latency_ms(diameter, d_max_km, km_per_ms=300.0):
    """Upper bound on end-to-end delay: every hop at the longest allowed link length."""
    if diameter is None:
        return None
    return float(diameter) * float(d_max_km) / float(km_per_ms)


def write_results_csv(results, path, latency_km_per_ms: float | None = 300.0) -> Path:
    path = Path(path)
    columns = list(CSV_COLUMNS) + ([LATENCY_COLUMN] if latency_km_per_ms else [])
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for r in results:
                row = r.row()
                if latency_km_per_ms:
                    row[LATENCY_COLUMN] = latency_ms(row["diameter"], row["d_max_km"], latency_km_per_ms)
                w.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc
    return path


_INT_COLUMNS = {"trial", "seed", "n_edges", "min_degree"}
_STR_COLUMNS = {"method", "model"}


def read_results(path) -> list[dict]:
    """Parse a results CSV back into typed row dicts (empty cells become ``None``)."""
    out = []
    with Path(path).open(newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, text in raw.items():
                if text == "":
                    row[key] = None
                elif key in _STR_COLUMNS:
                    row[key] = text
                elif key in _INT_COLUMNS:
                    row[key] = int(text)
                else:
                    row[key] = float(text)
            out.append(row)
    return out


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_summary_json(stats: SummaryStats, path, cfg: ExperimentConfig | None = None) -> Path:
    doc = stats.to_dict()
    if cfg is not None:
        doc["config"] = config_to_dict(cfg)
    path = Path(path)
    try:
        path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc.strerror}") from exc
    return path


def write_figure_csvs(stats: SummaryStats, out_dir, metrics=("diameter", "avg_max_hops")) -> list[Path]:
    """One CSV per metric with d_max against min/mean/max, one row per group."""
    out_dir = Path(out_dir)
    paths = []
    for name in metrics:
        path = out_dir / f"figure_{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_max_km", "method", "model", "min", "mean", "max", "count", "disconnected"])
            for g in sorted(stats.groups, key=lambda g: (g.d_max_km, g.model, g.method)):
                s = g.metrics.get(name)
                if s is None:
                    w.writerow([_fmt(g.d_max_km), g.method, g.model, "", "", "", 0, g.disconnected_count])
                else:
                    w.writerow([_fmt(g.d_max_km), g.method, g.model, _fmt(s.min), _fmt(s.mean), _fmt(s.max),
                                s.count, g.disconnected_count])
        paths.append(path)
    return paths


def write_results(results, stats: SummaryStats, out_dir, cfg: ExperimentConfig | None = None,
                  formats=("csv", "json", "figures")) -> dict:
    """Write ``results.csv``, ``summary.json`` and figure CSVs into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    km_per_ms = cfg.latency_report_km_per_ms if cfg is not None else 300.0
    written = {}
    if "csv" in formats:
        written["csv"] = write_results_csv(results, out_dir / "results.csv", km_per_ms)
    if "json" in formats:
        written["json"] = write_summary_json(stats, out_dir / "summary.json", cfg)
    if "figures" in formats:
        written["figures"] = write_figure_csvs(stats, out_dir)
    return written


def write_trace_csv(trace: PgaTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PgaTrace.COLUMNS)
        for row in trace.rows():
            w.writerow([_fmt(v) for v in row])
    return path


def write_topology(topology: Topology, path) -> Path:
    """Edge list, one ``u_plane,u_idx,v_plane,v_idx`` line per link."""
    es = topology.edge_set
    lines = []
    for a, b in topology.pairs():
        sa, sb = es.sat_id(a), es.sat_id(b)
        lines.append(f"{sa.plane},{sa.index},{sb.plane},{sb.index}")
    path = Path(path)
    path.write_text("".join(line + "\n" for line in lines))
    return path


def read_topology(path, edge_set: CandidateEdgeSet) -> Topology:
    """Parse an edge-list file against ``edge_set``; every link must be a candidate."""
    spp = edge_set.sats_per_plane
    selected = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected u_plane,u_idx,v_plane,v_idx")
        try:
            up, ui, vp, vi = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer field") from None
        for plane, idx in ((up, ui), (vp, vi)):
            if not (0 <= idx < spp and 0 <= plane * spp + idx < edge_set.n_sats):
                raise ValueError(f"{path}:{lineno}: satellite {plane},{idx} out of range")
        k = edge_set.edge_index(up * spp + ui, vp * spp + vi)
        if k is None:
            raise ValueError(f"{path}:{lineno}: link {up},{ui}-{vp},{vi} is not a feasible candidate")
        selected.add(k)
    return Topology(edge_set, frozenset(selected))
