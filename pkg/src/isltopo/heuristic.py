"""Iterative local-search baseline for degree-constrained link selection.

Start from a greedy degree-balanced topology, then for ``iterations`` rounds
perturb a copy of the incumbent (a repair sweep every ``repair_interval``
rounds, random link replacement otherwise) and keep it when it is strictly
better on (diameter, mean eccentricity, stable-link fraction) compared in
that order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .feasibility import CandidateEdgeSet
from .graph_core import Topology, TopologyMetrics, evaluate_topology


@dataclass(frozen=True)
class HeuristicConfig:
    iterations: int = 300
    repair_interval: int = 15
    perturbation_size: int = 20
    degree_budget: int = 4
    init_passes: int = 3

    def validate(self, n_sats: int | None = None) -> None:
        if self.iterations < 0:
            raise ConfigurationError("iterations", "must be >= 0")
        if self.repair_interval < 1:
            raise ConfigurationError("repair_interval", "must be >= 1")
        if self.perturbation_size < 0:
            raise ConfigurationError("perturbation_size", "must be >= 0")
        if n_sats is not None and self.perturbation_size > n_sats:
            raise ConfigurationError(
                "perturbation_size", f"{self.perturbation_size} exceeds the {n_sats} satellites"
            )
        if self.degree_budget < 1:
            raise ConfigurationError("degree_budget", "must be >= 1")
        if self.init_passes < 1:
            raise ConfigurationError("init_passes", "must be >= 1")


@dataclass
class Incumbent:
    topology: Topology
    metrics: TopologyMetrics
    # (iteration, diameter, avg_max_hops) of every accepted update, initial included
    accepted: list = field(default_factory=list)


class _Links:
    """Mutable working copy of a topology with per-node degree counts."""

    def __init__(self, edge_set: CandidateEdgeSet, D: int, selected=(), fixed=frozenset()):
        self.es = edge_set
        self.D = D
        self.fixed = frozenset(fixed)
        self.selected = set(selected) | set(self.fixed)
        self.deg = [0] * edge_set.n_sats
        for k in self.selected:
            self.deg[edge_set.u[k]] += 1
            self.deg[edge_set.v[k]] += 1

    def add(self, k: int) -> bool:
        a, b = int(self.es.u[k]), int(self.es.v[k])
        if k in self.selected or self.deg[a] >= self.D or self.deg[b] >= self.D:
            return False
        self.selected.add(k)
        self.deg[a] += 1
        self.deg[b] += 1
        return True

    def remove(self, k: int) -> None:
        self.selected.remove(k)
        self.deg[self.es.u[k]] -= 1
        self.deg[self.es.v[k]] -= 1

    def open_candidates(self, node: int, exclude: int | None = None) -> list[int]:
        """Unselected incident edges whose far end has spare capacity."""
        es = self.es
        out = []
        for k in es.incident[node].tolist():
            if k in self.selected:
                continue
            w = es.other_end(k, node)
            if w != exclude and self.deg[w] < self.D:
                out.append(k)
        return out

    def topology(self) -> Topology:
        return Topology(self.es, frozenset(self.selected))


def _shuffled(items: list, rng: np.random.Generator) -> list:
    return [items[i] for i in rng.permutation(len(items))]


def initial_topology(
    edge_set: CandidateEdgeSet,
    D: int,
    rng: np.random.Generator,
    init_passes: int = 3,
    fixed=frozenset(),
) -> Topology:
    links = _Links(edge_set, D, fixed=fixed)
    dist = edge_set.distance_km
    for _ in range(init_passes):
        added = False
        deficient = [i for i in range(edge_set.n_sats) if links.deg[i] < D]
        # most residual capacity first; stable sort keeps index order on ties
        deficient.sort(key=lambda i: links.deg[i])
        for u in deficient:
            if links.deg[u] >= D:
                continue
            cands = links.open_candidates(u)
            cands.sort(key=lambda k: (dist[k], k))
            half = len(cands) // 2
            near, far = cands[:half], cands[half:]
            for k in _shuffled(far, rng) + _shuffled(near, rng):
                if links.deg[u] >= D:
                    break
                added |= links.add(k)
        if not added:
            break
    return links.topology()


def repair(
    topology: Topology,
    edge_set: CandidateEdgeSet,
    D: int,
    rng: np.random.Generator,
    fixed=frozenset(),
) -> Topology:
    """Top up every under-budget satellite from a shuffled candidate list."""
    links = _Links(edge_set, D, topology.selected, fixed)
    _repair(links, rng)
    return links.topology()


def _repair(links: _Links, rng) -> None:
    D = links.D
    for u in [i for i in range(links.es.n_sats) if links.deg[i] < D]:
        if links.deg[u] >= D:
            continue
        for k in _shuffled(links.open_candidates(u), rng):
            if links.deg[u] >= D:
                break
            links.add(k)


def random_replacement(
    topology: Topology,
    edge_set: CandidateEdgeSet,
    D: int,
    m: int,
    rng: np.random.Generator,
    fixed=frozenset(),
) -> Topology:
    """For ``m`` random satellites, drop one random link and try one new one."""
    if m > edge_set.n_sats:
        raise ValueError(f"perturbation size {m} exceeds {edge_set.n_sats} satellites")
    links = _Links(edge_set, D, topology.selected, fixed)
    _replace(links, m, rng)
    return links.topology()


def _replace(links: _Links, m: int, rng) -> None:
    es = links.es
    if m == 0:
        return
    for u in rng.choice(es.n_sats, size=m, replace=False).tolist():
        own = [k for k in es.incident[u].tolist() if k in links.selected and k not in links.fixed]
        if not own:
            continue
        k = own[int(rng.integers(len(own)))]
        links.remove(k)
        v = es.other_end(k, u)
        # the dropped link stays dropped even if no replacement exists
        cands = links.open_candidates(u, exclude=v)
        if cands:
            links.add(cands[int(rng.integers(len(cands)))])


def better(candidate: TopologyMetrics, incumbent: TopologyMetrics, use_stability: bool = True) -> bool:
    """Strict lexicographic improvement on (diameter, mean eccentricity, stability)."""
    if candidate.diameter_hops < incumbent.diameter_hops:
        return True
    if candidate.diameter_hops != incumbent.diameter_hops:
        return False
    if candidate.avg_max_hops < incumbent.avg_max_hops:
        return True
    if candidate.avg_max_hops != incumbent.avg_max_hops or not use_stability:
        return False
    sc, si = candidate.stability_fraction, incumbent.stability_fraction
    return sc is not None and si is not None and sc > si


def run_heuristic(
    edge_set: CandidateEdgeSet,
    cfg: HeuristicConfig,
    rng: np.random.Generator,
    stable_mask: np.ndarray | None = None,
    use_stability: bool = True,
    fixed=frozenset(),
) -> Incumbent:
    """Iterative link optimisation from a greedy start.

    ``stable_mask`` flags candidates that stay feasible over a full period;
    it feeds the stability tie-break (snapshot variant). Pass
    ``use_stability=False`` for the viability variant, where every link is
    stable by construction. ``fixed`` edges are seeded and never removed.
    """
    cfg.validate(edge_set.n_sats)
    D = cfg.degree_budget
    fixed = frozenset(fixed)

    def evaluate(topo):
        mask = stable_mask if topo.n_edges else None
        return evaluate_topology(topo, stable_mask=mask)

    best = initial_topology(edge_set, D, rng, cfg.init_passes, fixed)
    best_metrics = evaluate(best)
    accepted = [(0, best_metrics.diameter_hops, best_metrics.avg_max_hops)]
    for i in range(1, cfg.iterations + 1):
        links = _Links(edge_set, D, best.selected, fixed)
        if i % cfg.repair_interval == 0:
            _repair(links, rng)
        else:
            _replace(links, cfg.perturbation_size, rng)
        cand = links.topology()
        metrics = evaluate(cand)
        if better(metrics, best_metrics, use_stability):
            best, best_metrics = cand, metrics
            accepted.append((i, metrics.diameter_hops, metrics.avg_max_hops))
    return Incumbent(topology=best, metrics=best_metrics, accepted=accepted)
