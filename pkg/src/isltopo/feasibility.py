"""Candidate link sets under the snapshot and viability models.

A link is feasible at an instant when the satellites are within ``d_max_km``
of each other and the straight line through them passes strictly above the
Earth's surface. The snapshot model checks this at ``t0`` only; the viability
model requires it on a uniform time grid spanning one orbital period.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, UndefinedMetricError
from .orbit import Constellation, SatId, orbital_period, positions_at, positions_over, sample_times


class FeasibilityModel(str, Enum):
    SNAPSHOT = "snapshot"
    VIABILITY = "viability"


class EdgeKind(str, Enum):
    INTRA = "intra-plane"
    INTER = "inter-plane"


@dataclass(frozen=True)
class FeasibilityConfig:
    d_max_km: float
    viability_samples: int = 64
    model: FeasibilityModel = FeasibilityModel.SNAPSHOT

    def __post_init__(self):
        object.__setattr__(self, "model", FeasibilityModel(self.model))

    def validate(self) -> None:
        if not self.d_max_km > 0:
            raise ConfigurationError("d_max_km", f"must be > 0, got {self.d_max_km!r}")
        if int(self.viability_samples) != self.viability_samples or self.viability_samples < 2:
            raise ConfigurationError(
                "viability_samples", f"must be an integer >= 2, got {self.viability_samples!r}"
            )


@dataclass(frozen=True)
class CandidateEdge:
    edge_index: int
    u: SatId
    v: SatId
    distance_at_t0_km: float
    kind: EdgeKind


@dataclass(eq=False)
class CandidateEdgeSet:
    """Indexed feasible link list ``F`` over ``n_sats`` satellites.

    Endpoints are stored as global satellite indices with ``u < v``; the order
    of ``u`` then ``v`` matches (plane, in-plane index) lexicographic order.
    """

    n_sats: int
    sats_per_plane: int
    u: np.ndarray
    v: np.ndarray
    distance_km: np.ndarray
    intra: np.ndarray = field(default=None)
    d_max_km: float | None = None
    incident: list = field(init=False, repr=False)
    _lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.distance_km = np.asarray(self.distance_km, dtype=float)
        if not (len(self.u) == len(self.v) == len(self.distance_km)):
            raise ValueError("endpoint and distance arrays differ in length")
        if np.any(self.u >= self.v):
            raise ValueError("edges must satisfy u < v")
        if self.intra is None:
            self.intra = self.u // self.sats_per_plane == self.v // self.sats_per_plane
        self.intra = np.asarray(self.intra, dtype=bool)
        self._lookup = {}
        for k, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            if (a, b) in self._lookup:
                raise ValueError(f"duplicate edge ({a}, {b})")
            self._lookup[(a, b)] = k
        order = np.argsort(np.concatenate([self.u, self.v]), kind="stable")
        ends = np.concatenate([self.u, self.v])[order]
        edge_ids = np.concatenate([np.arange(self.m), np.arange(self.m)])[order]
        bounds = np.searchsorted(ends, np.arange(self.n_sats + 1))
        self.incident = [edge_ids[bounds[i]:bounds[i + 1]] for i in range(self.n_sats)]

    @property
    def m(self) -> int:
        return len(self.u)

    def __len__(self):
        return self.m

    def sat_id(self, i: int) -> SatId:
        return SatId(*divmod(int(i), self.sats_per_plane))

    def kind(self, k: int) -> EdgeKind:
        return EdgeKind.INTRA if self.intra[k] else EdgeKind.INTER

    def edge(self, k: int) -> CandidateEdge:
        return CandidateEdge(
            edge_index=k,
            u=self.sat_id(self.u[k]),
            v=self.sat_id(self.v[k]),
            distance_at_t0_km=float(self.distance_km[k]),
            kind=self.kind(k),
        )

    @property
    def edges(self) -> list[CandidateEdge]:
        return [self.edge(k) for k in range(self.m)]

    def edge_index(self, a: int, b: int) -> int | None:
        """Index of the edge joining global satellites ``a`` and ``b``, or None."""
        if a > b:
            a, b = b, a
        return self._lookup.get((int(a), int(b)))

    def other_end(self, k: int, node: int) -> int:
        return int(self.v[k]) if self.u[k] == node else int(self.u[k])

    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n_sats)

    def subset(self, keep) -> "CandidateEdgeSet":
        keep = np.asarray(keep)
        return CandidateEdgeSet(
            n_sats=self.n_sats,
            sats_per_plane=self.sats_per_plane,
            u=self.u[keep],
            v=self.v[keep],
            distance_km=self.distance_km[keep],
            intra=self.intra[keep],
            d_max_km=self.d_max_km,
        )

    @classmethod
    def from_pairs(cls, n_sats, pairs, sats_per_plane=None, distances=None):
        """Edge set over ``(a, b)`` pairs, normalised to ``a < b`` and sorted.

        ``distances`` (optional) is aligned with ``pairs``. Without
        ``sats_per_plane`` every satellite is treated as its own plane.
        """
        dmap = {}
        for i, (a, b) in enumerate(pairs):
            if a == b:
                raise ValueError(f"self-loop at {a}")
            dmap[(min(a, b), max(a, b))] = 0.0 if distances is None else float(distances[i])
        keys = sorted(dmap)
        return cls(
            n_sats=n_sats,
            sats_per_plane=sats_per_plane or 1,
            u=np.array([k[0] for k in keys], dtype=np.int64),
            v=np.array([k[1] for k in keys], dtype=np.int64),
            distance_km=np.array([dmap[k] for k in keys], dtype=float),
        )


def _feasible_mask(xu: np.ndarray, xv: np.ndarray, d_max_km: float, earth_radius_km: float) -> np.ndarray:
    """Vectorised feasibility test over the leading axes of ``(..., 3)`` arrays."""
    diff = xu - xv
    dist = np.sqrt((diff * diff).sum(axis=-1))
    cross = np.cross(xu, xv)
    cnorm = np.sqrt((cross * cross).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        clearance = cnorm / dist
    # coincident positions give nan/inf clearance; reject them explicitly
    return (dist > 0) & (dist <= d_max_km) & (clearance > earth_radius_km)


def link_feasible_at(pos_u, pos_v, d_max_km: float, earth_radius_km: float) -> bool:
    """Distance bound (non-strict) and line-of-sight clearance (strict) at one instant."""
    xu = np.asarray(pos_u, dtype=float)
    xv = np.asarray(pos_v, dtype=float)
    if not np.any(xu) or not np.any(xv):
        raise ValueError("positions must be nonzero")
    return bool(_feasible_mask(xu, xv, d_max_km, earth_radius_km))


def _candidate_pairs(positions: np.ndarray, d_max_km: float, earth_radius_km: float):
    # KD-tree prefilter with a slack radius; the exact test below decides.
    tree = cKDTree(positions)
    pairs = tree.query_pairs(d_max_km * (1.0 + 1e-9) + 1e-9, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    a = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    b = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    ok = _feasible_mask(positions[a], positions[b], d_max_km, earth_radius_km)
    a, b = a[ok], b[ok]
    order = np.lexsort((b, a))
    return a[order], b[order]


def snapshot_candidates(constellation: Constellation, t0_s: float, cfg: FeasibilityConfig) -> CandidateEdgeSet:
    """All pairs feasible at ``t0_s``, sorted by endpoint order."""
    cfg.validate()
    pos = positions_at(constellation, t0_s)
    a, b = _candidate_pairs(pos, cfg.d_max_km, constellation.config.earth_radius_km)
    dist = np.linalg.norm(pos[a] - pos[b], axis=1)
    return CandidateEdgeSet(
        n_sats=constellation.n_sats,
        sats_per_plane=constellation.config.sats_per_plane,
        u=a,
        v=b,
        distance_km=dist,
        d_max_km=cfg.d_max_km,
    )


def stable_edge_mask(
    edge_set: CandidateEdgeSet,
    constellation: Constellation,
    t0_s: float,
    d_max_km: float,
    n_samples: int,
) -> np.ndarray:
    """Per edge: feasible at every grid time over ``[t0, t0 + T]``."""
    if edge_set.m == 0:
        return np.zeros(0, dtype=bool)
    times = sample_times(t0_s, orbital_period(constellation.config), n_samples)
    ok = np.ones(edge_set.m, dtype=bool)
    r_e = constellation.config.earth_radius_km
    # chunk over time to bound memory at large N
    for chunk in np.array_split(times, max(1, len(times) // 16)):
        pos = positions_over(constellation, chunk)
        ok &= _feasible_mask(pos[:, edge_set.u], pos[:, edge_set.v], d_max_km, r_e).all(axis=0)
    return ok


def viable_candidates(constellation: Constellation, t0_s: float, cfg: FeasibilityConfig) -> CandidateEdgeSet:
    """Pairs feasible on the whole ``viability_samples`` grid over one period.

    The grid contains ``t0`` itself, so the result is always a subset of the
    snapshot candidates at ``t0``.
    """
    snap = snapshot_candidates(constellation, t0_s, cfg)
    keep = stable_edge_mask(snap, constellation, t0_s, cfg.d_max_km, cfg.viability_samples)
    return snap.subset(np.flatnonzero(keep))


def candidates(constellation: Constellation, t0_s: float, cfg: FeasibilityConfig) -> CandidateEdgeSet:
    """Dispatch on ``cfg.model``."""
    if cfg.model is FeasibilityModel.VIABILITY:
        return viable_candidates(constellation, t0_s, cfg)
    return snapshot_candidates(constellation, t0_s, cfg)


def classify_edges(edge_set: CandidateEdgeSet) -> CandidateEdgeSet:
    """Recompute intra/inter-plane labels from the endpoints' plane indices."""
    spp = edge_set.sats_per_plane
    out = edge_set.subset(np.arange(edge_set.m))
    out.intra = (out.u // spp) == (out.v // spp)
    return out


def stability_fraction(topology, constellation: Constellation, t0_s: float, cfg: FeasibilityConfig) -> float:
    """Fraction of the topology's links feasible over the whole period ``[t0, t0 + T]``."""
    selected = np.fromiter(sorted(topology.selected), dtype=np.int64)
    if len(selected) == 0:
        raise UndefinedMetricError("stability fraction of an empty topology is undefined")
    sub = topology.edge_set.subset(selected)
    stable = stable_edge_mask(sub, constellation, t0_s, cfg.d_max_km, cfg.viability_samples)
    return float(stable.sum()) / len(selected)
