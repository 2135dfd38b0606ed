"""Penalised projected gradient ascent on the algebraic connectivity.

Maximises ``J(x; rho) = lambda_2(L(x)) - rho * Phi(x)`` over the unit box,
where ``Phi`` is the squared hinge on per-node strength above the degree
budget. The ascent direction averages ``(v_i - v_j)^2`` over every eigenvector
whose eigenvalue sits within ``eps`` of ``lambda_2``, so it is well defined
when ``lambda_2`` is repeated. ``rho`` ramps quadratically, the step decays
as ``eta0 / (1 + alpha t)`` and a heavy-ball momentum term accumulates steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, EigenSolverError
from .feasibility import CandidateEdgeSet
from .graph_core import EigenResult, Topology, laplacian, laplacian_dense, smallest_eigenpairs, DENSE_MAX_N


@dataclass(frozen=True)
class PgaConfig:
    t_max: int = 20_000
    rho_min: float = 0.001
    rho_max: float = 30.0
    eta0: float = 2.0
    alpha: float = 0.002
    momentum: float = 0.8
    cluster_rel: float = 0.05
    cluster_abs: float = 1e-4
    degree_budget: int = 4
    trace_stride: int = 100
    q_min: int = 6
    eig_tol: float = 1e-8
    eig_method: str = "auto"
    plateau_stop: bool = False
    plateau_window: int = 500
    plateau_tol: float = 1e-9
    warm_background: float = 0.0

    def validate(self) -> None:
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ConfigurationError("t_max", "must be an integer >= 1")
        if not 0 <= self.rho_min <= self.rho_max:
            raise ConfigurationError("rho_min", "need 0 <= rho_min <= rho_max")
        if not self.eta0 > 0:
            raise ConfigurationError("eta0", "must be > 0")
        if not self.alpha >= 0:
            raise ConfigurationError("alpha", "must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("momentum", "must lie in [0, 1)")
        if int(self.degree_budget) != self.degree_budget or self.degree_budget < 1:
            raise ConfigurationError("degree_budget", "must be an integer >= 1")
        if self.trace_stride < 1:
            raise ConfigurationError("trace_stride", "must be >= 1")
        if self.q_min < 2:
            raise ConfigurationError("q_min", "must be >= 2")
        if not 0 <= self.warm_background <= 1:
            raise ConfigurationError("warm_background", "must lie in [0, 1]")


@dataclass
class PgaState:
    x: np.ndarray
    m: np.ndarray
    t: int = 0
    # diagnostics evaluated at the x the last step started from
    lambda2: float = math.nan
    penalty: float = math.nan
    cluster_size: int = 0

    @classmethod
    def initial(cls, x0) -> "PgaState":
        x0 = np.array(x0, dtype=float)
        return cls(x=x0, m=np.zeros_like(x0), t=0)


@dataclass
class PgaTrace:
    t: list = field(default_factory=list)
    lambda2: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    eta: list = field(default_factory=list)

    COLUMNS = ("t", "lambda2", "penalty", "objective", "max_violation", "rho", "eta")

    def record(self, t, lambda2, penalty, rho, eta, max_violation):
        self.t.append(int(t))
        self.lambda2.append(float(lambda2))
        self.penalty.append(float(penalty))
        self.objective.append(float(lambda2 - rho * penalty))
        self.max_violation.append(float(max_violation))
        self.rho.append(float(rho))
        self.eta.append(float(eta))

    def __len__(self):
        return len(self.t)

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))


def node_strengths(edge_set: CandidateEdgeSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = edge_set.n_sats
    return np.bincount(edge_set.u, x, n) + np.bincount(edge_set.v, x, n)


def penalty(edge_set: CandidateEdgeSet, x, D: float) -> float:
    excess = np.maximum(0.0, node_strengths(edge_set, x) - D)
    return float(excess @ excess)


def penalty_gradient(edge_set: CandidateEdgeSet, x, D: float) -> np.ndarray:
    excess = np.maximum(0.0, node_strengths(edge_set, x) - D)
    return 2.0 * excess[edge_set.u] + 2.0 * excess[edge_set.v]


def cluster_epsilon(lambda2: float, cluster_rel: float = 0.05, cluster_abs: float = 1e-4) -> float:
    return cluster_rel * abs(lambda2) + cluster_abs


def active_cluster(eigenvalues, epsilon: float) -> np.ndarray:
    """0-based positions ``k >= 1`` with ``|lambda_k - lambda_2| < epsilon``.

    Position 0 is the trivial eigenvalue; position 1 (``lambda_2``) is always
    included.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if len(lam) < 2:
        raise ValueError("need at least two eigenvalues")
    k = np.flatnonzero(np.abs(lam[1:] - lam[1]) < epsilon) + 1
    if len(k) == 0 or k[0] != 1:
        k = np.concatenate([[1], k])
    return k


def spectral_subgradient(edge_set: CandidateEdgeSet, eigen_result: EigenResult, K) -> np.ndarray:
    """Cluster-averaged ``(v_i - v_j)^2`` for every candidate edge."""
    K = np.asarray(K, dtype=np.int64)
    vecs = eigen_result.eigenvectors
    if len(K) == 0 or K.max() >= vecs.shape[1]:
        raise IndexError("eigen result lacks eigenvectors for the requested cluster")
    V = vecs[:, K]
    diff = V[edge_set.u] - V[edge_set.v]
    return (diff * diff).sum(axis=1) / len(K)


def rho_at(t: float, cfg: PgaConfig) -> float:
    return cfg.rho_min + (cfg.rho_max - cfg.rho_min) * (t / cfg.t_max) ** 2


def eta_at(t: float, cfg: PgaConfig) -> float:
    return cfg.eta0 / (1.0 + cfg.alpha * t)


def project_unit_box(x) -> np.ndarray:
    return np.minimum(1.0, np.maximum(0.0, np.asarray(x, dtype=float)))


class _Workspace:
    """Per-run scratch: solver choice, warm-start vectors, current block size."""

    def __init__(self, edge_set: CandidateEdgeSet, cfg: PgaConfig):
        self.n = edge_set.n_sats
        self.q = min(self.n, cfg.q_min)
        method = cfg.eig_method
        if method == "auto":
            method = "dense" if self.n <= DENSE_MAX_N else "lobpcg"
        self.method = method
        self.prev_vectors = None

    def laplacian(self, edge_set, x):
        if self.method == "dense":
            return laplacian_dense(edge_set, x)
        return laplacian(edge_set, x)

    def eigen(self, edge_set, x, cfg):
        """Eigenpairs covering the whole lambda_2 cluster, growing q as needed."""
        L = self.laplacian(edge_set, x)
        while True:
            res = smallest_eigenpairs(
                L, self.q, tol=cfg.eig_tol, method=self.method, x0=self.prev_vectors
            )
            lam = res.eigenvalues
            eps = cluster_epsilon(lam[1], cfg.cluster_rel, cfg.cluster_abs)
            K = active_cluster(lam, eps)
            if self.q < self.n and lam[-1] - lam[1] < eps:
                self.q = min(self.n, 2 * self.q)
                self.prev_vectors = None
                continue
            break
        self.prev_vectors = res.eigenvectors[:, 1:]
        # keep headroom of two eigenpairs past the cluster
        target = min(self.n, max(cfg.q_min, len(K) + 3))
        if target != self.q:
            self.q = target
            self.prev_vectors = None
        return res, K


def _apply_masks(x, m, g, fixed_mask, zero_mask):
    if fixed_mask is not None:
        g[fixed_mask] = 0.0
        m[fixed_mask] = 0.0
        x[fixed_mask] = 1.0
    if zero_mask is not None:
        g[zero_mask] = 0.0
        m[zero_mask] = 0.0
        x[zero_mask] = 0.0


def pga_step(
    state: PgaState,
    edge_set: CandidateEdgeSet,
    cfg: PgaConfig,
    fixed_mask=None,
    zero_mask=None,
    workspace: _Workspace | None = None,
) -> PgaState:
    """One heavy-ball projected step from ``state``; returns the next state.

    Entries under ``fixed_mask`` stay at 1 (and ``zero_mask`` at 0) with
    zero gradient and momentum.
    """
    ws = workspace or _Workspace(edge_set, cfg)
    t = state.t
    D = cfg.degree_budget
    x = np.array(state.x, dtype=float)
    m = np.array(state.m, dtype=float)
    res, K = ws.eigen(edge_set, x, cfg)
    g = spectral_subgradient(edge_set, res, K) - rho_at(t, cfg) * penalty_gradient(edge_set, x, D)
    if fixed_mask is not None or zero_mask is not None:
        _apply_masks(x, m, g, fixed_mask, zero_mask)
    m = cfg.momentum * m + eta_at(t, cfg) * g
    x_new = project_unit_box(x + m)
    if fixed_mask is not None or zero_mask is not None:
        _apply_masks(x_new, m, np.zeros_like(g), fixed_mask, zero_mask)
    return PgaState(
        x=x_new,
        m=m,
        t=t + 1,
        lambda2=float(res.eigenvalues[1]),
        penalty=penalty(edge_set, x, D),
        cluster_size=len(K),
    )


def _max_violation(edge_set, x, D):
    if edge_set.n_sats == 0:
        return 0.0
    return max(0.0, float((node_strengths(edge_set, x) - D).max()))


def run_pga(
    edge_set: CandidateEdgeSet,
    cfg: PgaConfig,
    x0,
    fixed_mask=None,
    zero_mask=None,
) -> tuple[np.ndarray, PgaTrace]:
    """Run ``cfg.t_max`` steps from ``x0`` and return ``(x_final, trace)``.

    The trace samples iterations ``0, stride, 2*stride, ...`` up to ``t_max``.
    An :class:`EigenSolverError` raised mid-run carries the partial trace in
    its ``trace`` attribute.
    """
    cfg.validate()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (edge_set.m,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({edge_set.m},)")
    if np.any(x0 < 0) or np.any(x0 > 1):
        raise ValueError("x0 must lie in the unit box")
    fixed_mask = None if fixed_mask is None else np.asarray(fixed_mask, dtype=bool)
    zero_mask = None if zero_mask is None else np.asarray(zero_mask, dtype=bool)

    trace = PgaTrace()
    D = cfg.degree_budget
    state = PgaState.initial(x0)
    if fixed_mask is not None:
        state.x[fixed_mask] = 1.0
    if zero_mask is not None:
        state.x[zero_mask] = 0.0
    if edge_set.n_sats < 2 or edge_set.m == 0:
        trace.record(0, 0.0, penalty(edge_set, state.x, D), rho_at(0, cfg), eta_at(0, cfg), 0.0)
        return state.x, trace

    ws = _Workspace(edge_set, cfg)
    history = []
    while state.t < cfg.t_max:
        t = state.t
        x_before = state.x
        try:
            state = pga_step(state, edge_set, cfg, fixed_mask, zero_mask, workspace=ws)
        except EigenSolverError as exc:
            exc.trace = trace
            raise
        rho = rho_at(t, cfg)
        if t % cfg.trace_stride == 0:
            trace.record(t, state.lambda2, state.penalty, rho, eta_at(t, cfg), _max_violation(edge_set, x_before, D))
        if cfg.plateau_stop:
            history.append(state.lambda2 - rho * state.penalty)
            w = cfg.plateau_window
            if len(history) > w and abs(history[-1] - history[-1 - w]) < cfg.plateau_tol:
                break
    if state.t == cfg.t_max and cfg.t_max % cfg.trace_stride == 0:
        res, _ = ws.eigen(edge_set, state.x, cfg)
        t = state.t
        trace.record(
            t, res.eigenvalues[1], penalty(edge_set, state.x, D), rho_at(t, cfg), eta_at(t, cfg),
            _max_violation(edge_set, state.x, D),
        )
    return state.x, trace


def warm_start(topology: Topology, edge_set: CandidateEdgeSet, background: float = 0.0) -> np.ndarray:
    """Strength vector with 1 on the topology's edges and ``background`` elsewhere."""
    if topology.edge_set is not edge_set and topology.edge_set.m != edge_set.m:
        raise ValueError("topology does not index into this edge set")
    x0 = np.full(edge_set.m, float(background))
    x0[topology.indices()] = 1.0
    return x0


@dataclass(frozen=True)
class FixedIntraplane:
    """Pinned intra-plane ring links and the per-satellite inter-plane budget."""

    mask: np.ndarray
    excluded: np.ndarray
    d_inter: int

    @property
    def fixed_edges(self) -> frozenset:
        return frozenset(np.flatnonzero(self.mask).tolist())


def fixed_intraplane_mask(edge_set: CandidateEdgeSet, D: int) -> FixedIntraplane:
    """Pin every satellite's two in-plane ring neighbours to strength 1.

    Ring links join in-plane indices ``s`` and ``s +/- 1 (mod N_s)``. Other
    intra-plane candidates (longer in-plane chords) are excluded from the
    decision variables. The remaining inter-plane budget is ``D - 2``.
    """
    spp = edge_set.sats_per_plane
    if spp < 3:
        raise ConfigurationError("fixed_intraplane", f"rings need at least 3 satellites per plane, got {spp}")
    if D < 2:
        raise ConfigurationError("degree_budget", "fixed intra-plane links need D >= 2")
    su = edge_set.u % spp
    sv = edge_set.v % spp
    gap = (sv - su) % spp
    ring = edge_set.intra & ((gap == 1) | (gap == spp - 1))
    ring_deg = np.bincount(edge_set.u[ring], minlength=edge_set.n_sats) + np.bincount(
        edge_set.v[ring], minlength=edge_set.n_sats
    )
    lacking = np.flatnonzero(ring_deg != 2)
    if len(lacking):
        sat = edge_set.sat_id(lacking[0])
        raise ConfigurationError(
            "fixed_intraplane",
            f"satellite {sat} has {int(ring_deg[lacking[0]])} feasible ring links, need 2 "
            f"({len(lacking)} satellites affected)",
        )
    excluded = edge_set.intra & ~ring
    return FixedIntraplane(mask=ring, excluded=excluded, d_inter=D - 2)
