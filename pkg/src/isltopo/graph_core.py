"""Incidence/Laplacian algebra, low-end eigenpairs and hop-count metrics.

Edge strengths ``x`` are aligned with a :class:`CandidateEdgeSet`; the
weighted Laplacian is ``L(x) = B diag(x) B^T`` with ``B`` the signed
incidence matrix (``+1`` at the lower endpoint, ``-1`` at the upper).
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import EigenSolverError, OracleRefusal, UndefinedMetricError
from .feasibility import CandidateEdgeSet

DENSE_MAX_N = 1000
CHEEGER_MAX_N = 14


@dataclass(frozen=True)
class Topology:
    """A selected subset of candidate edges (by index)."""

    edge_set: CandidateEdgeSet
    selected: frozenset

    def __post_init__(self):
        sel = frozenset(int(k) for k in self.selected)
        if sel and (min(sel) < 0 or max(sel) >= self.edge_set.m):
            raise IndexError("selected edge index outside the candidate set")
        object.__setattr__(self, "selected", sel)

    @classmethod
    def from_indices(cls, edge_set, indices):
        return cls(edge_set, frozenset(indices))

    @property
    def n_sats(self) -> int:
        return self.edge_set.n_sats

    @property
    def n_edges(self) -> int:
        return len(self.selected)

    def indices(self) -> np.ndarray:
        return np.fromiter(sorted(self.selected), dtype=np.int64, count=len(self.selected))

    def pairs(self) -> list[tuple[int, int]]:
        idx = self.indices()
        return list(zip(self.edge_set.u[idx].tolist(), self.edge_set.v[idx].tolist()))

    def degrees(self) -> np.ndarray:
        idx = self.indices()
        ends = np.concatenate([self.edge_set.u[idx], self.edge_set.v[idx]])
        return np.bincount(ends, minlength=self.n_sats)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` of the symmetric adjacency, neighbours sorted."""
        return csr_adjacency(self.n_sats, self.edge_set.u, self.edge_set.v, self.indices())


def csr_adjacency(n, u, v, idx=None):
    if idx is not None:
        u, v = u[idx], v[idx]
    src = np.concatenate([u, v]).astype(np.int64)
    dst = np.concatenate([v, u]).astype(np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(dst)


@dataclass(frozen=True)
class TopologyMetrics:
    diameter_hops: float
    avg_max_hops: float
    n_edges: int
    degree_histogram: dict = field(default_factory=dict)
    stability_fraction: float | None = None

    @property
    def connected(self) -> bool:
        return math.isfinite(self.diameter_hops)

    @property
    def min_degree(self) -> int:
        return min(self.degree_histogram) if self.degree_histogram else 0

    @property
    def max_degree(self) -> int:
        return max(self.degree_histogram) if self.degree_histogram else 0


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray


def incidence_matrix(edge_set: CandidateEdgeSet) -> sp.csc_matrix:
    """Signed ``N x M`` incidence: column ``k`` is ``e_u - e_v``."""
    m = edge_set.m
    rows = np.concatenate([edge_set.u, edge_set.v])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    vals = np.concatenate([np.ones(m), -np.ones(m)])
    return sp.csc_matrix((vals, (rows, cols)), shape=(edge_set.n_sats, m))


def laplacian(edge_set: CandidateEdgeSet, x) -> sp.csr_matrix:
    x = np.asarray(x, dtype=float)
    if x.shape != (edge_set.m,):
        raise ValueError(f"strength vector has shape {x.shape}, expected ({edge_set.m},)")
    B = incidence_matrix(edge_set)
    return (B @ sp.diags(x) @ B.T).tocsr()


def laplacian_dense(edge_set: CandidateEdgeSet, x) -> np.ndarray:
    """Dense ``L(x)`` assembled entrywise; cheaper than the sparse product for small N."""
    x = np.asarray(x, dtype=float)
    n = edge_set.n_sats
    L = np.zeros((n, n))
    L[edge_set.u, edge_set.v] = -x
    L[edge_set.v, edge_set.u] = -x
    L[np.diag_indices(n)] = np.bincount(edge_set.u, x, n) + np.bincount(edge_set.v, x, n)
    return L


def _inf_norm(L) -> float:
    if sp.issparse(L):
        return float(abs(L).sum(axis=1).max()) if L.shape[0] else 0.0
    return float(np.abs(L).sum(axis=1).max()) if L.shape[0] else 0.0


def _residuals(L, vals, vecs) -> np.ndarray:
    R = L @ vecs - vecs * vals[None, :]
    return np.linalg.norm(R, axis=0)


def _dense_nontrivial(L, r):
    Ld = L.toarray() if sp.issparse(L) else np.array(L, dtype=float)
    n = Ld.shape[0]
    # Shift the all-ones direction above the spectrum (Gershgorin: lambda_max <= 2 max L_ii).
    shift = 2.0 * float(np.max(np.diag(Ld), initial=0.0)) + 1.0
    A = Ld + shift / n
    vals, vecs = scipy.linalg.eigh(
        A, subset_by_index=[0, r - 1], driver="evr", overwrite_a=True, check_finite=False
    )
    return vals, vecs


def _lobpcg_nontrivial(L, r, tol, x0, rng, maxiter):
    n = L.shape[0]
    ones = np.full((n, 1), 1.0 / math.sqrt(n))
    if x0 is not None and x0.shape == (n, r):
        X = np.array(x0, dtype=float)
    else:
        X = rng.standard_normal((n, r))
        if x0 is not None:
            k = min(r, x0.shape[1])
            X[:, :k] = x0[:, :k]
    X -= ones @ (ones.T @ X)
    Ls = sp.csr_matrix(L)
    # lobpcg's tolerance is absolute; the caller's residual check is the real gate
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Exited", category=UserWarning)
        vals, vecs = spla.lobpcg(Ls, X, Y=ones, tol=tol, maxiter=maxiter, largest=False)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _lanczos_nontrivial(L, r, tol, x0, rng, maxiter):
    n = L.shape[0]
    Ls = sp.csr_matrix(L)
    shift = 2.0 * float(Ls.diagonal().max(initial=0.0)) + 1.0

    def matvec(v):
        v = np.asarray(v).reshape(-1)
        return Ls @ v + shift * v.mean()

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = x0.sum(axis=1) if x0 is not None else rng.standard_normal(n)
    vals, vecs = spla.eigsh(op, k=r, which="SA", v0=v0, tol=tol * 1e-2, maxiter=maxiter)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def smallest_eigenpairs(
    L,
    q: int,
    tol: float = 1e-8,
    method: str = "auto",
    x0: np.ndarray | None = None,
    seed: int = 0,
    maxiter: int = 2000,
) -> EigenResult:
    """The ``q`` smallest eigenpairs of a graph Laplacian, ascending.

    The trivial pair ``(0, 1/sqrt(N))`` is deflated: the solver works on the
    orthogonal complement of the all-ones vector and the trivial pair is
    prepended to its output. ``method`` is ``"dense"``, ``"lobpcg"``,
    ``"lanczos"`` or ``"auto"`` (dense up to ``DENSE_MAX_N`` nodes). ``x0``
    warm-starts the iterative methods with previous nontrivial eigenvectors.

    Raises :class:`EigenSolverError` when any residual exceeds
    ``tol * max(1, ||L||_inf)``.
    """
    n = L.shape[0]
    if not 0 <= q <= n:
        raise ValueError(f"q must lie in [0, {n}], got {q}")
    if q == 0:
        return EigenResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0))
    trivial = np.full((n, 1), 1.0 / math.sqrt(n))
    r = q - 1
    if r == 0:
        vals, vecs = np.zeros(0), np.zeros((n, 0))
    else:
        if method == "auto":
            method = "dense" if n <= DENSE_MAX_N else "lobpcg"
        if method in ("lobpcg", "lanczos") and n < 5 * (r + 1):
            method = "dense"
        rng = np.random.default_rng(seed)
        try:
            if method == "dense":
                vals, vecs = _dense_nontrivial(L, r)
            elif method == "lobpcg":
                vals, vecs = _lobpcg_nontrivial(L, r, tol, x0, rng, maxiter)
            elif method == "lanczos":
                vals, vecs = _lanczos_nontrivial(L, r, tol, x0, rng, maxiter)
            else:
                raise ValueError(f"unknown eigensolver method {method!r}")
        except (spla.ArpackNoConvergence, np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise EigenSolverError(f"{method} eigensolver failed: {exc}") from exc
        # Re-orthogonalise against the trivial direction and renormalise.
        vecs = vecs - trivial @ (trivial.T @ vecs)
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)

    values = np.concatenate([[0.0], vals])
    vectors = np.hstack([trivial, vecs])
    residuals = _residuals(L, values, vectors)
    bound = tol * max(1.0, _inf_norm(L))
    worst = float(residuals.max())
    if not worst <= bound:
        raise EigenSolverError(
            f"eigensolver residual above tolerance {bound:.3e}", best_residual=worst
        )
    return EigenResult(values, vectors, residuals)


def algebraic_connectivity(edge_set: CandidateEdgeSet, x, tol: float = 1e-8, method: str = "auto") -> float:
    """``lambda_2`` of ``L(x)``; zero for disconnected support."""
    if edge_set.n_sats < 2:
        return 0.0
    res = smallest_eigenpairs(laplacian(edge_set, x), 2, tol=tol, method=method)
    return max(0.0, float(res.eigenvalues[1]))


def eccentricities(topology: Topology) -> np.ndarray:
    """Per-node maximum hop distance; ``inf`` where some node is unreachable."""
    n = topology.n_sats
    indptr, indices = topology.csr()
    ecc = kernels.eccentricities(indptr, indices, n)
    out = ecc.astype(float)
    out[ecc < 0] = math.inf
    return out


def hop_distances(topology: Topology) -> np.ndarray:
    """All-pairs hop counts as floats, ``inf`` for unreachable pairs."""
    n = topology.n_sats
    indptr, indices = topology.csr()
    d = kernels.all_pairs_hops(indptr, indices, n).astype(float)
    d[d < 0] = math.inf
    return d


def degree_histogram(degrees) -> dict:
    return dict(sorted(Counter(int(d) for d in degrees).items()))


def evaluate_topology(
    topology: Topology,
    stability_inputs=None,
    stable_mask: np.ndarray | None = None,
) -> TopologyMetrics:
    """Diameter, mean eccentricity, edge count, degree histogram and optional stability.

    ``stability_inputs`` is a ``(constellation, t0_s, feasibility_cfg)``
    triple; alternatively ``stable_mask`` gives precomputed per-candidate
    stability flags. Disconnected topologies get ``inf`` hop metrics.
    """
    ecc = eccentricities(topology)
    if len(ecc) == 0:
        diameter, avg = 0.0, 0.0
    elif np.isinf(ecc).any():
        diameter, avg = math.inf, math.inf
    else:
        diameter = float(ecc.max())
        avg = float(ecc.sum() / len(ecc))
    sigma = None
    if stable_mask is not None:
        if topology.n_edges == 0:
            raise UndefinedMetricError("stability fraction of an empty topology is undefined")
        sigma = float(stable_mask[topology.indices()].sum()) / topology.n_edges
    elif stability_inputs is not None:
        from .feasibility import stability_fraction

        constellation, t0_s, cfg = stability_inputs
        sigma = stability_fraction(topology, constellation, t0_s, cfg)
    return TopologyMetrics(
        diameter_hops=diameter,
        avg_max_hops=avg,
        n_edges=topology.n_edges,
        degree_histogram=degree_histogram(topology.degrees()),
        stability_fraction=sigma,
    )


def cheeger_constant_bruteforce(topology: Topology) -> float:
    """``min cut(S)/|S|`` over nonempty ``S`` with ``|S| <= N/2`` (test oracle)."""
    n = topology.n_sats
    if n > CHEEGER_MAX_N:
        raise OracleRefusal(f"Cheeger enumeration refused for N={n} > {CHEEGER_MAX_N}")
    if n < 2:
        raise UndefinedMetricError("Cheeger constant needs at least two vertices")
    masks = np.arange(1, 1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    size = bits.sum(axis=1)
    keep = size <= n / 2
    bits, size = bits[keep], size[keep]
    pairs = np.array(topology.pairs(), dtype=np.int64).reshape(-1, 2)
    cut = (bits[:, pairs[:, 0]] != bits[:, pairs[:, 1]]).sum(axis=1)
    return float((cut / size).min())
