"""Discrete edge selection from fractional strengths.

Picks the subset of candidate edges with maximum total strength such that no
satellite exceeds the degree budget: a maximum-weight degree-constrained
subgraph (simple b-matching). The default solver is an exact integer
program handed to HiGHS; a greedy + swap heuristic is available for very
large instances.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import InfeasibleError, OracleRefusal
from .feasibility import CandidateEdgeSet
from .graph_core import Topology

BRUTE_FORCE_MAX_M = 22
# Solver-side scaling of the objective; HiGHS gap tolerances are absolute.
_OBJECTIVE_SCALE = 1e6
# Tie-break bonus (scaled units) favouring lower edge indices.
_TIE_BREAK = 1e-4


def objective(x_star, selected) -> float:
    """Exactly rounded total strength of the selected edges."""
    x_star = np.asarray(x_star, dtype=float)
    return math.fsum(x_star[sorted(selected)].tolist())


def _check_inputs(edge_set, x_star, D):
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (edge_set.m,):
        raise ValueError(f"x_star has shape {x_star.shape}, expected ({edge_set.m},)")
    if D < 0:
        raise ValueError("degree budget must be non-negative")
    return x_star


def _fixed_degrees(edge_set, fixed):
    idx = np.fromiter(sorted(fixed), dtype=np.int64, count=len(fixed))
    return np.bincount(np.concatenate([edge_set.u[idx], edge_set.v[idx]]), minlength=edge_set.n_sats)


def _solve_milp(edge_set, x_star, free, capacity):
    m_free = len(free)
    u, v = edge_set.u[free], edge_set.v[free]
    rows = np.concatenate([u, v])
    cols = np.concatenate([np.arange(m_free), np.arange(m_free)])
    A = sp.csr_matrix((np.ones(2 * m_free), (rows, cols)), shape=(edge_set.n_sats, m_free))
    scale = _OBJECTIVE_SCALE / max(float(x_star[free].max()), 1e-300)
    bonus = _TIE_BREAK * (edge_set.m - free) / max(edge_set.m, 1)
    c = -(x_star[free] * scale + bonus)
    res = milp(
        c,
        constraints=LinearConstraint(A, -np.inf, capacity.astype(float)),
        integrality=np.ones(m_free),
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 0.0, "presolve": True},
    )
    if res.x is None:
        raise InfeasibleError(f"integer program failed: {res.message}")
    return free[np.round(res.x) > 0.5]


def _solve_greedy(edge_set, x_star, free, capacity, max_passes=20):
    cap = capacity.astype(np.int64).copy()
    order = free[np.lexsort((free, -x_star[free]))]
    chosen = set()
    for k in order.tolist():
        a, b = int(edge_set.u[k]), int(edge_set.v[k])
        if cap[a] > 0 and cap[b] > 0:
            chosen.add(k)
            cap[a] -= 1
            cap[b] -= 1
    incident = edge_set.incident
    free_set = set(free.tolist())

    def lightest(node):
        best = None
        for e in incident[node].tolist():
            if e in chosen and (best is None or x_star[e] < x_star[best]):
                best = e
        return best

    # swap in an unselected edge when dropping the lightest blockers gains weight
    for _ in range(max_passes):
        improved = False
        for k in order.tolist():
            if k in chosen or k not in free_set:
                continue
            a, b = int(edge_set.u[k]), int(edge_set.v[k])
            drop = set()
            for node in (a, b):
                if cap[node] == 0:
                    e = lightest(node)
                    if e is None:
                        break
                    drop.add(e)
            else:
                loss = sum(x_star[e] for e in drop)
                if x_star[k] > loss + 1e-15:
                    for e in drop:
                        chosen.discard(e)
                        cap[edge_set.u[e]] += 1
                        cap[edge_set.v[e]] += 1
                    if cap[a] > 0 and cap[b] > 0:
                        chosen.add(k)
                        cap[a] -= 1
                        cap[b] -= 1
                        improved = True
                    else:
                        for e in drop:
                            chosen.add(e)
                            cap[edge_set.u[e]] -= 1
                            cap[edge_set.v[e]] -= 1
        if not improved:
            break
    return np.fromiter(sorted(chosen), dtype=np.int64, count=len(chosen))


def round_topology(
    edge_set: CandidateEdgeSet,
    x_star,
    D: int,
    fixed_edges=None,
    method: str = "milp",
) -> Topology:
    """Maximum total strength subset of ``F`` with every degree at most ``D``.

    ``fixed_edges`` are always selected and count against the budget. Edges
    with zero strength are never added. Among optimal selections, lower edge
    indices are preferred through a vanishing objective bonus. ``method`` is
    ``"milp"`` (exact) or ``"greedy"`` (greedy fill plus improving swaps).
    """
    x_star = _check_inputs(edge_set, x_star, D)
    fixed = frozenset(int(k) for k in (fixed_edges or ()))
    fixed_deg = _fixed_degrees(edge_set, fixed)
    if np.any(fixed_deg > D):
        bad = np.flatnonzero(fixed_deg > D)
        raise InfeasibleError(
            f"fixed edges exceed the degree budget {D} at {len(bad)} satellites, e.g. node {int(bad[0])}"
        )
    capacity = D - fixed_deg
    is_fixed = np.zeros(edge_set.m, dtype=bool)
    is_fixed[list(fixed)] = True
    free = np.flatnonzero((x_star > 0) & ~is_fixed)
    # drop edges touching a saturated endpoint up front
    free = free[(capacity[edge_set.u[free]] > 0) & (capacity[edge_set.v[free]] > 0)]
    if len(free) == 0:
        chosen = np.zeros(0, dtype=np.int64)
    elif method == "milp":
        chosen = _solve_milp(edge_set, x_star, free, capacity)
    elif method == "greedy":
        chosen = _solve_greedy(edge_set, x_star, free, capacity)
    else:
        raise ValueError(f"unknown rounding method {method!r}")
    topo = Topology(edge_set, fixed | frozenset(chosen.tolist()))
    ok, report = verify_degree_feasible(topo, D)
    if not ok:
        raise InfeasibleError(f"rounding produced degree violations: {report}")
    return topo


def brute_force_round(edge_set: CandidateEdgeSet, x_star, D: int) -> Topology:
    """Exhaustive optimum over all ``2^M`` subsets (test oracle).

    Ties on the exactly rounded objective go to the lexicographically
    smallest sorted index tuple.
    """
    x_star = _check_inputs(edge_set, x_star, D)
    m = edge_set.m
    if m > BRUTE_FORCE_MAX_M:
        raise OracleRefusal(f"brute-force rounding refused for M={m} > {BRUTE_FORCE_MAX_M}")
    n = edge_set.n_sats
    inc = np.zeros((m, n), dtype=np.int64)
    inc[np.arange(m), edge_set.u] = 1
    inc[np.arange(m), edge_set.v] = 1

    best_val = -math.inf
    best_sel: tuple = ()
    chunk = 1 << 16
    for start in range(0, 1 << m, chunk):
        masks = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(np.int64)
        ok = (bits @ inc <= D).all(axis=1)
        bits = bits[ok]
        if len(bits) == 0:
            continue
        vals = bits @ x_star
        top = vals.max()
        if top < best_val - 1e-9:
            continue
        for row in bits[vals >= top - 1e-9]:
            sel = tuple(np.flatnonzero(row).tolist())
            val = objective(x_star, sel)
            if val > best_val or (val == best_val and sel < best_sel):
                best_val, best_sel = val, sel
    return Topology(edge_set, frozenset(best_sel))


def verify_degree_feasible(topology: Topology, D: int) -> tuple[bool, dict]:
    """``(ok, violators)`` where violators maps satellite index to its degree."""
    deg = topology.degrees()
    bad = np.flatnonzero(deg > D)
    return len(bad) == 0, {int(i): int(deg[i]) for i in bad}
