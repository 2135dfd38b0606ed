import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _graphs import edge_set, random_pairs
from isltopo.errors import InfeasibleError, OracleRefusal
from isltopo.graph_core import Topology
from isltopo.rounding import (
    BRUTE_FORCE_MAX_M,
    brute_force_round,
    objective,
    round_topology,
    verify_degree_feasible,
)


def exhaustive_best(es, x, D):
    """Independent itertools enumeration of the optimal objective."""
    best = -math.inf
    for r in range(es.m + 1):
        for sel in itertools.combinations(range(es.m), r):
            deg = np.zeros(es.n_sats, dtype=int)
            for k in sel:
                deg[es.u[k]] += 1
                deg[es.v[k]] += 1
            if deg.max(initial=0) <= D:
                best = max(best, math.fsum(x[list(sel)]))
    return best


def instance(seed, max_m=12):
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(3, 9))
        pairs = random_pairs(rng, n, rng.uniform(0.3, 0.9))
        if 1 <= len(pairs) <= max_m:
            break
    x = rng.random(len(pairs))
    x[rng.random(len(pairs)) < 0.2] = 0.0
    return edge_set(n, pairs), x, int(rng.integers(1, 4))


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_milp_and_oracle_agree_with_enumeration(seed):
    es, x, D = instance(seed)
    best = exhaustive_best(es, x, D)
    bf = brute_force_round(es, x, D)
    milp = round_topology(es, x, D)
    assert objective(x, bf.selected) == best
    assert objective(x, milp.selected) == best
    assert verify_degree_feasible(milp, D)[0]


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_greedy_is_feasible_and_bounded(seed):
    es, x, D = instance(seed)
    greedy = round_topology(es, x, D, method="greedy")
    assert verify_degree_feasible(greedy, D)[0]
    assert objective(x, greedy.selected) <= objective(x, round_topology(es, x, D).selected) + 1e-12
    assert all(x[k] > 0 for k in greedy.selected)


def test_zero_strength_never_selected():
    es = edge_set(4, [(0, 1), (1, 2), (2, 3)])
    topo = round_topology(es, np.array([0.5, 0.0, 0.5]), 4)
    assert topo.selected == frozenset({0, 2})


def test_budget_binds():
    # star with four leaves, D = 2: keep the two strongest spokes
    es = edge_set(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    topo = round_topology(es, np.array([0.1, 0.9, 0.5, 0.8]), 2)
    assert topo.selected == frozenset({1, 3})


def test_fixed_edges():
    es = edge_set(4, [(0, 1), (0, 2), (0, 3), (1, 2)])
    x = np.array([0.0, 0.9, 0.8, 0.7])
    topo = round_topology(es, x, 2, fixed_edges={0})
    assert 0 in topo.selected
    assert topo.selected == frozenset({0, 1, 3})
    with pytest.raises(InfeasibleError):
        round_topology(es, x, 1, fixed_edges={0, 1})


def test_tie_break_is_deterministic():
    es = edge_set(4, list(itertools.combinations(range(4), 2)))
    x = np.ones(6)
    a = round_topology(es, x, 1)
    b = round_topology(es, x, 1)
    assert a.selected == b.selected and len(a.selected) == 2
    assert brute_force_round(es, x, 1).selected == frozenset({0, 5})


def test_input_checks_and_refusal():
    es = edge_set(3, [(0, 1)])
    with pytest.raises(ValueError):
        round_topology(es, np.ones(2), 1)
    with pytest.raises(ValueError):
        round_topology(es, np.ones(1), -1)
    with pytest.raises(ValueError):
        round_topology(es, np.ones(1), 1, method="lp")
    big = edge_set(8, list(itertools.combinations(range(8), 2)))
    assert big.m > BRUTE_FORCE_MAX_M
    with pytest.raises(OracleRefusal):
        brute_force_round(big, np.ones(big.m), 2)


def test_verify_degree_report():
    es = edge_set(3, [(0, 1), (0, 2), (1, 2)])
    ok, bad = verify_degree_feasible(Topology(es, frozenset({0, 1, 2})), 1)
    assert not ok and bad == {0: 2, 1: 2, 2: 2}
    assert verify_degree_feasible(Topology(es, frozenset({0})), 1) == (True, {})
