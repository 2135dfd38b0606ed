import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _graphs import (
    cheeger_by_subsets,
    dense_laplacian_loop,
    edge_set,
    floyd_warshall,
    full_topology,
    random_connected_pairs,
    random_pairs,
)
from isltopo.errors import EigenSolverError, OracleRefusal, UndefinedMetricError
from isltopo.graph_core import (
    Topology,
    algebraic_connectivity,
    cheeger_constant_bruteforce,
    degree_histogram,
    eccentricities,
    evaluate_topology,
    hop_distances,
    incidence_matrix,
    laplacian,
    laplacian_dense,
    smallest_eigenpairs,
)


@given(n=st.integers(2, 25), p=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_laplacian_forms_agree(n, p, seed):
    rng = np.random.default_rng(seed)
    pairs = random_pairs(rng, n, p)
    es = edge_set(n, pairs)
    x = rng.random(es.m)
    ref = dense_laplacian_loop(n, pairs, x)
    B = incidence_matrix(es).toarray()
    assert np.all((B != 0).sum(axis=0) == 2)
    np.testing.assert_allclose(B @ np.diag(x) @ B.T, ref, atol=1e-12)
    np.testing.assert_allclose(laplacian(es, x).toarray(), ref, atol=1e-12)
    np.testing.assert_allclose(laplacian_dense(es, x), ref, atol=1e-12)
    np.testing.assert_allclose(ref.sum(axis=1), 0, atol=1e-12)
    assert np.linalg.eigvalsh(ref).min() > -1e-10


def test_incidence_sign_convention():
    B = incidence_matrix(edge_set(3, [(0, 2)])).toarray()
    np.testing.assert_array_equal(B[:, 0], [1, 0, -1])


def test_laplacian_shape_check():
    with pytest.raises(ValueError):
        laplacian(edge_set(3, [(0, 1)]), [1.0, 2.0])


@pytest.mark.parametrize("n", [3, 7, 12])
def test_closed_form_spectra(n):
    path = edge_set(n, [(i, i + 1) for i in range(n - 1)])
    cycle = edge_set(n, [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)])
    complete = edge_set(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    assert algebraic_connectivity(path, np.ones(path.m)) == pytest.approx(2 * (1 - math.cos(math.pi / n)))
    assert algebraic_connectivity(cycle, np.ones(cycle.m)) == pytest.approx(2 * (1 - math.cos(2 * math.pi / n)))
    assert algebraic_connectivity(complete, np.ones(complete.m)) == pytest.approx(n)


def test_disconnected_has_zero_connectivity():
    es = edge_set(4, [(0, 1), (2, 3)])
    assert algebraic_connectivity(es, np.ones(2)) == pytest.approx(0.0, abs=1e-12)
    assert algebraic_connectivity(es, np.zeros(2)) == 0.0


@pytest.mark.parametrize("method", ["dense", "lobpcg", "lanczos"])
@pytest.mark.parametrize("seed", range(4))
def test_eigensolvers_match_numpy(method, seed):
    rng = np.random.default_rng(seed)
    n = 80
    pairs = random_connected_pairs(rng, n, 0.08)
    es = edge_set(n, pairs)
    x = rng.uniform(0.1, 1.0, es.m)
    L = laplacian(es, x)
    q = 6
    res = smallest_eigenpairs(L, q, tol=1e-8, method=method)
    ref = np.linalg.eigvalsh(L.toarray())[:q]
    np.testing.assert_allclose(res.eigenvalues, ref, atol=1e-7)
    np.testing.assert_allclose(res.eigenvectors[:, 0], 1 / math.sqrt(n))
    V = res.eigenvectors
    np.testing.assert_allclose(V.T @ V, np.eye(q), atol=1e-7)
    assert res.residuals.max() <= 1e-8 * max(1.0, np.abs(L.toarray()).sum(axis=1).max())


def test_eigensolver_warm_start_and_edge_cases():
    rng = np.random.default_rng(5)
    es = edge_set(60, random_connected_pairs(rng, 60, 0.1))
    L = laplacian(es, np.ones(es.m))
    first = smallest_eigenpairs(L, 4, method="lobpcg")
    again = smallest_eigenpairs(L, 4, method="lobpcg", x0=first.eigenvectors[:, 1:])
    np.testing.assert_allclose(again.eigenvalues, first.eigenvalues, atol=1e-8)
    assert smallest_eigenpairs(L, 0).eigenvalues.shape == (0,)
    one = smallest_eigenpairs(L, 1)
    np.testing.assert_allclose(one.eigenvalues, [0.0])
    with pytest.raises(ValueError):
        smallest_eigenpairs(L, 61)
    with pytest.raises(ValueError):
        smallest_eigenpairs(L, 3, method="power")


def test_eigensolver_reports_unreachable_tolerance():
    es = edge_set(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    with pytest.raises(EigenSolverError) as err:
        smallest_eigenpairs(laplacian(es, np.ones(4) * 1e3), 3, tol=1e-300)
    assert err.value.best_residual is not None


@given(n=st.integers(1, 30), p=st.floats(0, 0.5), seed=st.integers(0, 2**32 - 1))
def test_metrics_match_floyd_warshall(n, p, seed):
    pairs = random_pairs(np.random.default_rng(seed), n, p)
    es = edge_set(n, pairs)
    topo = full_topology(es)
    d = floyd_warshall(n, pairs)
    np.testing.assert_array_equal(hop_distances(topo), d)
    m = evaluate_topology(topo)
    if np.isinf(d).any():
        assert m.diameter_hops == math.inf and m.avg_max_hops == math.inf and not m.connected
        assert np.all(np.isinf(eccentricities(topo)))
    else:
        assert m.diameter_hops == d.max()
        assert m.avg_max_hops == pytest.approx(d.max(axis=1).mean(), abs=1e-12)
    assert m.n_edges == len(pairs)
    assert sum(m.degree_histogram.values()) == n


def test_evaluate_with_stability_mask():
    es = edge_set(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    topo = Topology(es, frozenset({0, 1, 2}))
    m = evaluate_topology(topo, stable_mask=np.array([True, False, True, True]))
    assert m.stability_fraction == pytest.approx(2 / 3)
    assert m.diameter_hops == 3.0
    assert m.degree_histogram == {1: 2, 2: 2}
    assert (m.min_degree, m.max_degree) == (1, 2)
    with pytest.raises(UndefinedMetricError):
        evaluate_topology(Topology(es, frozenset()), stable_mask=np.ones(4, dtype=bool))


def test_topology_views():
    es = edge_set(4, [(0, 1), (1, 2), (2, 3)])
    topo = Topology.from_indices(es, [2, 0])
    assert topo.pairs() == [(0, 1), (2, 3)]
    np.testing.assert_array_equal(topo.degrees(), [1, 1, 1, 1])
    with pytest.raises(IndexError):
        Topology(es, frozenset({3}))
    assert degree_histogram([4, 4, 3]) == {3: 1, 4: 2}


@given(n=st.integers(2, 9), p=st.floats(0.1, 1.0), seed=st.integers(0, 2**32 - 1))
def test_cheeger_enumeration_matches_itertools(n, p, seed):
    pairs = random_pairs(np.random.default_rng(seed), n, p)
    topo = full_topology(edge_set(n, pairs))
    assert cheeger_constant_bruteforce(topo) == pytest.approx(cheeger_by_subsets(n, pairs))


def test_cheeger_refusals():
    with pytest.raises(OracleRefusal):
        cheeger_constant_bruteforce(full_topology(edge_set(15, [(0, 1)])))
    with pytest.raises(UndefinedMetricError):
        cheeger_constant_bruteforce(full_topology(edge_set(1, [])))
