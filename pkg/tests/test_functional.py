"""Local degree statistics and their identities."""

import numpy as np
import pytest

from geomtest import (
    DirectedGeometricGraph,
    GraphKind,
    InvalidParameterError,
    PointCloud,
    edge_count,
    emst,
    knn_graph,
    local_stats,
)
from geomtest.functional import all_local_stats


def graph_from_edges(n, pairs):
    src = np.array([a for a, _ in pairs], dtype=np.int64)
    dst = np.array([b for _, b in pairs], dtype=np.int64)
    return DirectedGeometricGraph(n, src, dst, np.zeros(len(pairs)), "knn(1)")


def test_pure_out_star():
    g = graph_from_edges(4, [(0, 1), (0, 2), (0, 3)])
    s = local_stats(g, 0)
    assert (s.out_deg, s.in_deg, s.recip) == (3, 0, 0)
    assert (s.t2_up, s.t2_down, s.t2_mixed) == (3, 0, 0)


def test_knn_vertex_two_star_count():
    """Out-degree K forces t2_up = K(K-1)/2 at every vertex."""
    g = knn_graph(PointCloud(np.random.default_rng(0).random((40, 2))), 4)
    for v in (0, 17, 39):
        s = local_stats(g, v)
        assert s.out_deg == 4
        assert s.t2_up == 6


def test_mst_leaf_vertex():
    g = emst(PointCloud([[0.0], [1.0], [3.0]]))
    s = local_stats(g, 2)  # leaf
    assert (s.out_deg, s.in_deg, s.recip) == (1, 1, 1)
    assert s.t2_mixed == 0


def test_local_stats_identities_random_graph():
    cloud = PointCloud(np.random.default_rng(1).random((150, 3)))
    g = knn_graph(cloud, 3)
    out, inn, rec, t2u, t2d, t2m = all_local_stats(g)
    np.testing.assert_array_equal(t2u, out * (out - 1) // 2)
    np.testing.assert_array_equal(t2d, inn * (inn - 1) // 2)
    np.testing.assert_array_equal(t2m, out * inn - rec)
    assert np.all(rec <= np.minimum(out, inn))
    assert out.sum() == inn.sum() == edge_count(g)


def test_mst_symmetry_per_vertex():
    g = emst(PointCloud(np.random.default_rng(2).random((80, 2))))
    out, inn, rec, *_ = all_local_stats(g)
    np.testing.assert_array_equal(out, inn)
    np.testing.assert_array_equal(out, rec)


def test_edge_counts():
    cloud = PointCloud(np.random.default_rng(3).random((30, 2)))
    assert edge_count(emst(cloud)) == 2 * 29
    assert edge_count(knn_graph(cloud, 4)) == 4 * 30
    empty = DirectedGeometricGraph(1, np.empty(0, np.int64), np.empty(0, np.int64),
                                   np.empty(0), "knn(1)")
    assert edge_count(empty) == 0


def test_local_stats_vertex_out_of_range():
    g = emst(PointCloud([[0.0], [1.0]]))
    with pytest.raises(InvalidParameterError):
        local_stats(g, 2)


def test_graph_kind_build_and_labels():
    cloud = PointCloud(np.random.default_rng(4).random((25, 2)))
    assert GraphKind.knn(2).build(cloud).kind == "knn(2)"
    assert GraphKind.mst().build(cloud).kind == "mst_symmetrized"
    assert GraphKind.knn(2).label == "knn_2"
    assert GraphKind.mst().label == "mst"
    with pytest.raises(InvalidParameterError):
        GraphKind("delaunay")
