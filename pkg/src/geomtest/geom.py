"""Geometric graph construction: directed K-NN graphs and symmetrized Euclidean MSTs.

Both constructions are deterministic, including under exact distance ties:

* K-NN: among candidate neighbors ordered by (squared distance, index), the
  first K are selected, so ties are broken by the smaller destination index.
* MST: Prim's frontier argmin picks the smallest-index vertex among equals.

Squared distances drive every comparison; reported edge lengths are true
Euclidean (or flat-torus) distances. Production K-NN uses a k-d tree up to
moderate dimension and an exact chunked brute-force kernel above it, where
k-d trees degrade; both share the tie rule and are checked edge-for-edge
against the independent oracle in the test suite.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _fast
from .errors import InvalidInputError, InvalidParameterError

# Above this dimension the k-d tree loses to chunked brute force.
_KDTREE_MAX_DIM = 9
_CHUNK_ROWS = 512

_local = threading.local()


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of points in R^d; index identity is meaningful."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InvalidInputError("points must be a 2-D array of shape (n, dim)")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DirectedGeometricGraph:
    """Directed edge list over a point cloud, with Euclidean edge lengths.

    kind is "knn(K)" or "mst_symmetrized"; edges are stored sorted by
    (src, dst) so equal graphs have identical representations.
    """

    n_vertices: int
    src: np.ndarray
    dst: np.ndarray
    length: np.ndarray
    kind: str
    period: float | None = field(default=None)

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))


def _as_cloud(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    if pts.ndim != 2:
        raise InvalidInputError("expected a PointCloud or (n, dim) array")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("coordinates must be finite")
    return pts


def pair_distances(points: np.ndarray, src, dst, period: float | None = None) -> np.ndarray:
    """Euclidean (or flat-torus) distances between indexed point pairs."""
    delta = np.abs(points[src] - points[dst])
    if period is not None:
        np.minimum(delta, period - delta, out=delta)
    return np.sqrt((delta * delta).sum(axis=1))


def _sq_dists_to(points: np.ndarray, i: int, period: float | None) -> np.ndarray:
    delta = np.abs(points - points[i])
    if period is not None:
        np.minimum(delta, period - delta, out=delta)
    return (delta * delta).sum(axis=1)


def _buffers(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Reused per-thread scratch for the chunked kernel (large allocs are slow).

    Buffers are allocated at exactly n columns so row slices stay C-contiguous
    for matmul's out= argument.
    """
    cur = getattr(_local, "bufs", None)
    if cur is None or cur[0].shape[1] != n or cur[0].shape[0] < m:
        g = np.empty((max(m, _CHUNK_ROWS), n))
        d = np.empty((max(m, _CHUNK_ROWS), n))
        _local.bufs = (g, d)
        cur = (g, d)
    return cur[0][:m], cur[1][:m]


def _exact_row_knn(points: np.ndarray, i: int, k: int, period: float | None) -> np.ndarray:
    """Full deterministic selection for one vertex: order by (d^2, index)."""
    sq = _sq_dists_to(points, i, period)
    sq[i] = np.inf
    order = np.lexsort((np.arange(len(sq)), sq))
    return order[:k]


def _knn_indices_kdtree(points: np.ndarray, k: int, period: float | None) -> np.ndarray:
    n = len(points)
    tree = cKDTree(points, boxsize=period)
    m = min(n, k + 2)
    dist, idx = tree.query(points, k=m)
    dist = dist * dist  # compare in the squared scale, like the brute path
    dist[idx == np.arange(n)[:, None]] = np.inf
    order = np.lexsort((idx, dist), axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    out = idx[:, :k].copy()
    if m > k + 1:
        # A tie across the selection boundary means the k-d tree candidate set
        # may omit an equal-distance point; redo those rows exactly.
        suspect = np.nonzero(dist[:, k - 1] >= dist[:, k] * (1 - 1e-12))[0]
        for i in suspect:
            out[i] = _exact_row_knn(points, int(i), k, period)
    return out


def _knn_indices_chunked(points: np.ndarray, k: int) -> np.ndarray:
    n = len(points)
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.int64)
    m = min(n - 1, k + 1)  # candidates kept per row, excluding self
    for lo in range(0, n, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, n)
        rows = hi - lo
        gbuf, dbuf = _buffers(rows, n)
        np.matmul(points[lo:hi], points.T, out=gbuf)
        np.multiply(gbuf, -2.0, out=dbuf)
        dbuf += sq[lo:hi, None]
        dbuf += sq[None, :]
        dbuf[np.arange(rows), np.arange(lo, hi)] = np.inf
        part = np.argpartition(dbuf, m - 1, axis=1)[:, :m]
        pd = np.take_along_axis(dbuf, part, axis=1)
        order = np.lexsort((part, pd), axis=1)
        part = np.take_along_axis(part, order, axis=1)
        pd = np.take_along_axis(pd, order, axis=1)
        out[lo:hi] = part[:, :k]
        if m > k:
            suspect = np.nonzero(pd[:, k - 1] >= pd[:, k] * (1 - 1e-12))[0]
            for i in suspect:
                out[lo + i] = _exact_row_knn(points, int(lo + i), k, None)
    return out


def knn_neighbor_indices(cloud, k: int, period: float | None = None) -> np.ndarray:
    """(n, k) array: row i holds the k nearest distinct points to i, nearest first.

    Row prefixes are consistent: columns [:j] give the j-NN neighbor sets.
    """
    points = _as_cloud(cloud)
    n = len(points)
    if n < 2:
        raise InvalidParameterError("need at least 2 points")
    if not 1 <= k < n:
        raise InvalidParameterError(f"K must satisfy 1 <= K < n, got K={k}, n={n}")
    if points.shape[1] <= _KDTREE_MAX_DIM or period is not None:
        return _knn_indices_kdtree(points, k, period)
    return _knn_indices_chunked(points, k)


def knn_graph(cloud, k: int, period: float | None = None) -> DirectedGeometricGraph:
    """Directed K-nearest-neighbor graph: edge (a, b) iff b is among the K
    nearest distinct points to a. Distance ties are broken by the smaller
    destination index."""
    points = _as_cloud(cloud)
    nb = knn_neighbor_indices(points, k, period)
    n = len(points)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = nb.astype(np.int64).ravel()
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    length = pair_distances(points, src, dst, period)
    return DirectedGeometricGraph(n, src, dst, length, f"knn({k})", period)


def knn_graph_brute(cloud, k: int, period: float | None = None) -> DirectedGeometricGraph:
    """O(n^2) oracle construction: full per-row sort by (d^2, index)."""
    points = _as_cloud(cloud)
    n = len(points)
    if n < 2:
        raise InvalidParameterError("need at least 2 points")
    if not 1 <= k < n:
        raise InvalidParameterError(f"K must satisfy 1 <= K < n, got K={k}, n={n}")
    nb = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        nb[i] = _exact_row_knn(points, i, k, period)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = nb.ravel()
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    length = pair_distances(points, src, dst, period)
    return DirectedGeometricGraph(n, src, dst, length, f"knn({k})", period)


def kth_nn_distance(cloud, k: int, period: float | None = None) -> np.ndarray:
    """Per-point distance to the K-th nearest distinct point."""
    points = _as_cloud(cloud)
    nb = knn_neighbor_indices(points, k, period)
    return pair_distances(points, np.arange(len(points)), nb[:, k - 1], period)


def emst(cloud, period: float | None = None) -> DirectedGeometricGraph:
    """Symmetrized Euclidean minimum spanning tree.

    Each undirected MST edge is stored in both directions, so the graph has
    2(n-1) directed edges. Built with an O(n^2) Prim kernel, compiled once.
    """
    points = _as_cloud(cloud)
    n = len(points)
    if n < 2:
        raise InvalidParameterError("need at least 2 points")
    pts = np.ascontiguousarray(points)
    if period is None:
        u, v = _fast.prim_mst(pts)
    else:
        u, v = _fast.prim_mst_periodic(pts, float(period))
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    length = pair_distances(points, src, dst, period)
    return DirectedGeometricGraph(n, src, dst, length, "mst_symmetrized", period)


def validate_graph(graph: DirectedGeometricGraph, cloud, atol: float = 1e-9) -> None:
    """Assert the documented structural invariants; raises InvalidInputError."""
    points = _as_cloud(cloud)
    if len(points) != graph.n_vertices:
        raise InvalidInputError("cloud size does not match graph")
    if np.any(graph.src == graph.dst):
        raise InvalidInputError("self-loop found")
    keys = graph.src * graph.n_vertices + graph.dst
    if len(np.unique(keys)) != len(keys):
        raise InvalidInputError("duplicated directed edge")
    expect = pair_distances(points, graph.src, graph.dst, graph.period)
    if not np.allclose(expect, graph.length, atol=atol, rtol=1e-9):
        raise InvalidInputError("stored edge lengths do not match coordinates")
    if graph.kind.startswith("knn("):
        k = int(graph.kind[4:-1])
        if graph.n_vertices > k:
            out = np.bincount(graph.src, minlength=graph.n_vertices)
            if not np.all(out == k):
                raise InvalidInputError("knn out-degrees are not all K")
    elif graph.kind == "mst_symmetrized":
        rev = graph.dst * graph.n_vertices + graph.src
        if not np.array_equal(np.sort(keys), np.sort(rev)):
            raise InvalidInputError("mst edge set is not symmetric")
        if graph.n_edges != 2 * (graph.n_vertices - 1):
            raise InvalidInputError("mst directed edge count is not 2(n-1)")
        # connectivity via union-find
        parent = np.arange(graph.n_vertices)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in zip(graph.src.tolist(), graph.dst.tolist()):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        roots = {find(a) for a in range(graph.n_vertices)}
        if len(roots) != 1:
            raise InvalidInputError("mst is not connected")


def save_point_csv(path, cloud) -> None:
    """Write one row per point, `dim` numeric columns, no header."""
    points = _as_cloud(cloud)
    np.savetxt(path, points, delimiter=",", fmt="%.17g")


def load_point_csv(path) -> PointCloud:
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return PointCloud(pts)
