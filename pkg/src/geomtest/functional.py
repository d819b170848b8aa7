"""Per-vertex local degree statistics of a directed graph.

These counts (degrees, 2-stars, reciprocal edges) are the raw material of
every variance formula in :mod:`geomtest.stats`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .geom import DirectedGeometricGraph, emst, knn_graph


@dataclass(frozen=True)
class GraphKind:
    """Selector for a graph functional: the directed K-NN rule or the
    symmetrized Euclidean MST."""

    name: str  # "knn" | "mst"
    k: int = 0

    def __post_init__(self):
        if self.name not in ("knn", "mst"):
            raise InvalidParameterError(f"unknown graph kind {self.name!r}")
        if self.name == "knn" and self.k < 1:
            raise InvalidParameterError("knn kind needs K >= 1")

    @classmethod
    def knn(cls, k: int) -> "GraphKind":
        return cls("knn", int(k))

    @classmethod
    def mst(cls) -> "GraphKind":
        return cls("mst")

    def build(self, cloud, period: float | None = None) -> DirectedGeometricGraph:
        if self.name == "knn":
            return knn_graph(cloud, self.k, period)
        return emst(cloud, period)

    @property
    def label(self) -> str:
        return f"knn_{self.k}" if self.name == "knn" else "mst"


@dataclass(frozen=True)
class LocalStats:
    """Degree counts at one vertex.

    recip counts neighbors joined in both directions; t2_mixed counts
    unordered {in-edge, out-edge} pairs excluding reciprocal ones, so
    t2_mixed = out_deg * in_deg - recip.
    """

    out_deg: int
    in_deg: int
    recip: int
    t2_up: int
    t2_down: int
    t2_mixed: int


def degree_arrays(graph: DirectedGeometricGraph):
    """(out_deg, in_deg, recip) per vertex, vectorized."""
    n = graph.n_vertices
    out_deg = np.bincount(graph.src, minlength=n)
    in_deg = np.bincount(graph.dst, minlength=n)
    if graph.n_edges == 0:
        return out_deg, in_deg, np.zeros(n, dtype=np.int64)
    keys = np.sort(graph.src * n + graph.dst)
    rev = graph.dst * n + graph.src
    pos = np.searchsorted(keys, rev)
    pos[pos >= len(keys)] = len(keys) - 1
    mutual = keys[pos] == rev
    recip = np.bincount(graph.src[mutual], minlength=n)
    return out_deg, in_deg, recip


def all_local_stats(graph: DirectedGeometricGraph):
    """Arrays (out, in, recip, t2_up, t2_down, t2_mixed), one entry per vertex."""
    out_deg, in_deg, recip = degree_arrays(graph)
    t2_up = out_deg * (out_deg - 1) // 2
    t2_down = in_deg * (in_deg - 1) // 2
    t2_mixed = out_deg * in_deg - recip
    return out_deg, in_deg, recip, t2_up, t2_down, t2_mixed


def local_stats(graph: DirectedGeometricGraph, vertex: int) -> LocalStats:
    if not 0 <= vertex < graph.n_vertices:
        raise InvalidParameterError(f"vertex {vertex} out of range")
    out_deg, in_deg, recip, t2_up, t2_down, t2_mixed = all_local_stats(graph)
    v = int(vertex)
    return LocalStats(
        int(out_deg[v]), int(in_deg[v]), int(recip[v]),
        int(t2_up[v]), int(t2_down[v]), int(t2_mixed[v]),
    )


def edge_count(graph: DirectedGeometricGraph) -> int:
    """Number of directed edges."""
    return int(graph.n_edges)
