"""Build the two geometric graphs, count cross edges, and run the tests.

Run with: python3 demos/01_graphs_and_statistic.py
"""

import numpy as np

import geomtest as gt

rng = gt.SeededRng(2024)

# Two samples in the plane: a centered blob and a slightly shifted one.
f = gt.truncated_normal(np.zeros(2), radius=6.0)
g = gt.truncated_normal(np.array([0.6, 0.6]), radius=6.0)
sample = gt.sample_poissonized_pair(300, 200, f, g, rng.substream(0))
print(f"pooled sample: {len(sample.cloud)} points, "
      f"{sample.n1} labeled 1, {sample.n2} labeled 2")

# The directed 2-NN graph and the symmetrized MST of the pooled points.
knn = gt.knn_graph(sample.cloud, 2)
mst = gt.emst(sample.cloud)
print(f"2-NN graph: {knn.n_edges} directed edges (out-degree 2 everywhere)")
print(f"MST: {mst.n_edges} directed edges = 2(n-1)")

# The statistic: directed edges from a label-1 point to a label-2 point.
print("cross count on 2-NN:", gt.cross_count(knn, sample))
print("cross count on MST: ", gt.cross_count(mst, sample))

# Small cross counts are evidence against the null, so both calibrated tests
# reject in the lower tail.
constants = gt.estimate_constants(gt.GraphKind.knn(2), 2, n_replicates=100,
                                  rng=gt.SeededRng(7))
asym = gt.asymptotic_test(sample, gt.GraphKind.knn(2), constants, alpha=0.05)
print(f"asymptotic 2-NN test: z={asym.z:.3f} p={asym.p_value:.4f} reject={asym.reject}")

perm = gt.permutation_test(sample, gt.GraphKind.mst(), alpha=0.05,
                           n_permutations=499, rng=rng.substream(1))
print(f"permutation MST test: p={perm.p_value:.4f} reject={perm.reject}")
