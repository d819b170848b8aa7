"""Verify the variance formulas and the normal limit by simulation.

The statistic decomposes as R = R1 + R2: R1 is centered at the conditional
mean given positions, R2 is the centered conditional mean itself. Each piece
has its own variance formula; this script checks all three against 1000
replicates and then standardizes R to compare with N(0, 1).

Run with: python3 demos/03_variance_and_clt.py  (about a minute)
"""

import numpy as np
from scipy import stats as sstats

import geomtest as gt

kind = gt.GraphKind.knn(1)
p, q = 0.6, 0.4
n_total = 2000.0
f = gt.uniform_box(2)

constants = gt.estimate_constants(kind, 2, n_replicates=200, rng=gt.SeededRng(21))

reps = 1000
t_arr = np.empty(reps)
e_arr = np.empty(reps)
for i in range(reps):
    s = gt.sample_poissonized_pair(p * n_total, q * n_total, f, f,
                                   gt.SeededRng(22).substream(i))
    graph = kind.build(s.cloud)
    t_arr[i] = gt.cross_count(graph, s)
    e_arr[i] = graph.n_edges

c = p * q
r1 = (t_arr - c * e_arr) / np.sqrt(n_total)
r2 = c * (e_arr - n_total) / np.sqrt(n_total)
r = (t_arr - c * n_total) / np.sqrt(n_total)

s1 = gt.sigma1_null(kind, constants, p)
s2 = (p * q) ** 2
st = gt.sigma_null_sq(kind, constants, p)
print(f"Var(R1): empirical {r1.var(ddof=1):.4f} vs formula {s1:.4f}")
print(f"Var(R2): empirical {r2.var(ddof=1):.4f} vs formula {s2:.4f}")
print(f"Var(R):  empirical {r.var(ddof=1):.4f} vs formula {st:.4f}")

z = r / np.sqrt(st)
ks = sstats.kstest(z, "norm")
print(f"KS distance of standardized R to N(0,1): {ks.statistic:.4f} "
      f"(about 0.02 is what a perfect normal sample of this size gives)")

# The same under an alternative, now with the mixture-integral variances.
fa = gt.truncated_normal(np.zeros(2), 6.0)
ga = gt.truncated_normal(np.full(2, 0.4), 6.0)
rep = gt.clt_diagnostic(kind, fa, ga, p, n_total, 1000, constants, seed=23)
print(f"alternative: ks={rep.ks_distance:.4f}, empirical/theoretical variance "
      f"= {rep.empirical_variance / rep.theoretical_variance:.3f}")
