"""Estimate the graph constants the variance formulas need, check the
analytic nearest-neighbor moments, and evaluate the dissimilarity between
two densities.

Run with: python3 demos/02_constants_and_dissimilarity.py
"""

import numpy as np

import geomtest as gt

# Degree moments of the 1-NN functional on a unit-rate Poisson process,
# estimated on a torus window so there are no boundary effects.
c = gt.estimate_constants(gt.GraphKind.knn(1), d=2, n_replicates=200,
                          rng=gt.SeededRng(11))
print("1-NN constants in d=2:")
print(f"  E out-degree        = {c.e_delta_up.value:g} (analytic)")
print(f"  Var(in-degree)      = {c.var_delta_down.value:.4f} +- {c.var_delta_down.se:.4f}")
print(f"  E reciprocal-degree = {c.e_delta_plus.value:.4f} +- {c.e_delta_plus.se:.4f}")
print(f"  beta0               = {c.beta0:.4f}")

# The same machinery for the MST: mean degree 2 is analytic, the second
# moment is simulated.
m = gt.estimate_constants(gt.GraphKind.mst(), d=2, n_replicates=200,
                          rng=gt.SeededRng(12))
print(f"MST: E[deg^2] = {m.e_delta_sq.value:.4f} +- {m.e_delta_sq.se:.4f}")

# Analytic check: the d-th moment of the nearest-neighbor distance is 1/V_d.
for d in (1, 2, 3):
    cd, c2d = gt.moment_check_cd(d, 500_000, gt.SeededRng(13).substream(d))
    vd = gt.unit_ball_volume(d)
    print(f"d={d}: C_d = {cd.value:.5f} (target {1/vd:.5f}), "
          f"C_2d = {c2d.value:.5f} (target {2/vd**2:.5f})")

# Dissimilarity between two densities: p^2 + q^2 when equal, 1 when disjoint.
f = gt.gaussian(np.zeros(1))
g = gt.gaussian(np.ones(1))
est = gt.hp_dissimilarity(f, g, p=0.5, mc_n=200_000, rng=gt.SeededRng(14))
print(f"dissimilarity N(0,1) vs N(1,1): {est.value:.4f} +- {est.se:.4f} "
      f"(equal densities would give 0.5)")

# The weak limit of T/N follows directly.
wl = gt.weak_limit(2.0, f, g, 0.5, 200_000, gt.SeededRng(15))
print(f"MST weak limit of T/N: {wl.value:.4f} (null value 2pq = 0.5)")

# Stabilization-radius tail of the 1-NN rule in d=1: exactly exp(-2s).
tail = gt.stabilization_tail(1, 1, np.arange(0.25, 2.01, 0.25), 20_000,
                             gt.SeededRng(16))
print("tail tau(s) vs exp(-2s):")
for s, t in zip(tail.s_grid, tail.tau_hat):
    print(f"  s={s:.2f}: {t:.4f} vs {np.exp(-2*s):.4f}")
print(f"fitted slope of log tau vs s^d: {tail.fit_slope:.3f} (target -2)")
