"""The cross-edge-count statistic, its centerings and variance formulas, the
Henze-Penrose dissimilarity, and the calibrated two-sample tests.

Conventions used throughout:

* T counts directed edges (x, y) with label(x) = 1 and label(y) = 2. On the
  symmetrized MST this counts each bichromatic undirected edge exactly once.
* Null centering: E0(T) = (n1_mean * n2_mean / N^2) * E0|E| with the directed
  edge counts E0|E| = K*N for the K-NN graph and 2(N-1) for the symmetrized
  MST, N = n1_mean + n2_mean.
* The limiting conditional variance per unit N is

      sigma1^2 = pq*D * I1 + 2pq^2*T_up * I2g + 2p^2q*T_dn * I2f
                 - p^2q^2 * B * I3,
      B = D + 2*T_up + 2*T_dn + 2*T_mix + D_plus,

  with D = E[out-degree], T_up/T_dn/T_mix the expected 2-star counts, D_plus
  the expected reciprocal-degree of a typical vertex, and the integrals
  I1 = int f g / phi, I2g = int f g^2 / phi^2, I2f = int f^2 g / phi^2,
  I3 = int f^2 g^2 / phi^3 over the mixture phi = p f + q g. The three-point
  covariance weights follow from the label pattern at each shared-vertex
  configuration: an out-2-star needs both heads labeled 2 (weight p q^2), an
  in-2-star both tails labeled 1 (weight p^2 q), and every path or reciprocal
  pair is label-infeasible (pure -h^2 term, counted once per ordered pair).
  This bookkeeping is validated in the test suite by exact label-resampling
  on fixed graphs.
* Standardization: z = (T - E0 T) / (sqrt(N) * sigma); reject when z <= z_alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from .constants import FunctionalConstants
from .errors import (
    IncompleteConstantsError,
    InvalidInputError,
    InvalidParameterError,
)
from .functional import GraphKind
from .mcutil import MCEstimate
from .geom import DirectedGeometricGraph
from .sampling import Density, LabeledSample, SeededRng


@dataclass(frozen=True)
class TestReport:
    """Outcome of one calibrated test.

    z = (t_raw - center) / scale with scale = sqrt(N) * sigma for the
    asymptotic method; p_value is lower-tail.
    """

    t_raw: float
    center: float
    scale: float
    z: float
    p_value: float
    reject: bool
    method: str
    alpha: float

    CSV_HEADER = "t_raw,center,scale,z,p_value,reject,method,alpha"

    def csv_row(self) -> str:
        return "%.10g,%.10g,%.10g,%.10g,%.10g,%d,%s,%.10g" % (
            self.t_raw, self.center, self.scale, self.z,
            self.p_value, int(self.reject), self.method, self.alpha,
        )


@dataclass(frozen=True)
class VarianceBreakdown:
    sigma1_sq: float
    sigma2_sq: float
    total: float
    mc_se: float


def cross_count(graph: DirectedGeometricGraph, sample: LabeledSample) -> int:
    """Number of directed edges (x, y) with label(x)=1 and label(y)=2."""
    if graph.n_vertices != len(sample.cloud):
        raise InvalidInputError("graph and sample sizes differ")
    lab = sample.labels
    return int(np.sum((lab[graph.src] == 1) & (lab[graph.dst] == 2)))


def label_probability(points: np.ndarray, f: Density, g: Density,
                      n1_mean: float, n2_mean: float) -> np.ndarray:
    """P(label = 1 | position) = n1 f / (n1 f + n2 g), per point."""
    wf = n1_mean * f.pdf(points)
    wg = n2_mean * g.pdf(points)
    return wf / (wf + wg)


def conditional_cross_mean(graph: DirectedGeometricGraph, sample: LabeledSample,
                           f: Density, g: Density) -> float:
    """E(T | positions): sum over edges of w1(x) * (1 - w1(y))."""
    w1 = label_probability(sample.cloud.points, f, g, sample.n1_mean, sample.n2_mean)
    return float(np.sum(w1[graph.src] * (1.0 - w1[graph.dst])))


def null_edge_count(kind: GraphKind, n: float) -> float:
    """Expected directed edge count under the null: K*N or 2(N-1)."""
    if kind.name == "knn":
        return kind.k * n
    return 2.0 * (n - 1.0)


def _mixture_sample(f: Density, g: Density, p: float, mc_n: int,
                    rng: SeededRng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw mc_n points from phi = p f + q g; return (f values, g values, phi)."""
    gen = rng.generator()
    pts = np.empty((mc_n, f.dim))
    pick_f = gen.random(mc_n) < p
    nf = int(pick_f.sum())
    if nf:
        pts[pick_f] = f.sample(gen, nf)
    if mc_n - nf:
        pts[~pick_f] = g.sample(gen, mc_n - nf)
    fv = f.pdf(pts)
    gv = g.pdf(pts)
    return fv, gv, p * fv + (1.0 - p) * gv


def _check_densities(f: Density, g: Density, rng: SeededRng) -> None:
    gen = rng.substream(987).generator()
    if not np.any(f.pdf(f.sample(gen, 64)) > 0) or not np.any(g.pdf(g.sample(gen, 64)) > 0):
        raise InvalidParameterError("degenerate density: evaluator is zero on its own samples")


def hp_dissimilarity(f: Density, g: Density, p: float, mc_n: int,
                     rng: SeededRng) -> MCEstimate:
    """1 - 2pq * int f g / (p f + q g), by importance sampling from the mixture."""
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("p must be in (0, 1)")
    if mc_n < 1000:
        raise InvalidParameterError("mc_n must be at least 1000")
    _check_densities(f, g, rng)
    q = 1.0 - p
    fv, gv, phi = _mixture_sample(f, g, p, int(mc_n), rng)
    u = fv * gv / phi**2
    i1 = u.mean()
    se = u.std(ddof=1) / np.sqrt(len(u))
    return MCEstimate(1.0 - 2.0 * p * q * i1, 2.0 * p * q * se)


def weak_limit(e_delta0_up: float, f: Density, g: Density, p: float, mc_n: int,
               rng: SeededRng) -> MCEstimate:
    """Limit of T/N: (E[out-degree] / 2) * (1 - dissimilarity)."""
    if e_delta0_up <= 0:
        raise InvalidParameterError("e_delta0_up must be positive")
    delta = hp_dissimilarity(f, g, p, mc_n, rng)
    half = e_delta0_up / 2.0
    return MCEstimate(half * (1.0 - delta.value), half * delta.se)


_SIGMA1_FIELDS = ("e_delta_up", "e_t2_up", "e_t2_down", "e_t2_mixed", "e_delta_plus")


def _moments(kind: GraphKind, constants: FunctionalConstants) -> tuple[float, ...]:
    if constants.kind != kind:
        raise IncompleteConstantsError("kind", kind.label)
    vals = []
    for name in _SIGMA1_FIELDS:
        est = getattr(constants, name)
        if est is None:
            raise IncompleteConstantsError(name, kind.label)
        vals.append(est.value)
    return tuple(vals)


def sigma1_null(kind: GraphKind, constants: FunctionalConstants, p: float) -> float:
    """Limiting null variance (per unit N) of the conditionally centered statistic."""
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("p must be in (0, 1)")
    d_up, t_up, t_dn, t_mx, d_plus = _moments(kind, constants)
    q = 1.0 - p
    b = d_up + 2.0 * t_up + 2.0 * t_dn + 2.0 * t_mx + d_plus
    return (p * q * d_up + 2.0 * p * q * q * t_up + 2.0 * p * p * q * t_dn
            - p * p * q * q * b)


def sigma1_alternative(kind: GraphKind, constants: FunctionalConstants,
                       f: Density, g: Density, p: float, mc_n: int,
                       rng: SeededRng) -> MCEstimate:
    """General-alternative version of sigma1_null; the four mixture integrals
    are estimated by importance sampling from phi, jointly on one sample so
    the reported SE includes their correlation. Reduces exactly to
    sigma1_null when f = g."""
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("p must be in (0, 1)")
    if mc_n < 1000:
        raise InvalidParameterError("mc_n must be at least 1000")
    _check_densities(f, g, rng)
    d_up, t_up, t_dn, t_mx, d_plus = _moments(kind, constants)
    q = 1.0 - p
    b = d_up + 2.0 * t_up + 2.0 * t_dn + 2.0 * t_mx + d_plus
    fv, gv, phi = _mixture_sample(f, g, p, int(mc_n), rng)
    u1 = fv * gv / phi**2
    u2g = fv * gv * gv / phi**3
    u2f = fv * fv * gv / phi**3
    u3 = (fv * gv) ** 2 / phi**4
    v = (p * q * d_up * u1 + 2.0 * p * q * q * t_up * u2g
         + 2.0 * p * p * q * t_dn * u2f - p * p * q * q * b * u3)
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


def sigma2_knn(k: int, f: Density, g: Density, p: float, mc_n: int,
               rng: SeededRng) -> MCEstimate:
    """Variance (per unit N) of the centered conditional mean for the K-NN
    graph: p^2 q^2 K^2 * int f^2 g^2 / phi^3. The joint-degree covariance
    term vanishes because the out-degree is identically K."""
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("p must be in (0, 1)")
    q = 1.0 - p
    fv, gv, phi = _mixture_sample(f, g, p, int(mc_n), rng)
    u3 = (fv * gv) ** 2 / phi**4
    c = (p * q * k) ** 2
    return MCEstimate(float(c * u3.mean()), float(c * u3.std(ddof=1) / np.sqrt(len(u3))))


def sigma_total_knn(k: int, constants: FunctionalConstants, f: Density, g: Density,
                    p: float, mc_n: int, rng: SeededRng) -> VarianceBreakdown:
    """sigma1^2 + sigma2^2 for the K-NN test under a general alternative."""
    s1 = sigma1_alternative(GraphKind.knn(k), constants, f, g, p, mc_n, rng.substream(1))
    s2 = sigma2_knn(k, f, g, p, mc_n, rng.substream(2))
    return VarianceBreakdown(
        sigma1_sq=s1.value,
        sigma2_sq=s2.value,
        total=s1.value + s2.value,
        mc_se=float(np.hypot(s1.se, s2.se)),
    )


def sigma_null_sq(kind: GraphKind, constants: FunctionalConstants, p: float) -> float:
    """Null variance used for z-standardization.

    K-NN: sigma1^2 + (pqK)^2 (the full unconditional variance).
    MST: sigma1^2 only -- no unconditional CLT is available, so the MST
    z-test is calibrated by the conditional variance alone and is
    anti-conservative; prefer the permutation test for the MST.
    """
    s1 = sigma1_null(kind, constants, p)
    if kind.name == "knn":
        return s1 + (p * (1.0 - p) * kind.k) ** 2
    return s1


def asymptotic_test(sample: LabeledSample, kind: GraphKind,
                    constants: FunctionalConstants, alpha: float,
                    p: float | None = None) -> TestReport:
    """Lower-tail z-test of the cross-edge count against its null law."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError("alpha must be in (0, 1)")
    n_total = sample.pooled_mean
    if p is None:
        p = sample.n1_mean / n_total
    graph = kind.build(sample.cloud)
    t = cross_count(graph, sample)
    center = (sample.n1_mean * sample.n2_mean / n_total**2) * null_edge_count(kind, n_total)
    sigma_sq = sigma_null_sq(kind, constants, p)
    scale = float(np.sqrt(n_total * sigma_sq))
    z = (t - center) / scale if scale > 0 else float("nan")
    p_value = float(sstats.norm.cdf(z))
    return TestReport(float(t), center, scale, float(z), p_value,
                      p_value <= alpha, "asymptotic", alpha)


def permutation_test(sample: LabeledSample, kind: GraphKind, alpha: float,
                     n_permutations: int, rng: SeededRng) -> TestReport:
    """Permutation calibration: labels are shuffled uniformly over the pooled
    sample; the graph depends only on positions and is built once."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError("alpha must be in (0, 1)")
    if n_permutations < 99:
        raise InvalidParameterError("need at least 99 permutations")
    graph = kind.build(sample.cloud)
    t_obs = cross_count(graph, sample)
    gen = rng.generator()
    lab = sample.labels
    n = len(lab)
    t_perm = np.empty(n_permutations)
    block = max(1, min(n_permutations, 2_000_000 // max(graph.n_edges, 1)))
    done = 0
    while done < n_permutations:
        m = min(block, n_permutations - done)
        perm_labels = np.empty((m, n), dtype=np.int64)
        for i in range(m):
            perm_labels[i] = lab[gen.permutation(n)]
        t_perm[done:done + m] = np.sum(
            (perm_labels[:, graph.src] == 1) & (perm_labels[:, graph.dst] == 2), axis=1
        )
        done += m
    p_value = (1.0 + float(np.sum(t_perm <= t_obs))) / (n_permutations + 1.0)
    center = float(t_perm.mean())
    scale = float(t_perm.std(ddof=1))
    z = (t_obs - center) / scale if scale > 0 else float("nan")
    return TestReport(float(t_obs), center, scale, float(z), p_value,
                      p_value <= alpha, "permutation", alpha)
