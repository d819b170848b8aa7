"""Monte Carlo estimation of the graph-functional constants the variance
formulas consume, the analytic nearest-neighbor moment checks, and the
stabilization-radius tail diagnostic.

All estimation runs on homogeneous Poisson processes over a flat torus
(periodic metric), which removes boundary bias: every torus vertex is then
exchangeable with the origin of the infinite-process picture, so per-vertex
statistics are pooled across vertices and replicates. Standard errors are
computed at replicate level because within-replicate degrees are dependent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import GridTooCoarseError, InvalidParameterError
from .functional import GraphKind, all_local_stats
from .mcutil import MCEstimate
from .sampling import SeededRng, sample_poisson_torus

CACHE_SCHEMA_VERSION = 1

DEFAULT_EXPECTED_COUNT = 2000.0


@dataclass(frozen=True)
class FunctionalConstants:
    """Moment estimates for one graph functional in one dimension.

    Entries that are analytic facts (the K-NN out-degree equals K, the mean
    MST degree equals 2) carry SE 0. beta0 is the derived degree-moment
    combination 2*T2up + 2*T2dn + 2*T2mix + 2*Dplus + Dup.
    """

    kind: GraphKind
    d: int
    side: float
    intensity: float
    n_replicates: int
    seed: int
    e_delta_up: MCEstimate
    e_delta_down: MCEstimate
    var_delta_down: MCEstimate
    e_delta_sq: MCEstimate
    e_t2_up: MCEstimate
    e_t2_down: MCEstimate
    e_t2_mixed: MCEstimate
    e_delta_plus: MCEstimate

    @property
    def beta0(self) -> float:
        return (2.0 * self.e_t2_up.value + 2.0 * self.e_t2_down.value
                + 2.0 * self.e_t2_mixed.value + 2.0 * self.e_delta_plus.value
                + self.e_delta_up.value)


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0))


def unit_sphere_area(d: int) -> float:
    return d * unit_ball_volume(d)


def _replicate_means(kind: GraphKind, d: int, intensity: float, side: float,
                     n_replicates: int, rng: SeededRng) -> np.ndarray:
    """Per-replicate pooled vertex means of
    (out, in, in^2, recip, t2_up, t2_down, t2_mixed)."""
    rows = np.empty((n_replicates, 7))
    for r in range(n_replicates):
        cloud = sample_poisson_torus(intensity, side, d, rng.substream(r))
        need = kind.k + 1 if kind.name == "knn" else 2
        if len(cloud) <= need:
            raise InvalidParameterError("torus window produced too few points")
        graph = kind.build(cloud, period=side)
        out_deg, in_deg, recip, t2u, t2d, t2m = all_local_stats(graph)
        rows[r] = (
            out_deg.mean(), in_deg.mean(), (in_deg.astype(float) ** 2).mean(),
            recip.mean(), t2u.mean(), t2d.mean(), t2m.mean(),
        )
    return rows


def _pooled(rows: np.ndarray, col: int) -> MCEstimate:
    v = rows[:, col]
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


def estimate_constants(kind: GraphKind, d: int, intensity: float = 1.0,
                       side: float | None = None, n_replicates: int = 200,
                       rng: SeededRng | None = None) -> FunctionalConstants:
    """Estimate every moment the variance formulas need, by simulation on a
    torus window (default window holds 2000 expected points)."""
    if rng is None:
        rng = SeededRng(0)
    if side is None:
        side = (DEFAULT_EXPECTED_COUNT / intensity) ** (1.0 / d)
    if intensity * side**d < 500:
        raise InvalidParameterError("torus window must hold at least 500 expected points")
    if n_replicates < 50:
        raise InvalidParameterError("need at least 50 replicates")
    rows = _replicate_means(kind, d, intensity, side, n_replicates, rng)
    m2 = _pooled(rows, 2)
    if kind.name == "knn":
        k = float(kind.k)
        e_up = MCEstimate(k, 0.0)
        e_dn = MCEstimate(k, 0.0)  # pooled torus mean in-degree is exactly K
        t2u = MCEstimate(k * (k - 1.0) / 2.0, 0.0)
        var_dn = MCEstimate(m2.value - k * k, m2.se)
    else:
        e_up = MCEstimate(2.0, 0.0)
        e_dn = MCEstimate(2.0, 0.0)
        t2u = _pooled(rows, 4)
        var_dn = MCEstimate(m2.value - 4.0, m2.se)
    t2d = _pooled(rows, 5)
    t2m = _pooled(rows, 6)
    dplus = MCEstimate(2.0, 0.0) if kind.name == "mst" else _pooled(rows, 3)
    return FunctionalConstants(
        kind=kind, d=d, side=float(side), intensity=float(intensity),
        n_replicates=int(n_replicates), seed=int(rng.base_seed),
        e_delta_up=e_up, e_delta_down=e_dn, var_delta_down=var_dn,
        e_delta_sq=m2, e_t2_up=t2u, e_t2_down=t2d, e_t2_mixed=t2m,
        e_delta_plus=dplus,
    )


def moment_check_cd(d: int, mc_n: int, rng: SeededRng) -> tuple[MCEstimate, MCEstimate]:
    """MC estimates of the d-th and 2d-th moments of the nearest-neighbor
    distance in a unit-rate Poisson process (targets 1/V_d and 2/V_d^2).

    The nearest-point distance R satisfies P(R > r) = exp(-V_d r^d), so R^d
    is sampled exactly by radial inversion: R^d = Exp(1) / V_d.
    """
    if mc_n < 10_000:
        raise InvalidParameterError("mc_n must be at least 10^4")
    vd = unit_ball_volume(d)
    rd = rng.generator().exponential(size=int(mc_n)) / vd
    r2d = rd * rd
    root = np.sqrt(mc_n)
    return (
        MCEstimate(float(rd.mean()), float(rd.std(ddof=1) / root)),
        MCEstimate(float(r2d.mean()), float(r2d.std(ddof=1) / root)),
    )


def joint_degree_covariance(kind: GraphKind, d: int, z_grid, n_replicates: int,
                            rng: SeededRng, intensity: float = 1.0,
                            side: float | None = None) -> MCEstimate:
    """Integral over R^d of the two-point out-degree covariance
    E[d_up(0; P+z) d_up(z; P+0)] - (E d_up)^2, estimated by inserting point
    pairs at the grid separations into torus processes and integrating the
    radial profile. Diagnostic: identically zero for K-NN (out-degree is
    constant), finite for the MST."""
    z_grid = np.asarray(z_grid, float)
    if z_grid.ndim != 1 or len(z_grid) < 2 or np.any(np.diff(z_grid) <= 0):
        raise InvalidParameterError("z_grid must be increasing with >= 2 entries")
    if kind.name == "knn":
        # out-degree == K identically: the integrand is exactly zero
        return MCEstimate(0.0, 0.0)
    if side is None:
        side = max((DEFAULT_EXPECTED_COUNT / intensity) ** (1.0 / d), 4.0 * z_grid[-1])
    if n_replicates < 50:
        raise InvalidParameterError("need at least 50 replicates")
    mean_up = 2.0  # mean MST degree
    sphere = unit_sphere_area(d)
    per_rep = np.empty(n_replicates)
    for r in range(n_replicates):
        cloud = sample_poisson_torus(intensity, side, d, rng.substream(r))
        base = cloud.points
        profile = np.empty(len(z_grid))
        for j, rho in enumerate(z_grid):
            x0 = np.full(d, side / 2.0)
            x1 = x0.copy()
            x1[0] += rho
            pts = np.vstack([base, x0, x1])
            graph = kind.build(pts, period=side)
            out_deg = np.bincount(graph.src, minlength=len(pts))
            profile[j] = out_deg[-2] * out_deg[-1] - mean_up**2
        radial = profile * sphere * z_grid ** (d - 1)
        per_rep[r] = np.trapezoid(radial, z_grid)
    return MCEstimate(float(per_rep.mean()), float(per_rep.std(ddof=1) / np.sqrt(n_replicates)))


@dataclass(frozen=True)
class TailEstimate:
    """Empirical stabilization-radius tail tau(s) on a grid, with the
    least-squares slope of log tau versus s^d."""

    s_grid: np.ndarray
    tau_hat: np.ndarray
    fit_slope: float


def stabilization_tail(k: int, d: int, s_grid, n_replicates: int,
                       rng: SeededRng) -> TailEstimate:
    """tau_hat(s) = fraction of replicates in which the K-th nearest-neighbor
    distance of a point inserted into a unit-intensity torus process exceeds
    s. Points beyond that distance cannot receive out-edges from the inserted
    point, so it is a valid stabilization radius for the out-degree measure.

    tau_hat is exactly nonincreasing because all grid values share one set of
    replicate distances."""
    s_grid = np.asarray(s_grid, float)
    if s_grid.ndim != 1 or len(s_grid) < 2 or np.any(np.diff(s_grid) <= 0) or s_grid[0] <= 0:
        raise InvalidParameterError("s_grid must be positive and increasing")
    if k < 1:
        raise InvalidParameterError("K must be at least 1")
    side = max(2.5 * float(s_grid[-1]), 200.0 ** (1.0 / d))
    dists = np.empty(n_replicates)
    center = np.full(d, side / 2.0)
    for r in range(n_replicates):
        cloud = sample_poisson_torus(1.0, side, d, rng.substream(r))
        pts = cloud.points
        while len(pts) < k:  # vanishing probability at these window sizes
            cloud = sample_poisson_torus(1.0, side, d, rng.substream(n_replicates + r))
            pts = cloud.points
        delta = np.abs(pts - center)
        np.minimum(delta, side - delta, out=delta)
        sq = (delta * delta).sum(axis=1)
        dists[r] = np.sqrt(np.partition(sq, k - 1)[k - 1])
    tau = (dists[:, None] > s_grid[None, :]).mean(axis=0)
    pos = tau > 0
    if not np.any(pos):
        raise GridTooCoarseError("all tail estimates are zero; shrink the s grid")
    x = s_grid[pos] ** d
    y = np.log(tau[pos])
    if len(x) >= 2:
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = float(y[0] / x[0])
    return TailEstimate(s_grid, tau, slope)


_CACHE_FIELDS = [
    "e_delta_up", "e_delta_down", "var_delta_down", "e_delta_sq",
    "e_t2_up", "e_t2_down", "e_t2_mixed", "e_delta_plus",
]

CACHE_HEADER = (
    ["schema_version", "kind", "k", "d", "side", "intensity", "n_replicates", "seed"]
    + [c for f in _CACHE_FIELDS for c in (f, f + "_se")]
    + ["beta0"]
)


def save_constants_csv(path, items: list[FunctionalConstants]) -> None:
    """Cache schema (version 1): one row per (kind, K, d) with value/SE pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CACHE_HEADER)
        for c in items:
            row = [CACHE_SCHEMA_VERSION, c.kind.name, c.kind.k, c.d,
                   "%.10g" % c.side, "%.10g" % c.intensity, c.n_replicates, c.seed]
            for f in _CACHE_FIELDS:
                est = getattr(c, f)
                row += ["%.10g" % est.value, "%.10g" % est.se]
            row.append("%.10g" % c.beta0)
            w.writerow(row)


def load_constants_csv(path) -> list[FunctionalConstants]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if int(row["schema_version"]) != CACHE_SCHEMA_VERSION:
                raise InvalidParameterError(
                    f"constants cache schema {row['schema_version']} unsupported"
                )
            kind = GraphKind(row["kind"], int(row["k"]))
            kwargs = {
                f: MCEstimate(float(row[f]), float(row[f + "_se"])) for f in _CACHE_FIELDS
            }
            out.append(FunctionalConstants(
                kind=kind, d=int(row["d"]), side=float(row["side"]),
                intensity=float(row["intensity"]),
                n_replicates=int(row["n_replicates"]), seed=int(row["seed"]),
                **kwargs,
            ))
    return out


def find_constants(items: list[FunctionalConstants], kind: GraphKind,
                   d: int) -> FunctionalConstants | None:
    for c in items:
        if c.kind == kind and c.d == d:
            return c
    return None
