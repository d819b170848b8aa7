"""Experiment harness: local-power curves under shrinking location
alternatives, CLT diagnostics, the Hotelling T^2 baseline, critical
exponents, and the theoretical limiting-power formula with its Monte Carlo
cross-validation report.

The location family is the truncated normal N(mu, I) on B(0, radius)
(radius defaults to 6, which keeps the compact-support setting while making
truncation numerically negligible). The alternative shifts the mean along
the all-ones direction by h * N^(-a) per coordinate.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .constants import FunctionalConstants, estimate_constants
from .errors import (
    InsufficientPilotError,
    InvalidParameterError,
    NumericalError,
)
from .functional import GraphKind
from .geom import PointCloud, knn_neighbor_indices
from .mcutil import MCEstimate, binomial_se
from .sampling import (
    Density,
    LabeledSample,
    SeededRng,
    sample_poissonized_pair,
    truncated_normal,
)
from .stats import (
    TestReport,
    conditional_cross_mean,
    cross_count,
    null_edge_count,
    permutation_test,
    sigma1_alternative,
    sigma_null_sq,
    sigma_total_knn,
)

DEFAULT_TESTS = ("knn_1", "knn_2", "knn_3", "fr_mst", "hotelling")
DEFAULT_RADIUS = 6.0


def critical_exponents(d: int) -> tuple[float, float]:
    """(beta_d, gamma_d): the no-power / full-power shrinking-rate exponents
    of the K-NN test. Both equal 1/4 up to dimension 8; above it
    beta_d = 1/2 - 2/d and gamma_d = 2/d."""
    if d < 1:
        raise InvalidParameterError("dimension must be at least 1")
    if d <= 8:
        return 0.25, 0.25
    return 0.5 - 2.0 / d, 2.0 / d


def hotelling_t2(sample: LabeledSample, alpha: float) -> TestReport:
    """Classical two-sample Hotelling T^2 with the exact F calibration."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError("alpha must be in (0, 1)")
    pts = sample.cloud.points
    d = sample.cloud.dim
    x1 = pts[sample.labels == 1]
    x2 = pts[sample.labels == 2]
    n1, n2 = len(x1), len(x2)
    if n1 <= d + 1 or n2 <= d + 1:
        raise InvalidParameterError("each sample must exceed d+1 points")
    n = n1 + n2
    diff = x1.mean(axis=0) - x2.mean(axis=0)
    s1 = np.cov(x1, rowvar=False, ddof=1)
    s2 = np.cov(x2, rowvar=False, ddof=1)
    pooled = ((n1 - 1) * s1 + (n2 - 1) * s2) / (n - 2)
    pooled = np.atleast_2d(pooled)
    cond = np.linalg.cond(pooled)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"pooled covariance is singular (condition number {cond:.3g})")
    t2 = float(n1 * n2 / n * diff @ np.linalg.solve(pooled, diff))
    fstat = (n - d - 1) / (d * (n - 2)) * t2
    p_value = float(sstats.f.sf(fstat, d, n - d - 1))
    z = float(sstats.norm.ppf(np.clip(p_value, 1e-300, 1.0 - 1e-16)))
    return TestReport(t2, 0.0, 1.0, z, p_value, p_value <= alpha, "hotelling", alpha)


def _location_pair(d: int, shift: np.ndarray, radius: float) -> tuple[Density, Density]:
    return truncated_normal(np.zeros(d), radius), truncated_normal(shift, radius)


def _draw_fixed(n1: int, n2: int, f: Density, g: Density, rng: SeededRng) -> LabeledSample:
    gen = rng.generator()
    pts = np.vstack([f.sample(gen, n1), g.sample(gen, n2)])
    labels = np.concatenate([np.ones(n1, np.int64), np.full(n2, 2, np.int64)])
    return LabeledSample(PointCloud(pts), labels, float(n1), float(n2))


def _knn_z_reject(t: float, k: int, n_total: float, n1_mean: float, n2_mean: float,
                  sigma_sq: float, z_alpha: float) -> bool:
    center = (n1_mean * n2_mean / n_total**2) * k * n_total
    z = (t - center) / np.sqrt(n_total * sigma_sq)
    return bool(z <= z_alpha)


def _power_iteration(args) -> dict[str, float]:
    """One (rate, h, iteration) replicate; returns test -> 0/1 rejections
    (NaN marks a test skipped as infeasible)."""
    (seed, rate_idx, h_idx, it, a, h, d, n1_mean, n2_mean, tests, alpha,
     radius, draw_mode, b_perm, sigma_by_k) = args
    rng = SeededRng(seed).substream(rate_idx, h_idx, it)
    n_total = float(n1_mean + n2_mean)
    delta = h * n_total ** (-a)
    f, g = _location_pair(d, np.full(d, delta), radius)
    if draw_mode == "fixed":
        sample = _draw_fixed(int(n1_mean), int(n2_mean), f, g, rng.substream(0))
    else:
        sample = sample_poissonized_pair(n1_mean, n2_mean, f, g, rng.substream(0))
    lab = sample.labels
    n = len(lab)
    z_alpha = float(sstats.norm.ppf(alpha))
    out: dict[str, float] = {}
    knn_ks = sorted(int(t.split("_")[1]) for t in tests if t.startswith("knn_"))
    if knn_ks:
        kmax = knn_ks[-1]
        if n > kmax:
            nb = knn_neighbor_indices(sample.cloud, kmax)
            lab1 = lab == 1
            lab2_nb = lab[nb] == 2
            for k in knn_ks:
                t = float(np.sum(lab1[:, None] & lab2_nb[:, :k]))
                out[f"knn_{k}"] = float(_knn_z_reject(
                    t, k, n_total, sample.n1_mean, sample.n2_mean,
                    sigma_by_k[k], z_alpha))
        else:
            for k in knn_ks:
                out[f"knn_{k}"] = float("nan")
    if "fr_mst" in tests:
        if n >= 3:
            rep = permutation_test(sample, GraphKind.mst(), alpha, b_perm, rng.substream(1))
            out["fr_mst"] = float(rep.reject)
        else:
            out["fr_mst"] = float("nan")
    if "hotelling" in tests:
        try:
            out["hotelling"] = float(hotelling_t2(sample, alpha).reject)
        except (InvalidParameterError, NumericalError):
            out["hotelling"] = float("nan")
    return out


@dataclass(frozen=True)
class PowerCurve:
    """Empirical power of each configured test on a grid of h values."""

    h_grid: np.ndarray
    rate_exponent: float
    d: int
    n1_mean: float
    n2_mean: float
    alpha: float
    n_iterations: int
    seed: int
    draw_mode: str
    power: dict[str, np.ndarray]
    se: dict[str, np.ndarray]
    n_used: dict[str, np.ndarray] = field(default_factory=dict)


def power_curve(a: float, h_grid, d: int, n1_mean: float, n2_mean: float,
                n_iterations: int, tests=DEFAULT_TESTS, alpha: float = 0.05,
                seed: int = 0, draw_mode: str = "poissonized",
                radius: float = DEFAULT_RADIUS, b_permutations: int = 199,
                constants: dict[int, FunctionalConstants] | None = None,
                n_jobs: int = 1, rate_idx: int = 0) -> PowerCurve:
    """Empirical power at each h, for the location family with per-coordinate
    shift h * N^(-a). Graph-test calibration constants are estimated on the
    fly (deterministically from the seed) when not supplied."""
    h_grid = np.asarray(h_grid, float)
    if h_grid.ndim != 1 or len(h_grid) == 0:
        raise InvalidParameterError("h grid must be non-empty")
    if n_iterations < 50:
        raise InvalidParameterError("need at least 50 iterations")
    if draw_mode not in ("poissonized", "fixed"):
        raise InvalidParameterError("draw_mode must be poissonized or fixed")
    tests = tuple(tests)
    n_total = n1_mean + n2_mean
    p = n1_mean / n_total
    knn_ks = sorted(int(t.split("_")[1]) for t in tests if t.startswith("knn_"))
    sigma_by_k: dict[int, float] = {}
    for k in knn_ks:
        c = (constants or {}).get(k)
        if c is None:
            c = estimate_constants(GraphKind.knn(k), d, n_replicates=100,
                                   rng=SeededRng(seed, stream_id=900 + k))
        sigma_by_k[k] = sigma_null_sq(GraphKind.knn(k), c, p)
    tasks = [
        (seed, rate_idx, h_idx, it, a, float(h), d, float(n1_mean), float(n2_mean),
         tests, alpha, radius, draw_mode, b_permutations, sigma_by_k)
        for h_idx, h in enumerate(h_grid)
        for it in range(n_iterations)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_power_iteration, tasks, chunksize=8))
    else:
        results = [_power_iteration(t) for t in tasks]
    power: dict[str, np.ndarray] = {}
    se: dict[str, np.ndarray] = {}
    n_used: dict[str, np.ndarray] = {}
    for t in tests:
        vals = np.array([r[t] for r in results]).reshape(len(h_grid), n_iterations)
        valid = ~np.isnan(vals)
        cnt = valid.sum(axis=1)
        if np.any(cnt < n_iterations):
            print(f"warning: test {t} skipped on {int((n_iterations - cnt).sum())} "
                  "infeasible iterations", file=sys.stderr)
        with np.errstate(invalid="ignore"):
            ph = np.where(cnt > 0, np.nansum(vals, axis=1) / np.maximum(cnt, 1), np.nan)
        power[t] = ph
        se[t] = np.array([binomial_se(ph[i], max(int(cnt[i]), 1)) for i in range(len(h_grid))])
        n_used[t] = cnt
    return PowerCurve(h_grid, a, d, float(n1_mean), float(n2_mean), alpha,
                      n_iterations, seed, draw_mode, power, se, n_used)


POWER_CSV_HEADER = "h,test,power,se,a,d,n1,n2,alpha,seed"


def write_power_csv(path, curve: PowerCurve) -> None:
    lines = [POWER_CSV_HEADER]
    for t in sorted(curve.power):
        for i, h in enumerate(curve.h_grid):
            lines.append("%.10g,%s,%.10g,%.10g,%.10g,%d,%.10g,%.10g,%.10g,%d" % (
                h, t, curve.power[t][i], curve.se[t][i], curve.rate_exponent,
                curve.d, curve.n1_mean, curve.n2_mean, curve.alpha, curve.seed))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_power_svg(path, curve: PowerCurve, width: int = 640, height: int = 420) -> None:
    """Static line chart, h on the x axis and power on the y axis."""
    ml, mr, mt, mb = 54, 16, 18, 40
    pw, ph = width - ml - mr, height - mt - mb
    hmax = float(curve.h_grid.max()) or 1.0

    def xy(h, p):
        return ml + pw * h / hmax, mt + ph * (1.0 - p)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x, y = xy(hmax * frac, 0.0)
        parts.append(f'<text x="{x:.1f}" y="{mt + ph + 18}" font-size="11" '
                     f'text-anchor="middle">{hmax * frac:.2g}</text>')
        _, yy = xy(0.0, frac)
        parts.append(f'<text x="{ml - 8}" y="{yy + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{frac:.2f}</text>')
        parts.append(f'<line x1="{ml}" y1="{yy:.1f}" x2="{ml + pw}" y2="{yy:.1f}" '
                     'stroke="#dddddd"/>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" font-size="12" '
                 'text-anchor="middle">h</text>')
    for i, t in enumerate(sorted(curve.power)):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        pts = " ".join("%.2f,%.2f" % xy(h, p)
                       for h, p in zip(curve.h_grid, curve.power[t])
                       if np.isfinite(p))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * i}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{t}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


@dataclass(frozen=True)
class CltReport:
    """Standardized-statistic diagnostics against the normal limit."""

    z_scores: np.ndarray
    ks_distance: float
    empirical_variance: float
    theoretical_variance: float
    centering: str  # "unconditional" (pilot mean) or "conditional"


def clt_diagnostic(kind: GraphKind, f: Density, g: Density, p: float, n_total: float,
                   n_replicates: int, constants: FunctionalConstants,
                   seed: int = 0, mc_n: int = 200_000) -> CltReport:
    """Simulate the scaled centered statistic and compare it to its normal
    limit.

    For the K-NN functional the statistic is centered by the unconditional
    mean, estimated from an independent pilot run of 4 * n_replicates, and
    standardized by the formula variance (sigma1 + sigma2). The MST has no
    unconditional CLT, so it is centered by the conditional mean given
    positions and standardized by sigma1 alone.
    """
    if n_replicates < 500:
        raise InvalidParameterError("need at least 500 replicates")
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("p must be in (0, 1)")
    rng = SeededRng(seed)
    n1_mean, n2_mean = p * n_total, (1.0 - p) * n_total
    if kind.name == "knn":
        vb = sigma_total_knn(kind.k, constants, f, g, p, mc_n, rng.substream(1))
        sigma_sq = vb.total
    else:
        sigma_sq = sigma1_alternative(kind, constants, f, g, p, mc_n, rng.substream(1)).value
    scale = float(np.sqrt(n_total * sigma_sq))

    def one_t(stream: SeededRng, conditional: bool) -> float:
        sample = sample_poissonized_pair(n1_mean, n2_mean, f, g, stream)
        graph = kind.build(sample.cloud)
        t = cross_count(graph, sample)
        if conditional:
            return t - conditional_cross_mean(graph, sample, f, g)
        return float(t)

    if kind.name == "knn":
        pilot = np.array([one_t(rng.substream(2, i), False) for i in range(4 * n_replicates)])
        mu_hat = pilot.mean()
        pilot_se = pilot.std(ddof=1) / np.sqrt(len(pilot))
        if pilot_se > 0.1 * scale:
            raise InsufficientPilotError(
                f"pilot mean SE {pilot_se:.4g} exceeds 10% of scale {scale:.4g}")
        t_vals = np.array([one_t(rng.substream(3, i), False) for i in range(n_replicates)])
        r_vals = (t_vals - mu_hat) / np.sqrt(n_total)
        centering = "unconditional"
    else:
        r_vals = np.array([one_t(rng.substream(3, i), True) for i in range(n_replicates)])
        r_vals = r_vals / np.sqrt(n_total)
        centering = "conditional"
    z = r_vals / np.sqrt(sigma_sq)
    ks = float(sstats.kstest(z, "norm").statistic)
    return CltReport(z, ks, float(r_vals.var(ddof=1)), float(sigma_sq), centering)


CLT_CSV_HEADER = "replicate,z"


def write_clt_csv(path, report: CltReport) -> None:
    lines = [CLT_CSV_HEADER]
    lines += ["%d,%.10g" % (i, z) for i, z in enumerate(report.z_scores)]
    lines.append("# ks_distance=%.10g empirical_variance=%.10g theoretical_variance=%.10g "
                 "centering=%s" % (report.ks_distance, report.empirical_variance,
                                   report.theoretical_variance, report.centering))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _second_moment_along(h_vec: np.ndarray, radius: float, mc_n: int,
                         rng: SeededRng) -> MCEstimate:
    """E[(h^T x)^2] for x ~ N(0, I) truncated to B(0, radius)."""
    dens = truncated_normal(np.zeros(len(h_vec)), radius)
    x = dens.sample(rng.generator(), int(mc_n))
    v = (x @ h_vec) ** 2
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


def theoretical_local_power(h_vec, alpha: float, p: float, sigma1: float,
                            s_radius: float, d: int, mc_n: int,
                            rng: SeededRng) -> MCEstimate:
    """Limiting power Phi(z_alpha + (r^2 / (4 sigma1)) * E[(h^T x)^2]) of the
    1-NN test under the shrinking location alternative h * N^(-1/4)."""
    return _local_power_with_constant(h_vec, alpha, p, sigma1, s_radius, d,
                                      mc_n, rng, "rsq4")


def _local_power_with_constant(h_vec, alpha, p, sigma1, s_radius, d, mc_n, rng,
                               which: str) -> MCEstimate:
    if sigma1 <= 0:
        raise InvalidParameterError("sigma1 must be positive")
    h_vec = np.atleast_1d(np.asarray(h_vec, float))
    if h_vec.shape[0] != d:
        raise InvalidParameterError("h must have length d")
    q = 1.0 - p
    const = (2.0 * p * q) ** 2 / 4.0 if which == "rsq4" else p * q
    m = _second_moment_along(h_vec, s_radius, mc_n, rng)
    z_alpha = float(sstats.norm.ppf(alpha))
    arg = z_alpha + const / sigma1 * m.value
    power = float(sstats.norm.cdf(arg))
    dpower = float(sstats.norm.pdf(arg)) * const / sigma1 * m.se
    return MCEstimate(power, dpower)


@dataclass(frozen=True)
class LocalPowerReport:
    """Cross-validation of the limiting-power formula against simulation.

    Both candidate drift constants are evaluated: r^2/4 (the stated constant)
    and pq (the bare quadratic-drift coefficient).
    """

    h_vec: np.ndarray
    d: int
    s_radius: float
    p: float
    alpha: float
    k: int
    n_total: float
    n_iterations: int
    second_moment: MCEstimate
    sigma1: float
    predicted_rsq4: MCEstimate
    predicted_pq: MCEstimate
    empirical: MCEstimate


def local_power_crosscheck(h_vec, d: int, s_radius: float, p: float, alpha: float,
                           n1_mean: float, n2_mean: float, n_iterations: int,
                           constants: FunctionalConstants, mc_n: int = 500_000,
                           seed: int = 0) -> LocalPowerReport:
    """Empirical power of the 1-NN test at shift h * N^(-1/4) versus the
    theoretical limiting power under each candidate constant."""
    h_vec = np.atleast_1d(np.asarray(h_vec, float))
    rng = SeededRng(seed)
    kind = GraphKind.knn(1)
    n_total = float(n1_mean + n2_mean)
    sigma1 = float(np.sqrt(sigma_null_sq(kind, constants, p)))
    pred_r = _local_power_with_constant(h_vec, alpha, p, sigma1, s_radius, d,
                                        mc_n, rng.substream(1), "rsq4")
    pred_pq = _local_power_with_constant(h_vec, alpha, p, sigma1, s_radius, d,
                                         mc_n, rng.substream(1), "pq")
    m = _second_moment_along(h_vec, s_radius, mc_n, rng.substream(1))
    shift = h_vec * n_total ** (-0.25)
    f, g = truncated_normal(np.zeros(d), s_radius), truncated_normal(shift, s_radius)
    sigma_sq = sigma_null_sq(kind, constants, p)
    z_alpha = float(sstats.norm.ppf(alpha))
    rejects = np.empty(n_iterations)
    for it in range(n_iterations):
        sample = sample_poissonized_pair(n1_mean, n2_mean, f, g, rng.substream(2, it))
        graph = kind.build(sample.cloud)
        t = cross_count(graph, sample)
        center = (n1_mean * n2_mean / n_total**2) * null_edge_count(kind, n_total)
        z = (t - center) / np.sqrt(n_total * sigma_sq)
        rejects[it] = float(z <= z_alpha)
    phat = float(rejects.mean())
    emp = MCEstimate(phat, binomial_se(phat, n_iterations))
    return LocalPowerReport(h_vec, d, s_radius, p, alpha, 1, n_total,
                            n_iterations, m, sigma1, pred_r, pred_pq, emp)


LOCAL_POWER_CSV_HEADER = ("quantity,value,se")


def write_local_power_csv(path, rep: LocalPowerReport) -> None:
    rows = [
        ("empirical_power", rep.empirical.value, rep.empirical.se),
        ("predicted_power_rsq4", rep.predicted_rsq4.value, rep.predicted_rsq4.se),
        ("predicted_power_pq", rep.predicted_pq.value, rep.predicted_pq.se),
        ("second_moment_hx", rep.second_moment.value, rep.second_moment.se),
        ("sigma1", rep.sigma1, 0.0),
        ("n_total", rep.n_total, 0.0),
        ("alpha", rep.alpha, 0.0),
        ("p", rep.p, 0.0),
    ]
    lines = [LOCAL_POWER_CSV_HEADER]
    lines += ["%s,%.10g,%.10g" % r for r in rows]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
