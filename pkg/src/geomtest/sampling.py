"""Random inputs: Poissonized two-sample data (both equivalent constructions),
homogeneous Poisson processes on a torus, and truncated-normal location
families.

Every sampler is a pure function of a :class:`SeededRng` value: calling it
twice with the same SeededRng returns bit-identical output. Distinct
substreams are independent-quality (numpy SeedSequence hashing), so
replicate loops pass ``rng.substream(i)`` for replicate i.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sstats

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    ResourceLimitError,
)
from .geom import PointCloud

_MAX_EXPECTED_COUNT = 1e8


@dataclass(frozen=True)
class SeededRng:
    """Reproducible RNG handle: (base_seed, stream_id) plus a substream path."""

    base_seed: int
    stream_id: int = 0
    path: tuple = field(default=())

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.base_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.default_rng(seq)

    def substream(self, *indices: int) -> "SeededRng":
        return replace(self, path=self.path + tuple(int(i) for i in indices))


@dataclass(frozen=True)
class Density:
    """A normalized density with an evaluator and a sampler.

    tags: uniform_box(dim, side) | gaussian(mu) | truncated_normal(mu, radius).
    The gaussian tag has unbounded support and is provided for empirical
    exploration only.
    """

    tag: str
    dim: int
    side: float = 0.0
    mu: np.ndarray | None = None
    radius: float = 0.0

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        if self.tag == "uniform_box":
            inside = np.all((x >= 0.0) & (x <= self.side), axis=1)
            return inside / self.side**self.dim
        if self.tag == "gaussian":
            sq = ((x - self.mu) ** 2).sum(axis=1)
            return np.exp(-0.5 * sq) / (2.0 * np.pi) ** (self.dim / 2.0)
        if self.tag == "truncated_normal":
            sq = ((x - self.mu) ** 2).sum(axis=1)
            inside = (x * x).sum(axis=1) <= self.radius**2
            mass = _ball_mass(self.mu, self.radius)
            norm = (2.0 * np.pi) ** (self.dim / 2.0) * mass
            return np.where(inside, np.exp(-0.5 * sq) / norm, 0.0)
        raise InvalidParameterError(f"unknown density tag {self.tag!r}")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.tag == "uniform_box":
            return rng.random((count, self.dim)) * self.side
        if self.tag == "gaussian":
            return rng.standard_normal((count, self.dim)) + self.mu
        if self.tag == "truncated_normal":
            return _rejection_ball(rng, self.mu, self.radius, count)
        raise InvalidParameterError(f"unknown density tag {self.tag!r}")


def uniform_box(dim: int, side: float = 1.0) -> Density:
    if side <= 0:
        raise InvalidParameterError("side must be positive")
    return Density("uniform_box", int(dim), side=float(side))


def gaussian(mu) -> Density:
    mu = np.atleast_1d(np.asarray(mu, float))
    return Density("gaussian", mu.shape[0], mu=mu)


def truncated_normal(mu, radius: float) -> Density:
    """Standard normal with mean mu conditioned on the ball B(0, radius)."""
    mu = np.atleast_1d(np.asarray(mu, float))
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    acc = _ball_mass(mu, float(radius))
    if acc < 1e-3:
        raise InvalidParameterError(
            f"rejection acceptance probability {acc:.2e} below the 1e-3 floor"
        )
    return Density("truncated_normal", mu.shape[0], mu=mu, radius=float(radius))


def _ball_mass(mu: np.ndarray, radius: float) -> float:
    """P(N(mu, I) in B(0, radius)); ||X||^2 is noncentral chi-square."""
    d = mu.shape[0]
    nc = float((mu * mu).sum())
    if nc == 0.0:
        return float(sstats.chi2.cdf(radius**2, df=d))
    return float(sstats.ncx2.cdf(radius**2, df=d, nc=nc))


def _rejection_ball(rng: np.random.Generator, mu: np.ndarray, radius: float, count: int) -> np.ndarray:
    d = mu.shape[0]
    acc = max(_ball_mass(mu, radius), 1e-3)
    out = np.empty((count, d))
    got = 0
    while got < count:
        m = max(64, int((count - got) / acc * 1.2))
        cand = rng.standard_normal((m, d)) + mu
        keep = cand[(cand * cand).sum(axis=1) <= radius * radius]
        take = min(len(keep), count - got)
        out[got : got + take] = keep[:take]
        got += take
    return out


@dataclass(frozen=True)
class LabeledSample:
    """Pooled point cloud plus per-point sample label in {1, 2}.

    n1_mean / n2_mean record the Poisson intensities the sample was drawn
    with (they default to the realized counts when data arrives from a file).
    """

    cloud: PointCloud
    labels: np.ndarray
    n1_mean: float
    n2_mean: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape[0] != len(self.cloud):
            raise InvalidInputError("labels length must equal cloud size")
        if labels.size and not np.all((labels == 1) | (labels == 2)):
            raise InvalidInputError("labels must take values in {1, 2}")
        object.__setattr__(self, "labels", labels)

    @property
    def n1(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n2(self) -> int:
        return int(np.sum(self.labels == 2))

    @property
    def pooled_mean(self) -> float:
        return self.n1_mean + self.n2_mean


def sample_poissonized_pair(n1_mean: float, n2_mean: float, f: Density, g: Density,
                            rng: SeededRng) -> LabeledSample:
    """Poisson(n1_mean) points from f labeled 1, pooled with Poisson(n2_mean)
    points from g labeled 2."""
    if n1_mean <= 0 or n2_mean <= 0:
        raise InvalidParameterError("Poisson means must be positive")
    if f.dim != g.dim:
        raise InvalidInputError("f and g must share a dimension")
    gen = rng.generator()
    l1 = int(gen.poisson(n1_mean))
    l2 = int(gen.poisson(n2_mean))
    pts = np.empty((l1 + l2, f.dim))
    if l1:
        pts[:l1] = f.sample(gen, l1)
    if l2:
        pts[l1:] = g.sample(gen, l2)
    labels = np.concatenate([np.ones(l1, np.int64), np.full(l2, 2, np.int64)])
    return LabeledSample(PointCloud(pts), labels, float(n1_mean), float(n2_mean))


def sample_pooled_labeled(n1_mean: float, n2_mean: float, f: Density, g: Density,
                          rng: SeededRng) -> LabeledSample:
    """Equal-in-law construction: Poisson(n1_mean + n2_mean) points from the
    mixture (n1_mean*f + n2_mean*g)/N, each labeled 1 with probability
    n1_mean*f(z) / (n1_mean*f(z) + n2_mean*g(z))."""
    if n1_mean <= 0 or n2_mean <= 0:
        raise InvalidParameterError("Poisson means must be positive")
    if f.dim != g.dim:
        raise InvalidInputError("f and g must share a dimension")
    gen = rng.generator()
    total = n1_mean + n2_mean
    ln = int(gen.poisson(total))
    pts = np.empty((ln, f.dim))
    from_f = gen.random(ln) < n1_mean / total
    nf = int(from_f.sum())
    if nf:
        pts[from_f] = f.sample(gen, nf)
    if ln - nf:
        pts[~from_f] = g.sample(gen, ln - nf)
    wf = n1_mean * f.pdf(pts)
    wg = n2_mean * g.pdf(pts)
    tot = wf + wg
    if np.any(tot <= 0.0):
        raise NumericalError("drawn point where both densities vanish")
    labels = np.where(gen.random(ln) < wf / tot, 1, 2).astype(np.int64)
    return LabeledSample(PointCloud(pts), labels, float(n1_mean), float(n2_mean))


def sample_poisson_torus(intensity: float, side: float, d: int, rng: SeededRng) -> PointCloud:
    """Homogeneous Poisson process on the flat torus [0, side)^d."""
    expected = intensity * side**d
    if expected < 1.0:
        raise InvalidParameterError("intensity * side^d must be at least 1")
    if expected > _MAX_EXPECTED_COUNT:
        raise ResourceLimitError(f"expected count {expected:.3g} exceeds {_MAX_EXPECTED_COUNT:.0e}")
    gen = rng.generator()
    n = int(gen.poisson(expected))
    return PointCloud(gen.random((max(n, 0), d)) * side)


def sample_truncated_normal(mu, radius: float, count_mean: float, rng: SeededRng) -> PointCloud:
    """Poisson(count_mean) i.i.d. draws from N(mu, I) conditioned on B(0, radius)."""
    if count_mean <= 0:
        raise InvalidParameterError("count_mean must be positive")
    dens = truncated_normal(mu, radius)
    gen = rng.generator()
    n = int(gen.poisson(count_mean))
    return PointCloud(dens.sample(gen, n) if n else np.empty((0, dens.dim)))


def save_labeled_csv(path, sample: LabeledSample) -> None:
    """Header `x1,...,xd,label`, one row per point, label in {1, 2}."""
    d = sample.cloud.dim
    header = ",".join(f"x{i+1}" for i in range(d)) + ",label"
    data = np.column_stack([sample.cloud.points, sample.labels.astype(float)])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def load_labeled_csv(path) -> LabeledSample:
    """Read `x1,...,xd,label` CSV; a header row is detected and skipped.

    n1_mean/n2_mean are set to the realized counts.
    """
    with open(path) as fh:
        first = fh.readline()
    skip = 1 if any(c.isalpha() for c in first) else 0
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[1] < 2:
        raise InvalidInputError("labeled CSV needs at least one coordinate and a label")
    labels = data[:, -1].astype(np.int64)
    cloud = PointCloud(data[:, :-1])
    n1 = float(np.sum(labels == 1))
    n2 = float(np.sum(labels == 2))
    if n1 == 0 or n2 == 0:
        raise InvalidInputError("each label in {1, 2} must occur at least once")
    return LabeledSample(cloud, labels, n1, n2)
