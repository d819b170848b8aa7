"""Samplers: reproducibility, moments, the two equivalent Poissonized
constructions, torus processes, truncated normals."""

import numpy as np
import pytest
from scipy import stats as sstats

from geomtest import (
    InvalidParameterError,
    SeededRng,
    gaussian,
    load_labeled_csv,
    sample_poisson_torus,
    sample_poissonized_pair,
    sample_pooled_labeled,
    sample_truncated_normal,
    save_labeled_csv,
    truncated_normal,
    uniform_box,
)
from geomtest.stats import label_probability


def test_identical_seeds_bit_identical():
    f, g = uniform_box(2), uniform_box(2)
    rng = SeededRng(123, stream_id=4)
    a = sample_poissonized_pair(100, 80, f, g, rng)
    b = sample_poissonized_pair(100, 80, f, g, rng)
    np.testing.assert_array_equal(a.cloud.points, b.cloud.points)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_distinct_streams_differ():
    f, g = uniform_box(2), uniform_box(2)
    a = sample_poissonized_pair(100, 80, f, g, SeededRng(123, stream_id=0))
    b = sample_poissonized_pair(100, 80, f, g, SeededRng(123, stream_id=1))
    assert len(a.cloud) != len(b.cloud) or not np.array_equal(a.cloud.points, b.cloud.points)


def test_poissonized_pair_count_moments():
    """Mean of n1 over replicates within 3 * sqrt(mean / reps) of its target."""
    f, g = uniform_box(1), uniform_box(1)
    reps = 2000
    n1 = np.array([sample_poissonized_pair(1500, 1000, f, g, SeededRng(5).substream(i)).n1
                   for i in range(reps)])
    assert abs(n1.mean() - 1500) < 3 * np.sqrt(1500 / reps)


def test_pooled_label_probability_collapses_under_null():
    f = uniform_box(3)
    pts = np.random.default_rng(0).random((50, 3))
    w = label_probability(pts, f, f, 600, 400)
    np.testing.assert_allclose(w, 0.6)


def test_pooled_labels_deterministic_on_disjoint_supports():
    f = gaussian(np.zeros(1))
    g = gaussian(np.full(1, 50.0))
    s = sample_pooled_labeled(100, 100, f, g, SeededRng(6))
    left = s.cloud.points[:, 0] < 25.0
    assert np.all(s.labels[left] == 1) and np.all(s.labels[~left] == 2)


def test_constructions_agree_in_law_quick():
    """Label-count and cross-count means of the two constructions agree."""
    from geomtest import GraphKind, cross_count

    f = truncated_normal(np.zeros(2), 6.0)
    g = truncated_normal(np.full(2, 0.7), 6.0)
    reps = 400
    kind = GraphKind.knn(1)

    def stats_for(sampler, stream):
        n1 = np.empty(reps)
        t = np.empty(reps)
        for i in range(reps):
            s = sampler(150, 100, f, g, SeededRng(7, stream_id=stream).substream(i))
            n1[i] = s.n1
            t[i] = cross_count(kind.build(s.cloud), s)
        return n1, t

    n1a, ta = stats_for(sample_poissonized_pair, 0)
    n1b, tb = stats_for(sample_pooled_labeled, 1)
    for a, b in ((n1a, n1b), (ta, tb)):
        se = np.sqrt(a.var(ddof=1) / reps + b.var(ddof=1) / reps)
        assert abs(a.mean() - b.mean()) < 3 * se


def test_torus_process_moments():
    counts = np.array([len(sample_poisson_torus(1.0, 10.0, 2, SeededRng(8).substream(i)))
                       for i in range(2000)])
    assert abs(counts.mean() - 100) < 3 * np.sqrt(100 / 2000)
    assert 0.9 < counts.var(ddof=1) / counts.mean() < 1.1


def test_torus_disjoint_boxes_independent():
    reps = 2000
    a = np.empty(reps)
    b = np.empty(reps)
    for i in range(reps):
        pts = sample_poisson_torus(1.0, 10.0, 2, SeededRng(9).substream(i)).points
        a[i] = np.sum((pts[:, 0] < 3) & (pts[:, 1] < 3))
        b[i] = np.sum((pts[:, 0] > 7) & (pts[:, 1] > 7))
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 3 / np.sqrt(reps)


def test_torus_guards():
    with pytest.raises(InvalidParameterError):
        sample_poisson_torus(0.001, 1.0, 2, SeededRng(0))
    from geomtest import ResourceLimitError

    with pytest.raises(ResourceLimitError):
        sample_poisson_torus(1.0, 1e5, 2, SeededRng(0))


def test_truncated_normal_support_and_symmetry():
    cloud = sample_truncated_normal(np.zeros(3), 2.0, 4000, SeededRng(10))
    r = np.sqrt((cloud.points**2).sum(axis=1))
    assert np.all(r <= 2.0)
    se = cloud.points.std(axis=0, ddof=1) / np.sqrt(len(cloud))
    assert np.all(np.abs(cloud.points.mean(axis=0)) < 3 * se)


def test_truncated_normal_acceptance_rate_matches_chisq():
    """Acceptance fraction of the rejection sampler vs the noncentral
    chi-square ball mass."""
    mu = np.array([1.0, 0.5])
    radius = 2.0
    target = sstats.ncx2.cdf(radius**2, df=2, nc=(mu**2).sum())
    gen = SeededRng(11).generator()
    n = 200_000
    cand = gen.standard_normal((n, 2)) + mu
    acc = np.mean((cand**2).sum(axis=1) <= radius**2)
    assert abs(acc - target) < 3 * np.sqrt(target * (1 - target) / n)


def test_truncated_normal_acceptance_floor():
    with pytest.raises(InvalidParameterError):
        truncated_normal(np.full(2, 30.0), 1.0)


@pytest.mark.parametrize("dens,box_lo,box_hi", [
    (uniform_box(2, 1.0), 0.0, 1.0),
    (gaussian(np.zeros(2)), -8.0, 8.0),
    (truncated_normal(np.array([0.3, 0.0]), 3.0), -3.0, 3.0),
])
def test_density_normalization_by_mc(dens, box_lo, box_hi):
    """MC integral of the evaluator over uniform proposals within 1%."""
    gen = SeededRng(12).generator()
    n = 1_000_000
    pts = gen.random((n, 2)) * (box_hi - box_lo) + box_lo
    vol = (box_hi - box_lo) ** 2
    integral = dens.pdf(pts).mean() * vol
    assert integral == pytest.approx(1.0, abs=0.01)


def test_labeled_csv_roundtrip(tmp_path):
    f, g = uniform_box(2), uniform_box(2)
    s = sample_poissonized_pair(40, 30, f, g, SeededRng(13))
    path = tmp_path / "sample.csv"
    save_labeled_csv(path, s)
    assert open(path).readline().strip() == "x1,x2,label"
    back = load_labeled_csv(path)
    np.testing.assert_array_equal(back.labels, s.labels)
    np.testing.assert_allclose(back.cloud.points, s.cloud.points)


def test_nonpositive_means_rejected():
    f, g = uniform_box(2), uniform_box(2)
    with pytest.raises(InvalidParameterError):
        sample_poissonized_pair(0, 10, f, g, SeededRng(0))
    with pytest.raises(InvalidParameterError):
        sample_pooled_labeled(10, -1, f, g, SeededRng(0))
