"""Synthetic tasks: support, ground truth, separation costs, planted errors."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from padsmooth.partitions import wilson_interval
from padsmooth.rng import stream
from padsmooth.tasks import (
    BlackBoxClassifier,
    central_blindspot_classifier,
    concentric_spheres_task,
    hard_distribution_task,
    intersecting_circles_task,
    left_disc_indicator,
    optimal_robust_classifier,
    plant_error_classifier,
    sphere_packing,
    two_discs_task,
)


def measured_risk(task, clf, n, rng):
    X, y = task.sample(rng, n)
    return float(np.mean(clf(X) != y))


# ---------------------------------------------------------------------------
# concentric spheres


def test_spheres_support_and_truth():
    task = concentric_spheres_task(6)
    X, y = task.sample(stream(20, 0), 4000)
    norms = np.linalg.norm(X, axis=1)
    assert np.allclose(norms[y < 0], 1.0)
    assert np.allclose(norms[y > 0], 1.3)
    assert np.array_equal(task.ground_truth(X), y)
    assert 0.4 < np.mean(y > 0) < 0.6
    assert task.metadata["manifold_dim"] == 5


def test_spheres_separation_step():
    task = concentric_spheres_task(4)
    assert task.separation(0.0) == 0.0
    assert task.separation(0.299) == 0.0
    assert task.separation(0.3) == 0.5
    assert task.separation(1.0) == 0.5
    assert task.separation_threshold == pytest.approx(0.3)
    with pytest.raises(ValueError):
        task.separation(-0.1)


# ---------------------------------------------------------------------------
# intersecting circles


def test_circles_support_truth_and_ambient_embedding():
    for dim in (2, 7):
        task = intersecting_circles_task(dim)
        X, y = task.sample(stream(20, 1, dim), 3000)
        assert X.shape == (3000, dim)
        if dim > 2:
            assert np.allclose(X[:, 2:], 0.0)
        r_minus = np.linalg.norm(X[:, :2], axis=1)
        r_plus = np.linalg.norm(X[:, :2] - np.array([1.0, 0.0]), axis=1)
        assert np.allclose(np.where(y < 0, r_minus, r_plus), 1.0)
        # truth agrees with labels except possibly on the measure-zero tie set
        assert np.mean(task.ground_truth(X) == y) > 0.999


def test_circles_separation_linear_oracle():
    # tangents cross at 60 degrees, so trimming arcs of half-width ~eps around
    # each of the two crossings achieves eps-separation: S(eps) ~ 2 eps / pi
    task = intersecting_circles_task(2)
    for eps in (0.05, 0.1, 0.2):
        s = task.separation(eps)
        assert s == pytest.approx(2.0 * eps / math.pi, rel=0.12)
    assert task.separation(0.01) < task.separation(0.1) < task.separation(0.3)


def test_circles_separation_is_sound_on_independent_grid():
    # rebuild the trimmed sets on a differently-sized grid and check they
    # really are eps-separated
    task = intersecting_circles_task(2)
    eps = 0.15
    half = task.separation(eps) * math.pi / 2.0
    grid = np.linspace(0.0, 2 * math.pi, 33331, endpoint=False)

    def wrap(a):
        return np.mod(a + math.pi, 2 * math.pi) - math.pi

    keep_m = np.minimum(np.abs(wrap(grid - math.pi / 3)), np.abs(wrap(grid + math.pi / 3))) > half
    keep_p = np.minimum(np.abs(wrap(grid - 2 * math.pi / 3)), np.abs(wrap(grid + 2 * math.pi / 3))) > half
    a = np.stack([np.cos(grid[keep_m]), np.sin(grid[keep_m])], axis=1)
    b = np.stack([np.cos(grid[keep_p]) + 1.0, np.sin(grid[keep_p])], axis=1)
    dmin = cKDTree(b).query(a, k=1)[0].min()
    assert dmin >= eps * 0.99


def test_circles_boundary_metadata():
    task = intersecting_circles_task(5)
    bp = task.metadata["boundary_points"]
    assert bp.shape == (2, 5)
    r_minus = np.linalg.norm(bp[:, :2], axis=1)
    r_plus = np.linalg.norm(bp[:, :2] - np.array([1.0, 0.0]), axis=1)
    assert np.allclose(r_minus, 1.0) and np.allclose(r_plus, 1.0)


# ---------------------------------------------------------------------------
# two discs


def test_discs_support_and_truth():
    task = two_discs_task()
    X, y = task.sample(stream(20, 2), 4000)
    centers = np.where(y[:, None] < 0, [-2.0, 0.0], [2.0, 0.0])
    assert (np.linalg.norm(X - centers, axis=1) <= 1.0 + 1e-12).all()
    assert np.array_equal(task.ground_truth(X), y)


def test_discs_separation_segment_oracle():
    task = two_discs_task()
    assert task.separation(1.9) == 0.0
    assert task.separation(2.0) == 0.0
    for eps in (2.5, 3.0):
        h = (eps - 2.0) / 2.0
        xs = np.linspace(1.0 - h, 1.0, 20001)
        seg = np.trapezoid(2.0 * np.sqrt(np.maximum(0.0, 1.0 - xs**2)), xs)
        assert task.separation(eps) == pytest.approx(seg / math.pi, rel=1e-3)
    assert task.separation(10.0) == 0.5


def test_left_disc_indicator_is_exact():
    task = two_discs_task()
    f = left_disc_indicator()
    assert measured_risk(task, f, 4000, stream(20, 3)) == 0.0
    # off-support points outside the left disc get +1
    assert f(np.array([[0.0, 5.0]]))[0] == 1
    assert f(np.array([[-2.0, 0.0]]))[0] == -1


# ---------------------------------------------------------------------------
# hard distribution


def test_sphere_packing_respects_separation():
    rng = stream(20, 4)
    pts, used = sphere_packing(8, 1.0, 1.2, 30, 50000, rng)
    assert used <= 50000
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    n = len(pts)
    gaps = [
        np.linalg.norm(pts[i] - pts[j])
        for i in range(n)
        for j in range(i + 1, n)
    ]
    assert min(gaps) >= 1.2


def test_hard_distribution_metadata_and_truth():
    task = hard_distribution_task(12, 1.0, stream(20, 5), packing_trials=50000)
    md = task.metadata
    assert md["eps"] == pytest.approx(math.sqrt(12 / 10.0))
    k = md["packing_achieved"]
    assert k == len(md["packing_centers"])
    ratio = md["density_ratio"]
    assert ratio == pytest.approx(math.exp(0.108 * 12))
    assert md["base_risk"] == pytest.approx(0.5 * ratio / (ratio + k))
    X, y = task.sample(stream(20, 6), 5000)
    assert np.array_equal(task.ground_truth(X), y)
    assert 0.45 < np.mean(y < 0) < 0.55
    # minus blob sits far out along the first axis
    assert np.allclose(X[y < 0][:, 0], 100.0 * md["eps"], atol=2 * md["blob_radius"])


def test_central_blindspot_risk_matches_exact_value():
    task = hard_distribution_task(12, 1.0, stream(20, 7), packing_trials=50000)
    f = central_blindspot_classifier(task)
    n = 40000
    r = measured_risk(task, f, n, stream(20, 8))
    lo, hi = wilson_interval(int(round(r * n)), n)
    assert lo <= task.metadata["base_risk"] <= hi
    with pytest.raises(ValueError):
        central_blindspot_classifier(two_discs_task())


def test_hard_distribution_rejects_bad_args():
    with pytest.raises(ValueError):
        hard_distribution_task(1, 1.0, stream(20, 9))
    with pytest.raises(ValueError):
        hard_distribution_task(8, -1.0, stream(20, 9))


# ---------------------------------------------------------------------------
# planted errors


@pytest.mark.parametrize("maker,delta", [
    (lambda: concentric_spheres_task(5), 0.05),
    (lambda: concentric_spheres_task(3), 0.1),
    (lambda: intersecting_circles_task(4), 0.05),
    (lambda: two_discs_task(), 0.1),
])
def test_planted_risk_hits_requested_mass(maker, delta):
    task = maker()
    f = plant_error_classifier(task, delta, stream(21, 0))
    assert f.exact_risk == delta
    n = 60000
    r = measured_risk(task, f, n, stream(21, 1))
    lo, hi = wilson_interval(int(round(r * n)), n)
    assert lo <= delta <= hi


def test_planted_zero_is_ground_truth():
    task = concentric_spheres_task(4)
    f = plant_error_classifier(task, 0.0, stream(21, 2))
    X, y = task.sample(stream(21, 3), 2000)
    assert np.array_equal(f(X), y)
    assert f.region == {"kind": "empty"}


def test_planted_rejects_unsupported():
    task = hard_distribution_task(6, 1.0, stream(21, 4), packing_trials=20000)
    with pytest.raises(ValueError):
        plant_error_classifier(task, 0.05, stream(21, 5))
    with pytest.raises(ValueError):
        plant_error_classifier(two_discs_task(), 0.7, stream(21, 5))


# ---------------------------------------------------------------------------
# optimal robust classifiers


def test_optimal_spheres_regimes():
    task = concentric_spheres_task(4)
    below = optimal_robust_classifier(task, 0.14)
    assert below.name == "norm-threshold-1.15"
    assert measured_risk(task, below, 2000, stream(22, 0)) == 0.0
    at = optimal_robust_classifier(task, 0.16)
    assert at.name == "constant-plus"
    r = measured_risk(task, at, 20000, stream(22, 1))
    assert r == pytest.approx(0.5, abs=0.02)


def test_optimal_discs_midline():
    task = two_discs_task()
    clf = optimal_robust_classifier(task, 0.5)
    assert clf.name == "midline"
    assert measured_risk(task, clf, 2000, stream(22, 2)) == 0.0


def test_optimal_unavailable_for_circles():
    with pytest.raises(ValueError):
        optimal_robust_classifier(intersecting_circles_task(2), 0.05)


# ---------------------------------------------------------------------------
# classifier wrapper


def test_blackbox_counts_and_validates():
    calls = []

    def predict(points):
        calls.append(len(points))
        return np.ones(len(points), dtype=np.int8)

    f = BlackBoxClassifier(predict, name="ones")
    f(np.zeros((5, 2)))
    f(np.zeros((3, 2)))
    assert f.eval_count == 8
    bad = BlackBoxClassifier(lambda pts: np.ones(2, dtype=np.int8))
    with pytest.raises(ValueError):
        bad(np.zeros((5, 2)))


def test_task_sample_validation():
    task = two_discs_task()
    with pytest.raises(ValueError):
        task.sample(stream(22, 3), 0)
