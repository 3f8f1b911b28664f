"""Partition families: exactness oracles, soundness properties, law checks."""

import math

import numpy as np
import pytest
from scipy import stats

from padsmooth.geometry import greedy_net
from padsmooth.partitions import (
    CONTAINED,
    CUT,
    OFF_SUPPORT,
    BallCarvingPartition,
    CubePartition,
    ball_assign,
    ball_cell_anchor,
    ball_cell_member,
    cell_anchor,
    cell_of,
    cells_of,
    certificate_margins,
    cube_margins,
    estimate_lipschitz_constant,
    estimate_paddedness,
    load_partition,
    padding_certificate,
    partition_from_dict,
    partition_to_dict,
    resample_ball_carving,
    sample_ball_carving,
    sample_cube_partition,
    save_partition,
    wilson_interval,
)
from padsmooth.rng import stream


def _rand_ball(rng, n, d, radius):
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * rng.random((n, 1)) ** (1.0 / d)


# ---------------------------------------------------------------------------
# cube lattice


def test_cube_width_gives_cell_diameter_epsilon():
    part = sample_cube_partition(4, 2.0, stream(5, 0))
    assert part.width * math.sqrt(4) == pytest.approx(2.0)
    # opposite corners of one cell are exactly epsilon apart
    corner_gap = math.sqrt(4 * part.width**2)
    assert corner_gap == pytest.approx(part.epsilon)


def test_cube_cells_floor_convention():
    part = CubePartition(epsilon=math.sqrt(2.0), dim=2, shift=np.array([0.25, 0.5]))
    assert part.width == pytest.approx(1.0)
    assert cell_of(part, np.array([0.25, 0.5])) == (0, 0)
    assert cell_of(part, np.array([1.2499999, 0.5])) == (0, 0)
    assert cell_of(part, np.array([1.25, 0.5])) == (1, 0)
    assert cell_of(part, np.array([-0.75, 0.4])) == (-1, -1)


def test_cube_margin_matches_hand_computation():
    part = CubePartition(epsilon=math.sqrt(2.0), dim=2, shift=np.zeros(2))
    pts = np.array([[0.3, 0.6], [0.95, 0.5]])
    # offsets u are the coordinates themselves; margin = min(u, 1-u) over axes
    expect = [min(0.3, 0.7, 0.6, 0.4), min(0.95, 0.05, 0.5, 0.5)]
    got = cube_margins(part, pts)
    assert got == pytest.approx(expect)


def test_cube_certificate_exact_both_directions():
    rng = stream(5, 1)
    part = sample_cube_partition(3, 1.0, rng)
    X = rng.random((50, 3)) * 2.0
    margins, off = certificate_margins(part, X)
    assert not off.any()
    for i in range(len(X)):
        m = margins[i]
        cert = padding_certificate(part, X[i], m)
        assert cert.status == CONTAINED  # containment holds at the margin itself
        assert padding_certificate(part, X[i], m + 1e-9).status == CUT
        home = cell_of(part, X[i])
        # random perturbations strictly inside the certified radius stay home
        probes = X[i] + _rand_ball(rng, 200, 3, m * 0.999)
        assert all(cell_of(part, p) == home for p in probes)
        # and pushing past the tightest face escapes
        u = (X[i] - part.shift) % part.width
        j = int(np.argmin(np.minimum(u, part.width - u)))
        step = -(u[j] + 1e-6) if u[j] <= part.width - u[j] else (part.width - u[j]) + 1e-6
        out = X[i].copy()
        out[j] += step
        assert cell_of(part, out) != home


def test_cube_paddedness_matches_closed_form():
    # P[B_t(x) cut] = 1 - (1 - 2t/w)^d for 2t <= w, independent of x
    d, eps, frac = 2, 1.0, 0.1
    w = eps / math.sqrt(d)
    t = frac * w
    oracle = 1.0 - (1.0 - 2.0 * t / w) ** d
    est = estimate_paddedness(
        lambda r: sample_cube_partition(d, eps, r),
        lambda r: r.random(d) * 3.0,
        t,
        4000,
        stream(5, 2),
    )
    assert est.ci_low <= oracle <= est.ci_high
    assert est.value == pytest.approx(oracle, abs=0.03)


def test_cube_shift_is_uniform():
    draws = np.array([sample_cube_partition(2, 1.0, stream(5, 3, i)).shift for i in range(400)])
    w = 1.0 / math.sqrt(2)
    for axis in range(2):
        ks = stats.kstest(draws[:, axis] / w, "uniform")
        assert ks.pvalue > 1e-3


def test_cube_rejects_bad_construction():
    with pytest.raises(ValueError):
        sample_cube_partition(0, 1.0, stream(5, 4))
    with pytest.raises(ValueError):
        sample_cube_partition(2, -1.0, stream(5, 4))
    with pytest.raises(ValueError):
        CubePartition(epsilon=1.0, dim=2, shift=np.array([0.9, 0.0]))  # >= width


# ---------------------------------------------------------------------------
# ball carving


def _small_carving(seed, n_centers=25, d=2, eps=0.8):
    rng = stream(seed, 10)
    pts = rng.random((600, d)) * 2.0
    net = greedy_net(pts, eps / 4.0)
    part = sample_ball_carving(net, eps, rng)
    return part, rng


def brute_assign(part, x):
    """Reference implementation straight from the construction."""
    centers = part.net.centers
    for idx in part.order:
        if np.linalg.norm(x - centers[idx]) <= part.radius:
            return int(idx), False
    dists = np.linalg.norm(centers - x, axis=1)
    return int(np.argmin(dists)), True


def brute_margin(part, x):
    centers = part.net.centers
    cell, off = brute_assign(part, x)
    if off:
        return 0.0
    m = part.radius - np.linalg.norm(x - centers[cell])
    rank = int(np.where(part.order == cell)[0][0])
    for k in range(rank):
        w = centers[part.order[k]]
        m = min(m, np.linalg.norm(x - w) - part.radius)
    return float(m)


def test_ball_assign_matches_brute_force():
    part, rng = _small_carving(6)
    X = rng.random((300, 2)) * 2.4 - 0.2  # includes off-support fringe
    cells, off, margins = ball_assign(part, X)
    for i in range(len(X)):
        c, o = brute_assign(part, X[i])
        assert cells[i] == c
        assert off[i] == o
        assert margins[i] == pytest.approx(brute_margin(part, X[i]), abs=1e-12)


def test_ball_certificate_sound_under_perturbation():
    part, rng = _small_carving(7)
    X = rng.random((80, 2)) * 2.0
    cells, off, margins = ball_assign(part, X)
    keep = (~off) & (margins > 1e-3)
    idx = np.flatnonzero(keep)[:30]
    for i in idx:
        probes = X[i] + _rand_ball(rng, 300, 2, margins[i])
        pc, poff, _ = ball_assign(part, probes)
        assert not poff.any()
        assert (pc == cells[i]).all()


def test_ball_cells_have_bounded_diameter():
    part, rng = _small_carving(8)
    X = rng.random((2000, 2)) * 2.0
    cells, off, _ = ball_assign(part, X)
    for c in np.unique(cells[~off]):
        member = X[(cells == c) & (~off)]
        if len(member) < 2:
            continue
        spread = np.linalg.norm(member[:, None, :] - member[None, :, :], axis=-1).max()
        assert spread <= 2 * part.radius + 1e-12
        assert spread <= part.epsilon + 1e-12
        # members sit inside the carved ball
        assert (np.linalg.norm(member - part.net.centers[c], axis=1) <= part.radius + 1e-12).all()


def test_ball_off_support_fallback():
    part, _ = _small_carving(9)
    far = np.array([50.0, 50.0])
    cert = padding_certificate(part, far, 0.01)
    assert cert.status == OFF_SUPPORT
    assert cert.margin == 0.0
    cells, off, _ = ball_assign(part, far[None, :])
    assert off[0]
    nearest = int(np.argmin(np.linalg.norm(part.net.centers - far, axis=1)))
    assert cells[0] == nearest
    assert not ball_cell_member(part, cells[0], far[None, :])[0]


def test_ball_radius_law_and_resample():
    eps = 0.8
    part, _ = _small_carving(11, eps=eps)
    radii, orders = [], []
    for i in range(400):
        p = resample_ball_carving(part, stream(11, 20, i))
        assert p.net is part.net
        radii.append(p.radius)
        orders.append(tuple(p.order.tolist()))
    radii = np.asarray(radii)
    assert (radii > eps / 4.0).all() and (radii <= eps / 2.0).all()
    ks = stats.kstest((radii - eps / 4.0) / (eps / 4.0), "uniform")
    assert ks.pvalue > 1e-3
    assert len(set(orders)) > 390  # essentially always a fresh permutation


def test_ball_ranks_invert_order():
    part, _ = _small_carving(12)
    assert np.array_equal(part.ranks[part.order], np.arange(len(part.net)))


def test_ball_rejects_mismatched_net():
    rng = stream(13, 0)
    net = greedy_net(rng.random((200, 2)), 0.1)
    with pytest.raises(ValueError):
        sample_ball_carving(net, 1.0, rng)  # spacing 0.1 != 0.25
    with pytest.raises(ValueError):
        BallCarvingPartition(net=net, epsilon=0.4, radius=0.05, order=np.arange(len(net)))
    with pytest.raises(ValueError):
        BallCarvingPartition(net=net, epsilon=0.4, radius=0.15,
                             order=np.zeros(len(net), dtype=np.int64))


# ---------------------------------------------------------------------------
# estimators


def test_lattice_separation_probability_1d():
    # closed form for a unit-width 1-D lattice: P[split at distance s] = min(1, s)
    family = lambda r: sample_cube_partition(1, 1.0, r)
    pair = lambda r, dist: ((x := r.random(1) * 5.0), x + dist)
    dists = [0.2, 0.4, 0.8]
    curve = estimate_lipschitz_constant(family, pair, dists, 2500, stream(14, 0), epsilon=1.0)
    for dist, p, lo, hi in curve.points:
        assert lo <= min(1.0, dist) <= hi
    assert curve.slope == pytest.approx(1.0, abs=0.08)


def test_estimate_paddedness_validation():
    family = lambda r: sample_cube_partition(1, 1.0, r)
    data = lambda r: r.random(1)
    with pytest.raises(ValueError):
        estimate_paddedness(family, data, -0.1, 10, stream(15, 0))
    with pytest.raises(ValueError):
        estimate_paddedness(family, data, 0.1, 0, stream(15, 0))


def test_wilson_interval_coverage():
    # the interval should cover the true p about 95% of the time
    p, n = 0.3, 200
    rng = stream(16, 0)
    hits = 0
    for _ in range(1500):
        k = rng.binomial(n, p)
        lo, hi = wilson_interval(k, n)
        hits += lo <= p <= hi
    assert 0.93 <= hits / 1500 <= 0.98


def test_wilson_interval_edges():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and hi < 0.12
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and lo > 0.88
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("family", ["cube", "ball"])
def test_partition_roundtrip(family, tmp_path):
    rng = stream(17, 0)
    if family == "cube":
        part = sample_cube_partition(3, 0.7, rng)
        X = rng.random((100, 3))
    else:
        part, _ = _small_carving(17)
        X = rng.random((100, 2)) * 2.0
    back = partition_from_dict(partition_to_dict(part))
    assert np.array_equal(cells_of(part, X), cells_of(back, X))
    m1, o1 = certificate_margins(part, X)
    m2, o2 = certificate_margins(back, X)
    assert np.array_equal(m1, m2) and np.array_equal(o1, o2)
    path = tmp_path / "part.json"
    save_partition(path, part)
    disk = load_partition(path)
    assert np.array_equal(cells_of(part, X), cells_of(disk, X))


def test_partition_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        partition_from_dict({"family": "triangles"})


def test_cell_anchor_lands_in_cell():
    part = sample_cube_partition(2, 1.0, stream(18, 0))
    x = np.array([0.7, -0.3])
    cell = cell_of(part, x)
    assert cell_of(part, cell_anchor(part, cell)) == cell
    bpart, _ = _small_carving(18)
    c = cell_of(bpart, bpart.net.centers[3])
    anchor = ball_cell_anchor(bpart, c)
    # a center is always captured by its own or an earlier ball
    assert np.linalg.norm(anchor - bpart.net.centers[c]) <= bpart.radius + 1e-12
