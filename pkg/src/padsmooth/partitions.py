"""Random space partitions with bounded diameter and padding certificates.

Two families:

* Cube: an axis-aligned lattice of half-open cubes of side eps/sqrt(d),
  shifted by a uniform random vector. Cell diameter is at most eps. A point
  x sits at per-coordinate offset u_i = (x_i - shift_i) mod width inside its
  cell; the open ball B_t(x) stays inside the cell iff every coordinate
  margin min(u_i, width - u_i) is at least t.

* Ball carving: a net of centers with spacing eps/4 over the data support,
  a shared radius R drawn uniformly from (eps/4, eps/2], and a uniform
  random order on the centers. The cell of a center u is B_R(u) minus the
  balls of all centers earlier in the order; a point belongs to the first
  center in order whose R-ball contains it. Cell diameter is at most
  2R <= eps. The certificate for B_t(x) with assigned center u demands
  d(x, u) <= R - t and d(x, w) >= R + t for every earlier w: then every
  point of the ball is captured by u and by no earlier center.

Both certificates are exact for cube cells and sound-but-conservative for
carved cells (they may say Cut for a ball that is in fact contained, never
the reverse). Points beyond every R-ball of a carving fall back to the
nearest center; their certificate status is OffSupport.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import Array, EpsilonNet, as_points

CONTAINED = "contained"
CUT = "cut"
OFF_SUPPORT = "off_support"

CellId = "tuple[int, ...] | int"


@dataclass(frozen=True)
class PaddingCertificate:
    """Outcome of a containment query for an open ball B_t(x).

    status: contained / cut / off_support.
    margin: largest radius the certificate can vouch for at this point
            (0.0 when off support). status == contained iff margin >= t.
    """

    status: str
    margin: float


@dataclass(frozen=True, eq=False)
class CubePartition:
    """Shifted half-open cube lattice with cell diameter <= epsilon."""

    epsilon: float
    dim: int
    shift: Array  # (d,), entries in [0, width)
    seed: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        s = np.asarray(self.shift, dtype=np.float64)
        if s.shape != (self.dim,):
            raise ValueError(f"shift must have shape ({self.dim},)")
        if (s < 0).any() or (s >= self.width).any():
            raise ValueError("shift entries must lie in [0, width)")
        object.__setattr__(self, "shift", s)

    @property
    def width(self) -> float:
        return self.epsilon / math.sqrt(self.dim)


def sample_cube_partition(dim: int, epsilon: float, rng: np.random.Generator) -> CubePartition:
    """Draw the lattice shift uniformly from [0, width)^d."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    width = epsilon / math.sqrt(dim)
    return CubePartition(epsilon=float(epsilon), dim=int(dim), shift=rng.random(dim) * width)


def cube_cells_of(part: CubePartition, points) -> Array:
    """(n, d) int64 lattice coordinates; half-open cells, floor convention."""
    pts = as_points(points)
    if pts.shape[1] != part.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, partition has {part.dim}")
    return np.floor((pts - part.shift) / part.width).astype(np.int64)


def cube_cell_of(part: CubePartition, x) -> tuple[int, ...]:
    return tuple(int(v) for v in cube_cells_of(part, np.asarray(x, dtype=np.float64)[None, :])[0])


def cube_margins(part: CubePartition, points) -> Array:
    """Per-point distance to the nearest cell face (exact containment radius)."""
    pts = as_points(points)
    if pts.shape[1] != part.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, partition has {part.dim}")
    u = np.mod(pts - part.shift, part.width)
    return np.minimum(u, part.width - u).min(axis=1)


def cube_padding_certificate(part: CubePartition, x, t: float) -> PaddingCertificate:
    """Exact certificate: B_t(x) is inside the cell iff every coordinate
    margin is >= t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    m = float(cube_margins(part, np.asarray(x, dtype=np.float64)[None, :])[0])
    return PaddingCertificate(status=CONTAINED if m >= t else CUT, margin=m)


def cube_cell_anchor(part: CubePartition, cell) -> Array:
    """Deterministic representative point of a cube cell (its center)."""
    idx = np.asarray(cell, dtype=np.float64)
    return part.shift + (idx + 0.5) * part.width


@dataclass(frozen=True, eq=False)
class BallCarvingPartition:
    """Carved balls over a net: shared radius, random center order.

    order[k] is the index of the k-th center in the carving sequence.
    """

    net: EpsilonNet
    epsilon: float
    radius: float
    order: Array  # permutation of range(len(net))
    seed: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (self.epsilon / 4.0 < self.radius <= self.epsilon / 2.0):
            raise ValueError("radius must lie in (epsilon/4, epsilon/2]")
        if abs(self.net.epsilon - self.epsilon / 4.0) > 1e-9 * self.epsilon:
            raise ValueError("net spacing must equal epsilon/4")
        o = np.asarray(self.order, dtype=np.int64)
        if sorted(o.tolist()) != list(range(len(self.net))):
            raise ValueError("order must be a permutation of the net indices")
        object.__setattr__(self, "order", o)

    @property
    def dim(self) -> int:
        return self.net.dim

    @cached_property
    def ranks(self) -> Array:
        """ranks[i] = position of center i in the carving sequence."""
        r = np.empty(len(self.net), dtype=np.int64)
        r[self.order] = np.arange(len(self.net))
        return r


def sample_ball_carving(net: EpsilonNet, epsilon: float, rng: np.random.Generator) -> BallCarvingPartition:
    """Draw radius uniform on (epsilon/4, epsilon/2] and a uniform center order."""
    if abs(net.epsilon - epsilon / 4.0) > 1e-9 * epsilon:
        raise ValueError(f"net spacing {net.epsilon} does not match epsilon/4 = {epsilon / 4.0}")
    radius = epsilon / 4.0 + (1.0 - rng.random()) * (epsilon / 4.0)  # (eps/4, eps/2]
    order = rng.permutation(len(net))
    return BallCarvingPartition(net=net, epsilon=float(epsilon), radius=float(radius), order=order)


def resample_ball_carving(part: BallCarvingPartition, rng: np.random.Generator) -> BallCarvingPartition:
    """Fresh (radius, order) over the same net."""
    return sample_ball_carving(part.net, part.epsilon, rng)


def ball_assign(part: BallCarvingPartition, points, chunk: int = 4096):
    """Vectorized assignment with certificate margins.

    Returns (cells, off_support, margins):
      cells: (n,) int64 center indices (nearest center when off support),
      off_support: (n,) bool, True when no R-ball contains the point,
      margins: (n,) float certificate margins (0.0 off support).
    """
    pts = as_points(points)
    if pts.shape[1] != part.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, partition has {part.dim}")
    centers = part.net.centers[part.order]  # columns in carving order
    c2 = np.einsum("ij,ij->i", centers, centers)
    n = len(pts)
    cells = np.empty(n, dtype=np.int64)
    off = np.empty(n, dtype=bool)
    margins = np.empty(n, dtype=np.float64)
    R = part.radius
    for i in range(0, n, chunk):
        blk = pts[i : i + chunk]
        d2 = np.einsum("ij,ij->i", blk, blk)[:, None] + c2[None, :] - 2.0 * (blk @ centers.T)
        np.maximum(d2, 0.0, out=d2)
        dr = np.sqrt(d2)  # (m, N) distances, columns in carving order
        inball = dr <= R
        has = inball.any(axis=1)
        first = np.argmax(inball, axis=1)  # first capturing center, in order
        rows = np.arange(len(blk))
        du = dr[rows, first]
        prefix = np.minimum.accumulate(dr, axis=1)
        before = np.where(first > 0, prefix[rows, np.maximum(first - 1, 0)], np.inf)
        m = np.minimum(R - du, before - R)
        cells_blk = part.order[first]
        near = np.argmin(dr, axis=1)
        cells_blk = np.where(has, cells_blk, part.order[near])
        cells[i : i + chunk] = cells_blk
        off[i : i + chunk] = ~has
        margins[i : i + chunk] = np.where(has, m, 0.0)
    return cells, off, margins


def ball_cell_of(part: BallCarvingPartition, x) -> int:
    """Index of the first center in carving order whose R-ball holds x;
    nearest center when none does (off-support fallback)."""
    cells, _, _ = ball_assign(part, np.asarray(x, dtype=np.float64)[None, :])
    return int(cells[0])


def ball_padding_certificate(part: BallCarvingPartition, x, t: float) -> PaddingCertificate:
    """Sound certificate for carved cells.

    Contained requires the assigned center to hold the whole ball
    (d(x,u) <= R - t) and every earlier center to miss it entirely
    (d(x,w) >= R + t). Conservative: a Cut verdict does not prove an
    actual cut.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    _, off, margins = ball_assign(part, np.asarray(x, dtype=np.float64)[None, :])
    if off[0]:
        return PaddingCertificate(status=OFF_SUPPORT, margin=0.0)
    m = float(margins[0])
    return PaddingCertificate(status=CONTAINED if m >= t else CUT, margin=m)


def ball_cell_member(part: BallCarvingPartition, cell: int, points) -> Array:
    """Exact cell membership test (no fallback): first capturing center == cell."""
    cells, off, _ = ball_assign(part, points)
    return (~off) & (cells == int(cell))


def ball_cell_anchor(part: BallCarvingPartition, cell: int) -> Array:
    return part.net.centers[int(cell)]


# ---------------------------------------------------------------------------
# generic dispatch

Partition = "CubePartition | BallCarvingPartition"


def cells_of(part, points):
    """Batch cell assignment. Cube: (n, d) int lattice coords. Ball: (n,) indices."""
    if isinstance(part, CubePartition):
        return cube_cells_of(part, points)
    if isinstance(part, BallCarvingPartition):
        return ball_assign(part, points)[0]
    raise TypeError(f"unknown partition type {type(part)!r}")


def cell_of(part, x):
    if isinstance(part, CubePartition):
        return cube_cell_of(part, x)
    if isinstance(part, BallCarvingPartition):
        return ball_cell_of(part, x)
    raise TypeError(f"unknown partition type {type(part)!r}")


def padding_certificate(part, x, t: float) -> PaddingCertificate:
    if isinstance(part, CubePartition):
        return cube_padding_certificate(part, x, t)
    if isinstance(part, BallCarvingPartition):
        return ball_padding_certificate(part, x, t)
    raise TypeError(f"unknown partition type {type(part)!r}")


def certificate_margins(part, points):
    """Batch (margins, off_support) for either family. Cube is never off support."""
    if isinstance(part, CubePartition):
        m = cube_margins(part, points)
        return m, np.zeros(len(m), dtype=bool)
    if isinstance(part, BallCarvingPartition):
        _, off, m = ball_assign(part, points)
        return m, off
    raise TypeError(f"unknown partition type {type(part)!r}")


def cell_anchor(part, cell):
    """Deterministic in-cell representative used by fallback labeling."""
    if isinstance(part, CubePartition):
        return cube_cell_anchor(part, cell)
    if isinstance(part, BallCarvingPartition):
        return ball_cell_anchor(part, cell)
    raise TypeError(f"unknown partition type {type(part)!r}")


# ---------------------------------------------------------------------------
# empirical padding and separation-sensitivity estimates


@dataclass(frozen=True)
class PaddednessEstimate:
    """Monte-Carlo estimate of P[certificate != contained] at radius t."""

    value: float
    ci_low: float
    ci_high: float
    trials: int
    t: float


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)  # don't let rounding exclude 0
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def estimate_paddedness(family, data, t: float, trials: int, rng: np.random.Generator) -> PaddednessEstimate:
    """Frequency of non-contained certificates over iid (partition, point) pairs.

    family(rng) -> partition instance, data(rng) -> point. Off-support
    counts as not contained (conservative).
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if t < 0:
        raise ValueError("t must be >= 0")
    bad = 0
    for _ in range(trials):
        part = family(rng)
        x = np.asarray(data(rng), dtype=np.float64)
        cert = padding_certificate(part, x, t)
        if cert.status != CONTAINED:
            bad += 1
    lo, hi = wilson_interval(bad, trials)
    return PaddednessEstimate(value=bad / trials, ci_low=lo, ci_high=hi, trials=trials, t=t)


@dataclass(frozen=True)
class LipschitzCurve:
    """Separation probability as a function of pair distance.

    points: list of (distance, probability, ci_low, ci_high).
    slope: least-squares fit of probability ~ slope * distance / epsilon.
    """

    points: tuple
    slope: float
    epsilon: float


def estimate_lipschitz_constant(
    family,
    pair_sampler,
    distances,
    trials: int,
    rng: np.random.Generator,
    *,
    epsilon: float,
) -> LipschitzCurve:
    """Estimate P[pair lands in different cells] at controlled distances.

    pair_sampler(rng, dist) -> (x, x') with ||x - x'|| ~= dist. A fresh
    partition is drawn for every trial.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    curve = []
    xs, ys = [], []
    for dist in distances:
        hits = 0
        for _ in range(trials):
            part = family(rng)
            a, b = pair_sampler(rng, float(dist))
            ca = cell_of(part, np.asarray(a, dtype=np.float64))
            cb = cell_of(part, np.asarray(b, dtype=np.float64))
            if ca != cb:
                hits += 1
        lo, hi = wilson_interval(hits, trials)
        p = hits / trials
        curve.append((float(dist), p, lo, hi))
        xs.append(float(dist) / epsilon)
        ys.append(p)
    xs_arr = np.asarray(xs)
    ys_arr = np.asarray(ys)
    denom = float(np.sum(xs_arr * xs_arr))
    slope = float(np.sum(xs_arr * ys_arr) / denom) if denom > 0 else float("nan")
    return LipschitzCurve(points=tuple(curve), slope=slope, epsilon=float(epsilon))


# ---------------------------------------------------------------------------
# serialization (floats round-trip exactly through repr/json)


def partition_to_dict(part) -> dict:
    if isinstance(part, CubePartition):
        return {
            "family": "cube",
            "epsilon": part.epsilon,
            "dim": part.dim,
            "shift": part.shift.tolist(),
            "seed": part.seed,
        }
    if isinstance(part, BallCarvingPartition):
        return {
            "family": "ball_carving",
            "epsilon": part.epsilon,
            "dim": part.dim,
            "radius": part.radius,
            "order": part.order.tolist(),
            "seed": part.seed,
            "net": {
                "epsilon": part.net.epsilon,
                "source_count": part.net.source_count,
                "centers": part.net.centers.tolist(),
            },
        }
    raise TypeError(f"unknown partition type {type(part)!r}")


def partition_from_dict(payload: dict):
    family = payload.get("family")
    if family == "cube":
        return CubePartition(
            epsilon=float(payload["epsilon"]),
            dim=int(payload["dim"]),
            shift=np.asarray(payload["shift"], dtype=np.float64),
            seed=payload.get("seed"),
        )
    if family == "ball_carving":
        net = EpsilonNet(
            centers=np.asarray(payload["net"]["centers"], dtype=np.float64),
            epsilon=float(payload["net"]["epsilon"]),
            source_count=int(payload["net"]["source_count"]),
        )
        return BallCarvingPartition(
            net=net,
            epsilon=float(payload["epsilon"]),
            radius=float(payload["radius"]),
            order=np.asarray(payload["order"], dtype=np.int64),
            seed=payload.get("seed"),
        )
    raise ValueError(f"unknown partition family {family!r}")


def save_partition(path, part) -> None:
    Path(path).write_text(json.dumps(partition_to_dict(part), indent=1, sort_keys=True))


def load_partition(path):
    return partition_from_dict(json.loads(Path(path).read_text()))
