"""Point clouds in the unit cube: seeded sampling, p-power distances, ball
counts and the mesoscopic density event.

A point cloud is a float64 array of shape ``(n, d)`` with coordinates in
``[0, 1]``. All functions here are pure.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import check_cloud, check_exponent

__all__ = [
    "ReplicateSeed",
    "Ball",
    "DensityConfig",
    "DensityReport",
    "sample_uniform_cloud",
    "sample_uniform_clouds",
    "pdist",
    "pdist_matrix",
    "ball_count",
    "density_radii",
    "check_density_event",
    "grid_cloud",
    "read_cloud",
    "write_cloud",
    "format_cloud",
]

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class ReplicateSeed:
    """Reproducible randomness for one replicate.

    The generator is numpy's PCG64 seeded with ``derived_seed``, a 64-bit
    value obtained from ``SeedSequence(master_seed, spawn_key=(stream,))``.
    Both algorithms are fixed by numpy and portable across platforms, so a
    ``(master_seed, stream)`` pair always produces the same draws, whatever
    process or worker evaluates it.
    """

    master_seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _UINT64_MAX:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream) < 0:
            raise ValueError("stream must be nonnegative")

    @property
    def derived_seed(self) -> int:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream),))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.derived_seed))


def _as_seed(seed) -> ReplicateSeed:
    if isinstance(seed, ReplicateSeed):
        return seed
    return ReplicateSeed(int(seed))


def sample_uniform_clouds(n, d, seed, count=2):
    """Draw ``count`` independent uniform clouds from one seeded stream.

    Clouds are drawn in order from a single generator, so the first cloud
    equals :func:`sample_uniform_cloud` for the same seed.
    """
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if int(d) < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    rng = _as_seed(seed).generator()
    return tuple(rng.random((int(n), int(d))) for _ in range(count))


def sample_uniform_cloud(n, d, seed) -> np.ndarray:
    """``n`` i.i.d. uniform points in ``[0, 1)^d``, deterministic in ``seed``."""
    return sample_uniform_clouds(n, d, seed, count=1)[0]


def pdist(a, b, p=1.0) -> float:
    """Euclidean distance between ``a`` and ``b`` raised to the power ``p``."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    p = check_exponent(p)
    return float(np.linalg.norm(a - b)) ** p


def pdist_matrix(X, Y, p=1.0) -> np.ndarray:
    """Dense matrix ``C[i, j] = |X_i - Y_j|**p``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    D = cdist(X, Y)
    if p != 1.0:
        D **= p
    return D


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball; its intersection with the cube is implicit."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))


def ball_count(cloud, ball: Ball) -> int:
    """Number of points ``z`` of ``cloud`` with ``|z - center| <= radius``."""
    cloud = check_cloud(cloud, unit_cube=False)
    center = np.asarray(ball.center, dtype=np.float64)
    if center.shape != (cloud.shape[1],):
        raise ValueError(
            f"ball center has dimension {center.size}, cloud has {cloud.shape[1]}"
        )
    dist = cdist(center[None, :], cloud)[0]
    return int(np.count_nonzero(dist <= ball.radius))


@dataclass(frozen=True)
class DensityConfig:
    """Discretization of the density event.

    Centers are the ``center_grid_per_axis**d`` cell centers of a regular
    grid; radii are ``n**(-alpha/d) * 2**k`` for ``k < radius_levels``.
    Radii above 1 are skipped. Such a ball sticks out of the unit cube on
    every side, so the count target ``n r**d / 2`` outgrows the volume the
    ball can hold (beyond ``r**d = 2`` no cloud can meet it at all).
    """

    alpha: float = 0.5
    center_grid_per_axis: int = 8
    radius_levels: int = 3

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.center_grid_per_axis < 1:
            raise ValueError("center_grid_per_axis must be positive")
        if self.radius_levels < 1:
            raise ValueError("radius_levels must be positive")


@dataclass(frozen=True)
class DensityReport:
    event_holds: bool
    worst_ratio: float
    witness: Optional[Tuple[Tuple[float, ...], float, int]] = None
    grid_spacing: float = 0.0


def _grid_centers(m, d):
    axis = (np.arange(m) + 0.5) / m
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, d)


def density_radii(n, d, cfg: DensityConfig) -> np.ndarray:
    r0 = float(n) ** (-cfg.alpha / d)
    radii = r0 * 2.0 ** np.arange(cfg.radius_levels)
    return radii[radii <= 1.0]


def check_density_event(cloud, cfg: DensityConfig = DensityConfig()) -> DensityReport:
    """Test ``count(B(x, r)) >= n r**d / 2`` on the discretized balls.

    The reported ``worst_ratio`` is the minimum of ``count / (n r**d)`` over
    the tested balls; the event holds iff it is at least 1/2. When it fails,
    ``witness`` is ``(center, radius, count)`` of the worst ball, which can
    be rechecked with :func:`ball_count`. ``grid_spacing`` is the distance
    between neighbouring centers, i.e. the resolution of the discretization.
    """
    cloud = check_cloud(cloud)
    n, d = cloud.shape
    centers = _grid_centers(cfg.center_grid_per_axis, d)
    radii = density_radii(n, d, cfg)

    worst = np.inf
    worst_ball = None
    block = max(1, 2_000_000 // n)
    for s in range(0, centers.shape[0], block):
        # Same distance routine as ball_count, so witnesses recount exactly.
        dist = cdist(centers[s:s + block], cloud)
        for r in radii:
            counts = np.count_nonzero(dist <= r, axis=1)
            ratios = counts / (n * r**d)
            k = int(np.argmin(ratios))
            if ratios[k] < worst:
                worst = float(ratios[k])
                worst_ball = (tuple(float(c) for c in centers[s + k]), float(r), int(counts[k]))

    holds = worst >= 0.5
    return DensityReport(
        event_holds=bool(holds),
        worst_ratio=worst,
        witness=None if holds else worst_ball,
        grid_spacing=1.0 / cfg.center_grid_per_axis,
    )


def grid_cloud(m, d) -> np.ndarray:
    """The ``m**d`` cell centers of the regular grid, a maximally even cloud."""
    return _grid_centers(int(m), int(d))


# -- plain-text cloud format: "d n" header, then n lines of d coordinates ----


def format_cloud(cloud) -> str:
    cloud = check_cloud(cloud)
    n, d = cloud.shape
    lines = [f"{d} {n}"]
    lines.extend(" ".join(repr(float(c)) for c in row) for row in cloud)
    return "\n".join(lines) + "\n"


def write_cloud(path, cloud):
    with open(path, "w") as fh:
        fh.write(format_cloud(cloud))


def read_cloud(path) -> np.ndarray:
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: missing 'd n' header")
    d, n = (int(v) for v in rows[0])
    body = rows[1:]
    if len(body) != n:
        raise ValueError(f"{path}: header says {n} points, found {len(body)}")
    if any(len(r) != d for r in body):
        raise ValueError(f"{path}: every point must have {d} coordinates")
    return check_cloud(np.array(body, dtype=np.float64).reshape(n, d), unit_cube=False)
