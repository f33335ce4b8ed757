"""Random node deployment by acceptance-rejection, and its efficiency analytics.

Two samplers cover the sector: a Cartesian one (x from the marginal law, then y
uniform on its conditional interval) and a radial one (distance first, then an
angle uniform over the admissible set). Their acceptance rates cross at
:func:`crossover_rcr`; :func:`choose_strategy` picks the faster one for a given RCR.

All samplers draw proposals in vectorised chunks from a :class:`RngStream`. The
acceptance bookkeeping still counts proposals up to the last accepted one, so
``n_total`` is what a one-at-a-time loop would report.
"""

import math
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from hexfade.exceptions import DomainError
from hexfade.geometry import SECTOR_ANGLE, SQRT3, CartesianPoint, NetworkGeometry, conditional_pdf_y

MAX_SEED = 2**64 - 1

# 2 pi / (3 sqrt 3): the exclusion disk's share in the acceptance-rate formulas
_DISK_TERM = 2 * math.pi / (3 * SQRT3)
_MIN_CHUNK = 256


class RngStream:
    """Seedable source of uniform and normal variates (numpy PCG64).

    Identical ``(seed, spawn_key)`` pairs replay identical sequences. Substreams for
    parallel workers come from :meth:`spawn`.
    """

    def __init__(self, seed: int = 0, spawn_key: tuple[int, ...] = ()) -> None:
        if not 0 <= seed <= MAX_SEED:
            raise DomainError(f"seed must be a 64-bit unsigned integer (got {seed})")  # noqa: TRY003
        self.seed = seed
        self.spawn_key = tuple(spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self.spawn_key)))
        self._n_children = 0

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"

    def next_uniform(self) -> float:
        """One variate in ``[0, 1)``."""
        return float(self._generator.random())

    def uniforms(self, size: int | tuple[int, ...]) -> np.ndarray:
        return self._generator.random(size)

    def normals(self, size: int) -> np.ndarray:
        return self._generator.standard_normal(size)

    def integers(self, high: int, size: int) -> np.ndarray:
        return self._generator.integers(0, high, size)

    def spawn(self, n: int) -> list["RngStream"]:
        """Derive ``n`` independent child streams; repeated calls keep yielding new ones."""
        children = [RngStream(self.seed, (*self.spawn_key, self._n_children + i)) for i in range(n)]
        self._n_children += n
        return children


class SamplingStrategy(str, Enum):
    RADIAL = "radial"
    CARTESIAN = "cartesian"


@dataclass
class SampleBatch:
    """Accepted samples plus the proposal count that produced them.

    ``values`` has shape ``(n,)`` for x values or radii and ``(n, 2)`` for points.
    ``rotations`` holds the sector index of each hexagon point.
    """

    values: np.ndarray
    n_total: int
    rotations: np.ndarray | None = None

    @property
    def n_accepted(self) -> int:
        return len(self.values)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_total

    def points(self) -> Iterator[CartesianPoint]:
        for x, y in self.values:
            yield CartesianPoint(float(x), float(y))

    def distances(self) -> np.ndarray:
        if self.values.ndim == 1:
            return self.values
        return np.hypot(self.values[:, 0], self.values[:, 1])


def _check_rcr(mu: float) -> None:
    if not mu > 2:
        raise DomainError(f"RCR must exceed 2 (got {mu:g})")  # noqa: TRY003


def _check_count(n_s: int) -> None:
    if n_s < 1:
        raise DomainError(f"sample count must be at least 1 (got {n_s})")  # noqa: TRY003


def _run_acceptance_rejection(
    rng: RngStream,
    n_s: int,
    low: float,
    high: float,
    accept: Callable[[np.ndarray, np.ndarray], np.ndarray],
    expected_rate: float,
) -> tuple[np.ndarray, int]:
    """Propose ``v = low + u1 (high - low)`` and keep it when ``accept(v, u0)`` holds."""
    chunks: list[np.ndarray] = []
    n_needed = n_s
    n_total = 0
    while n_needed > 0:
        size = max(_MIN_CHUNK, math.ceil(1.1 * n_needed / expected_rate))
        u = rng.uniforms((size, 2))
        v = low + u[:, 1] * (high - low)
        kept = np.flatnonzero(accept(v, u[:, 0]))
        if len(kept) >= n_needed:
            kept = kept[:n_needed]
            n_total += int(kept[-1]) + 1
        else:
            n_total += size
        chunks.append(v[kept])
        n_needed -= len(kept)
    return np.concatenate(chunks), n_total


def sample_x(geom: NetworkGeometry, rng: RngStream, n_s: int) -> SampleBatch:
    """Draw ``n_s`` x coordinates from the marginal law with a uniform proposal on ``[r0/2, L]``."""
    _check_count(n_s)
    L, r0 = geom.cell_radius_m, geom.close_in_m

    def accept(v: np.ndarray, u0: np.ndarray) -> np.ndarray:
        level = u0 * L / 2
        near = (v <= r0) & (v - np.sqrt(np.maximum(r0 * r0 - v * v, 0.0) / 3) > level)
        rising = (v > r0) & (v <= L / 2) & (v > level)
        falling = (v > L / 2) & (v < L * (1 - u0 / 2))
        return near | rising | falling

    values, n_total = _run_acceptance_rejection(
        rng, n_s, r0 / 2, L, accept, acceptance_rate_cartesian(geom.rcr())
    )
    return SampleBatch(values, n_total)


def _y_bounds(geom: NetworkGeometry, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    L, r0 = geom.cell_radius_m, geom.close_in_m
    low = np.where(xs <= r0, np.sqrt(np.maximum(r0 * r0 - xs * xs, 0.0)), 0.0)
    high = np.where(xs <= L / 2, SQRT3 * xs, SQRT3 * (L - xs))
    return low, high


def sample_y_given_x(geom: NetworkGeometry, rng: RngStream, x_hat: float) -> float:
    low, high = conditional_pdf_y(geom, x_hat)
    return low + rng.next_uniform() * (high - low)


def sample_sector_points(geom: NetworkGeometry, rng: RngStream, n_s: int) -> SampleBatch:
    """Uniform points over the far-field sector via x then y given x."""
    xs = sample_x(geom, rng, n_s)
    low, high = _y_bounds(geom, xs.values)
    ys = low + rng.uniforms(n_s) * (high - low)
    return SampleBatch(np.column_stack((xs.values, ys)), xs.n_total)


def sample_hexagon_points(
    geom: NetworkGeometry, rng: RngStream, n_s: int, strategy: SamplingStrategy | None = None
) -> SampleBatch:
    """Sector points from :func:`sample_points` turned about the origin by a uniform multiple of ``pi/3``."""
    sector = sample_points(geom, rng, n_s, strategy)
    k = rng.integers(6, n_s)
    angle = k * SECTOR_ANGLE
    x, y = sector.values[:, 0], sector.values[:, 1]
    cos, sin = np.cos(angle), np.sin(angle)
    rotated = np.column_stack((x * cos - y * sin, x * sin + y * cos))
    return SampleBatch(rotated, sector.n_total, rotations=k)


def sample_radius(geom: NetworkGeometry, rng: RngStream, n_s: int) -> SampleBatch:
    """Draw ``n_s`` distances with a uniform proposal on ``[r0, L]``.

    The bound is the density's peak at the apothem, ``2 sqrt(3) pi L / D``.
    """
    _check_count(n_s)
    L, r0 = geom.cell_radius_m, geom.close_in_m
    a = geom.apothem_m()

    def accept(v: np.ndarray, u0: np.ndarray) -> np.ndarray:
        rising = 2 * v / (SQRT3 * L)
        falling = 4 * v * (3 * np.arcsin(np.clip(a / np.maximum(v, a), -1.0, 1.0)) - math.pi) / (SQRT3 * math.pi * L)
        return np.where(v <= a, rising, falling) > u0

    values, n_total = _run_acceptance_rejection(rng, n_s, r0, L, accept, acceptance_rate_radial(geom.rcr()))
    return SampleBatch(values, n_total)


def _angles_given_radii(geom: NetworkGeometry, rng: RngStream, radii: np.ndarray) -> np.ndarray:
    a = geom.apothem_m()
    edge = np.arcsin(np.clip(a / np.maximum(radii, a), -1.0, 1.0))
    half = np.where(radii <= a, SECTOR_ANGLE / 2, edge - SECTOR_ANGLE)
    t = rng.uniforms(len(radii)) * 2 * half
    # upper interval starts at 2 pi/3 - edge; inside the apothem it joins the lower one at pi/6
    return np.where((radii <= a) | (t <= half), t, t - half + 2 * math.pi / 3 - edge)


def sample_points(
    geom: NetworkGeometry, rng: RngStream, n_s: int, strategy: SamplingStrategy | None = None
) -> SampleBatch:
    """Uniform sector points through whichever sampler ``strategy`` names (default: the faster)."""
    strategy = strategy or choose_strategy(geom.rcr())
    if strategy is SamplingStrategy.CARTESIAN:
        return sample_sector_points(geom, rng, n_s)
    radii = sample_radius(geom, rng, n_s)
    theta = _angles_given_radii(geom, rng, radii.values)
    points = np.column_stack((radii.values * np.cos(theta), radii.values * np.sin(theta)))
    return SampleBatch(points, radii.n_total)


def sample_distances(
    geom: NetworkGeometry, rng: RngStream, n_s: int, strategy: SamplingStrategy | None = None
) -> SampleBatch:
    """Base-station distances of ``n_s`` uniform nodes; the radial path skips the angle."""
    strategy = strategy or choose_strategy(geom.rcr())
    if strategy is SamplingStrategy.RADIAL:
        return sample_radius(geom, rng, n_s)
    points = sample_sector_points(geom, rng, n_s)
    return SampleBatch(points.distances(), points.n_total)


def sample_distances_parallel(
    geom: NetworkGeometry,
    rng: RngStream,
    n_s: int,
    workers: int,
    strategy: SamplingStrategy | None = None,
) -> SampleBatch:
    """Split the batch over ``workers`` substreams of ``rng``; results depend on (seed, workers) only."""
    if workers < 1:
        raise DomainError(f"workers must be at least 1 (got {workers})")  # noqa: TRY003
    _check_count(n_s)
    if workers == 1:
        return sample_distances(geom, rng, n_s, strategy)
    shares = [n_s // workers + (1 if i < n_s % workers else 0) for i in range(workers)]
    jobs = [(stream, share) for stream, share in zip(rng.spawn(workers), shares, strict=True) if share > 0]
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        batches = list(pool.map(lambda job: sample_distances(geom, job[0], job[1], strategy), jobs))
    return SampleBatch(np.concatenate([b.values for b in batches]), sum(b.n_total for b in batches))


def acceptance_rate_cartesian(mu: float) -> float:
    """Probability that a Cartesian proposal is accepted, ``(mu^2 - 2pi/3sqrt3) / (mu (2 mu - 1))``."""
    _check_rcr(mu)
    return (mu * mu - _DISK_TERM) / (mu * (2 * mu - 1))


def _acceptance_rate_cartesian_slope(mu: float) -> float:
    numerator = mu * mu - _DISK_TERM
    denominator = 2 * mu * mu - mu
    return (2 * mu * denominator - numerator * (4 * mu - 1)) / denominator**2


def optimal_rcr() -> float:
    """RCR maximising the Cartesian acceptance rate (about 4.572)."""
    return (4 * math.pi + math.sqrt(2 * math.pi * (8 * math.pi - 3 * SQRT3))) / (3 * SQRT3)


def numeric_optimal_rcr(upper: float = 100.0) -> float:
    """Maximise :func:`acceptance_rate_cartesian` numerically over ``(2, upper]``."""
    result = optimize.minimize_scalar(
        lambda mu: -acceptance_rate_cartesian(mu),
        bounds=(2 + 1e-9, upper),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(result.x)


def ar_estimator_stats(mu: float, n_total: int) -> tuple[float, float]:
    """Mean and variance of the empirical acceptance rate ``n_S / n_T``."""
    if n_total < 1:
        raise DomainError(f"n_total must be at least 1 (got {n_total})")  # noqa: TRY003
    p = acceptance_rate_cartesian(mu)
    return p, p * (1 - p) / n_total


def ar_estimator_variance_closed_form(mu: float, n_total: int) -> float:
    """Same variance written as ``{1 - (mu - 4pi/3sqrt3)^2 / (mu (2mu - 1))^2} / 4 n_T``."""
    _check_rcr(mu)
    ratio = (mu - 2 * _DISK_TERM) / (mu * (2 * mu - 1))
    return (1 - ratio * ratio) / (4 * n_total)


def ar_variance_derivative(mu: float, n_total: int) -> float:
    """Derivative of the estimator variance with respect to ``mu``."""
    p = acceptance_rate_cartesian(mu)
    return _acceptance_rate_cartesian_slope(mu) * (1 - 2 * p) / n_total


def acceptance_rate_radial(mu: float) -> float:
    """Probability that a radial proposal is accepted; decreases towards ``3 / 2pi``."""
    _check_rcr(mu)
    return 3 * (mu * mu - _DISK_TERM) / (2 * math.pi * mu * (mu - 1))


def crossover_rcr() -> float:
    """RCR where both acceptance rates are equal (about 11.594)."""
    return (2 * math.pi - 3) / (2 * (math.pi - 3))


def numeric_crossover_rcr(upper: float = 100.0) -> float:
    """Root of the acceptance-rate difference on ``(2, upper]``."""
    return float(
        optimize.brentq(
            lambda mu: acceptance_rate_radial(mu) - acceptance_rate_cartesian(mu),
            2 + 1e-9,
            upper,
            xtol=1e-14,
        )
    )


def choose_strategy(mu: float) -> SamplingStrategy:
    """Radial sampling up to and including the crossover RCR, Cartesian beyond it."""
    _check_rcr(mu)
    return SamplingStrategy.RADIAL if mu <= crossover_rcr() else SamplingStrategy.CARTESIAN
