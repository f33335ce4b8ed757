"""Spatial model of one hexagonal cell sector with a far-field exclusion disk.

The sector is the equilateral triangle with vertices ``(0, 0)``, ``(L, 0)`` and
``(L/2, sqrt(3) L / 2)``; the base station sits at the origin and nodes closer than
the close-in distance ``r0`` are excluded. Nodes are uniform over what remains, so
every density below is the constant ``12 / D`` with ``D = 3 sqrt(3) L^2 - 2 pi r0^2``
pushed through the relevant change of variables.

One-dimensional densities and CDFs accept scalars or numpy arrays and return the
same shape (a plain ``float`` for scalar input).
"""

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from hexfade.exceptions import DomainError

SQRT3 = math.sqrt(3.0)
SECTOR_ANGLE = math.pi / 3

# Slack on the triangle edges so points produced by rotations stay inside.
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class NetworkGeometry:
    """Cell radius ``L`` and close-in distance ``r0``, both in meters."""

    cell_radius_m: float
    close_in_m: float

    def __post_init__(self) -> None:
        if not (self.cell_radius_m > 0 and self.close_in_m > 0):
            raise DomainError(  # noqa: TRY003
                f"cell radius and close-in distance must be positive "
                f"(got L={self.cell_radius_m:g}, r0={self.close_in_m:g})"
            )
        if not self.rcr() > 2:
            raise DomainError(f"RCR must exceed 2 (got L/r0 = {self.rcr():g})")  # noqa: TRY003

    def rcr(self) -> float:
        """Cell radius to close-in distance ratio, ``mu = L / r0``."""
        return self.cell_radius_m / self.close_in_m

    def density_denominator(self) -> float:
        """``D = 3 sqrt(3) L^2 - 2 pi r0^2``, twelve times the sector area."""
        return 3 * SQRT3 * self.cell_radius_m**2 - 2 * math.pi * self.close_in_m**2

    def far_field_area(self) -> float:
        """Area of the sector outside the exclusion disk, in m^2."""
        return self.density_denominator() / 12

    def apothem_m(self) -> float:
        """Distance from the base station to the far edge midpoint, ``sqrt(3) L / 2``."""
        return SQRT3 * self.cell_radius_m / 2

    def areal_density(self, n_nodes: int) -> float:
        """Nodes per m^2 when ``n_nodes`` are spread over the whole hexagonal cell."""
        return n_nodes / (6 * self.far_field_area())


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float


def to_polar(p: CartesianPoint) -> PolarPoint:
    return PolarPoint(math.hypot(p.x, p.y), math.atan2(p.y, p.x))


def to_cartesian(q: PolarPoint) -> CartesianPoint:
    return CartesianPoint(q.r * math.cos(q.theta), q.r * math.sin(q.theta))


def scalar_or_array(values: np.ndarray) -> float | np.ndarray:
    return float(values) if values.ndim == 0 else values


def contains(geom: NetworkGeometry, p: CartesianPoint) -> bool:
    """True when ``p`` is in the sector triangle and outside the exclusion disk.

    Boundary points count as inside.
    """
    L, r0 = geom.cell_radius_m, geom.close_in_m
    tol = _EDGE_TOL * L
    in_triangle = p.y >= -tol and p.y <= SQRT3 * p.x + tol and p.y <= SQRT3 * (L - p.x) + tol
    return in_triangle and p.x * p.x + p.y * p.y >= r0 * r0 * (1 - _EDGE_TOL)


def hexagon_contains(geom: NetworkGeometry, p: CartesianPoint) -> bool:
    """Membership in the full hexagonal cell (a vertex on the +x axis) minus the disk."""
    angle = math.atan2(p.y, p.x) % (2 * math.pi)
    k = min(int(angle // SECTOR_ANGLE), 5)
    c, s = math.cos(-k * SECTOR_ANGLE), math.sin(-k * SECTOR_ANGLE)
    return contains(geom, CartesianPoint(c * p.x - s * p.y, s * p.x + c * p.y))


def joint_pdf_xy(geom: NetworkGeometry, p: CartesianPoint) -> float:
    """Uniform joint density ``12 / D`` over the far-field sector, 0 elsewhere."""
    if not contains(geom, p):
        return 0.0
    return 12 / geom.density_denominator()


def marginal_pdf_x(geom: NetworkGeometry, x: npt.ArrayLike) -> float | np.ndarray:
    """Marginal density of the x coordinate.

    Three branches: ``[r0/2, r0]`` where the disk cuts the strip, ``[r0, L/2]`` under
    the rising edge, ``[L/2, L]`` under the falling edge. Zero outside ``[r0/2, L]``.
    """
    L, r0 = geom.cell_radius_m, geom.close_in_m
    x = np.asarray(x, dtype=float)
    scale = 12 / geom.density_denominator()
    chord = np.sqrt(np.maximum(r0 * r0 - x * x, 0.0))
    values = np.select(
        [(x >= r0 / 2) & (x <= r0), (x > r0) & (x <= L / 2), (x > L / 2) & (x <= L)],
        [SQRT3 * x - chord, SQRT3 * x, SQRT3 * (L - x)],
        default=0.0,
    )
    return scalar_or_array(scale * values)


def _disk_strip_area(r0: float, t: np.ndarray) -> np.ndarray:
    # antiderivative of sqrt(r0^2 - t^2)
    return (t * np.sqrt(np.maximum(r0 * r0 - t * t, 0.0)) + r0 * r0 * np.arcsin(np.clip(t / r0, -1, 1))) / 2


def marginal_cdf_x(geom: NetworkGeometry, x: npt.ArrayLike) -> float | np.ndarray:
    """Closed-form CDF of :func:`marginal_pdf_x`."""
    L, r0 = geom.cell_radius_m, geom.close_in_m
    x = np.asarray(x, dtype=float)
    xa = np.clip(x, r0 / 2, r0)
    xb = np.clip(x, r0, L / 2)
    xc = np.clip(x, L / 2, L)
    branch_a = SQRT3 / 2 * (xa * xa - r0 * r0 / 4) - (
        _disk_strip_area(r0, xa) - _disk_strip_area(r0, np.asarray(r0 / 2))
    )
    branch_b = SQRT3 / 2 * (xb * xb - r0 * r0)
    branch_c = SQRT3 * (L * xc - xc * xc / 2 - 3 * L * L / 8)
    cdf = 12 / geom.density_denominator() * (branch_a + branch_b + branch_c)
    return scalar_or_array(np.clip(cdf, 0.0, 1.0))


def conditional_pdf_y(geom: NetworkGeometry, x_hat: float) -> tuple[float, float]:
    """Support ``(low, high)`` of the uniform law of ``Y`` given ``X = x_hat``."""
    L, r0 = geom.cell_radius_m, geom.close_in_m
    if not r0 / 2 <= x_hat <= L:
        raise DomainError(f"x_hat must lie in [r0/2, L] = [{r0 / 2:g}, {L:g}] (got {x_hat:g})")  # noqa: TRY003
    if x_hat <= r0:
        return math.sqrt(max(r0 * r0 - x_hat * x_hat, 0.0)), SQRT3 * x_hat
    if x_hat <= L / 2:
        return 0.0, SQRT3 * x_hat
    return 0.0, SQRT3 * (L - x_hat)


def coverage_radius(geom: NetworkGeometry, theta: float) -> float:
    """Distance from the base station to the far edge along direction ``theta``."""
    if not 0 <= theta <= SECTOR_ANGLE:
        raise DomainError(f"theta must lie in [0, pi/3] (got {theta:g})")  # noqa: TRY003
    return geom.apothem_m() / math.sin(2 * math.pi / 3 - theta)


def theta_range_given_r(geom: NetworkGeometry, r: float) -> tuple[tuple[float, float], ...]:
    """Admissible angles at radius ``r``: one interval, or two once ``r`` passes the apothem.

    The two outer intervals are mirror images about ``pi/6`` and shrink to the sector
    edges ``{0}`` and ``{pi/3}`` at ``r = L``.
    """
    L, r0 = geom.cell_radius_m, geom.close_in_m
    if not r0 <= r <= L:
        raise DomainError(f"r must lie in [r0, L] = [{r0:g}, {L:g}] (got {r:g})")  # noqa: TRY003
    if r <= geom.apothem_m():
        return ((0.0, SECTOR_ANGLE),)
    edge = math.asin(min(geom.apothem_m() / r, 1.0))
    return ((0.0, edge - SECTOR_ANGLE), (2 * math.pi / 3 - edge, SECTOR_ANGLE))


def theta_measure(geom: NetworkGeometry, r: float) -> float:
    """Total length of :func:`theta_range_given_r`."""
    return sum(hi - lo for lo, hi in theta_range_given_r(geom, r))


def polar_contains(geom: NetworkGeometry, q: PolarPoint) -> bool:
    L, r0 = geom.cell_radius_m, geom.close_in_m
    if not r0 <= q.r <= L:
        return False
    return any(lo <= q.theta <= hi for lo, hi in theta_range_given_r(geom, q.r))


def polar_joint_pdf(geom: NetworkGeometry, q: PolarPoint) -> float:
    """Joint density of ``(r, theta)``: ``12 r / D`` on the polar domain.

    The Jacobian ``r`` times the Cartesian constant ``12 / D``; integrating over the
    admissible angles must give back :func:`radial_pdf`.
    """
    if not polar_contains(geom, q):
        return 0.0
    return 12 * q.r / geom.density_denominator()


def radial_pdf(geom: NetworkGeometry, r: npt.ArrayLike) -> float | np.ndarray:
    """Density of the base-station-to-node distance.

    Linear growth ``4 pi r / D`` up to the apothem, then
    ``8 r (3 asin(a / r) - pi) / D`` down to zero at ``r = L``.
    """
    L, r0 = geom.cell_radius_m, geom.close_in_m
    a = geom.apothem_m()
    r = np.asarray(r, dtype=float)
    denominator = geom.density_denominator()
    outer_arg = np.clip(a / np.maximum(r, a), -1.0, 1.0)
    outer = np.maximum(8 * r * (3 * np.arcsin(outer_arg) - math.pi), 0.0)
    values = np.select(
        [(r >= r0) & (r <= a), (r > a) & (r <= L)],
        [4 * math.pi * r, outer],
        default=0.0,
    )
    return scalar_or_array(values / denominator)


def radial_cdf(geom: NetworkGeometry, r: npt.ArrayLike) -> float | np.ndarray:
    """Closed-form CDF of :func:`radial_pdf`.

    Uses ``d/dr [r^2/2 asin(a/r) + a/2 sqrt(r^2 - a^2)] = r asin(a/r)``.
    """
    L, r0 = geom.cell_radius_m, geom.close_in_m
    a = geom.apothem_m()
    r = np.clip(np.asarray(r, dtype=float), r0, L)
    denominator = geom.density_denominator()
    inner_r = np.minimum(r, a)
    inner = 2 * math.pi * (inner_r * inner_r - r0 * r0)
    rr = np.maximum(r, a)
    outer = 8 * (
        1.5 * rr * rr * np.arcsin(np.clip(a / rr, -1.0, 1.0))
        + 1.5 * a * np.sqrt(np.maximum(rr * rr - a * a, 0.0))
        - math.pi * rr * rr / 2
        - math.pi * a * a / 4
    )
    return scalar_or_array(np.clip((inner + outer) / denominator, 0.0, 1.0))
