"""Density of the large-scale fading (mean path loss plus log-normal shadowing).

The fading ``l`` of a uniform node is ``W + sigma N`` where ``W`` has density
:func:`hexfade.channel.mean_pl_pdf`. Completing the square in the convolution turns
the two constant-density pieces of ``W`` into Q-function differences and leaves a
single one-dimensional arcsine integral for the outer ring, evaluated by adaptive
Gauss-Kronrod quadrature (``scipy.integrate.quad``). :func:`convolution_oracle`
computes the same density by brute-force convolution and is the reference the
closed form is checked against.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import integrate, optimize, special

from hexfade.channel import LN10, ChannelModel, breakpoints_db, mean_pl_cdf, mean_pl_moments, mean_pl_pdf
from hexfade.exceptions import DegenerateModelError, DomainError
from hexfade.geometry import scalar_or_array

DEFAULT_RTOL = 1e-9
ORACLE_RTOL = 1e-10

# Beyond this many standard units every Q term is 0 or 1 and the density underflows.
_TAIL_Z = 40.0
# Window edges, in shadowing deviations past the reporting window.
_CDF_START_SIGMAS = 6.0
_MOMENT_SIGMAS = 5.0

_SQRT_2PI = math.sqrt(2 * math.pi)


class ZBreakpoints(NamedTuple):
    z0: float
    z_inner: float
    z_cell: float


class SupportBounds(NamedTuple):
    low: float
    high: float


@dataclass(frozen=True)
class LsfDensity:
    """A channel model with the l-independent constants of the closed form cached.

    ``rtol`` is the relative tolerance of the arcsine quadrature.
    """

    model: ChannelModel
    rtol: float = DEFAULT_RTOL

    def __post_init__(self) -> None:
        if not 0 < self.rtol <= 1e-3:
            raise DomainError(f"quadrature tolerance must lie in (0, 1e-3] (got {self.rtol:g})")  # noqa: TRY003

    @cached_property
    def k0(self) -> float:
        """``exp((sqrt(2) ln10 sigma / beta)^2)``, the completed-square constant."""
        return math.exp((math.sqrt(2) * LN10 * self.model.sigma / self.model.pathloss.beta_db) ** 2)

    @cached_property
    def prefactor(self) -> float:
        """``4 ln10 10^(-2 alpha / beta) / (beta D)``."""
        pl = self.model.pathloss
        denominator = pl.beta_db * self.model.geometry.density_denominator()
        return 4 * LN10 * 10 ** (-2 * pl.alpha_db / pl.beta_db) / denominator

    def scale(self, l: float) -> float:
        """``prefactor * 10^(2 l / beta)``, evaluated without the intermediate overflow."""
        pl = self.model.pathloss
        log_scale = 2 * LN10 * (l - pl.alpha_db) / pl.beta_db
        return 4 * LN10 * math.exp(log_scale) / (pl.beta_db * self.model.geometry.density_denominator())

    def pdf(self, l: float) -> float:
        return lsf_pdf(self, l)

    def pdf_many(self, ls: npt.ArrayLike) -> np.ndarray:
        return lsf_pdf_many(self, ls)

    def cdf(self, ls: npt.ArrayLike) -> float | np.ndarray:
        return lsf_cdf_many(self, ls)


def q_function(z: npt.ArrayLike) -> float | np.ndarray:
    """Standard normal upper tail, ``erfc(z / sqrt 2) / 2``."""
    return scalar_or_array(0.5 * special.erfc(np.asarray(z, dtype=float) / math.sqrt(2)))


def _normal_mass(a: float, b: float) -> float:
    """``Q(a) - Q(b)`` computed on the tail that keeps it free of cancellation."""
    if a >= 0:
        return q_function(a) - q_function(b)
    if b <= 0:
        return q_function(-b) - q_function(-a)
    return 1.0 - q_function(b) - q_function(-a)


def _mean_shift(model: ChannelModel) -> float:
    return 2 * LN10 * model.sigma**2 / model.pathloss.beta_db


def z_breakpoints(model: ChannelModel, l: float) -> ZBreakpoints:
    """Standardised breakpoints ``(w - (l + 2 ln10 sigma^2 / beta)) / sigma``."""
    sigma = model.sigma
    if sigma == 0:
        raise DegenerateModelError("z_breakpoints")
    center = l + _mean_shift(model)
    return ZBreakpoints(*((w - center) / sigma for w in breakpoints_db(model)))


def z_breakpoints_log_form(model: ChannelModel, l: float) -> ZBreakpoints:
    """Same breakpoints written as ``(alpha - l + ln(r^(beta/ln10) / 10^(2 sigma^2 / beta))) / sigma``."""
    sigma = model.sigma
    if sigma == 0:
        raise DegenerateModelError("z_breakpoints_log_form")
    pl, geom = model.pathloss, model.geometry
    radii = (geom.close_in_m, geom.apothem_m(), geom.cell_radius_m)
    return ZBreakpoints(
        *(
            (pl.alpha_db - l + pl.beta_db / LN10 * math.log(r) - 2 * sigma**2 / pl.beta_db * LN10) / sigma
            for r in radii
        )
    )


def lsf_pdf(density: LsfDensity, l: float) -> float:
    """Closed-form density of the large-scale fading at ``l`` dB, in 1/dB.

    Falls back to :func:`mean_pl_pdf` when the model has no shadowing.
    """
    model = density.model
    sigma = model.sigma
    if sigma == 0:
        return float(mean_pl_pdf(model, l))
    z0, z_inner, z_cell = z_breakpoints(model, l)
    if z_cell < -_TAIL_Z or z0 > _TAIL_Z:
        return 0.0

    pl, geom = model.pathloss, model.geometry
    beta = pl.beta_db
    log_half_span = math.log(math.sqrt(3) * geom.cell_radius_m / 2)
    offset = (beta * (l - pl.alpha_db) + 2 * LN10 * sigma**2) / beta**2

    def ring_integrand(z: float) -> float:
        log_arg = min(log_half_span - LN10 * (sigma * z / beta + offset), 0.0)
        return math.exp(-z * z / 2) * math.asin(math.exp(log_arg))

    points = [0.0] if z_inner < 0 < z_cell else None
    ring, _ = integrate.quad(ring_integrand, z_inner, z_cell, epsabs=0.0, epsrel=density.rtol, limit=200, points=points)
    core = math.pi * (_normal_mass(z0, z_inner) - 2 * _normal_mass(z_inner, z_cell))
    value = density.scale(l) * density.k0 * (core + 3 * math.sqrt(2 / math.pi) * ring)
    return max(value, 0.0)


def lsf_pdf_many(density: LsfDensity, ls: npt.ArrayLike) -> np.ndarray:
    return np.array([lsf_pdf(density, float(l)) for l in np.asarray(ls, dtype=float).ravel()])


def convolution_oracle(model: ChannelModel, l: float, rtol: float = ORACLE_RTOL) -> float:
    """Numerically convolve the mean path-loss density with the shadowing Gaussian."""
    sigma = model.sigma
    if sigma == 0:
        raise DegenerateModelError("convolution_oracle")
    w0, w_inner, w_cell = breakpoints_db(model)

    def integrand(tau: float) -> float:
        u = (l - tau) / sigma
        return float(mean_pl_pdf(model, tau)) * math.exp(-u * u / 2) / (_SQRT_2PI * sigma)

    total = 0.0
    for lo, hi in ((w0, w_inner), (w_inner, w_cell)):
        points = [l] if lo < l < hi else None
        total += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=200, points=points)[0]
    return total


def support_bounds(model: ChannelModel) -> SupportBounds:
    """Reporting window ``[w0 - 3 sigma, w(L) + 3 sigma]``; the density itself is not truncated."""
    w0, _, w_cell = breakpoints_db(model)
    return SupportBounds(w0 - 3 * model.sigma, w_cell + 3 * model.sigma)


def _knots(model: ChannelModel, lo: float, hi: float) -> list[float] | None:
    support = support_bounds(model)
    knots = sorted({support.low, support.high, *breakpoints_db(model)})
    inside = [k for k in knots if lo < k < hi]
    return inside or None


def lsf_cdf(density: LsfDensity, l: float) -> float:
    """CDF by cumulative quadrature of :func:`lsf_pdf` from ``6 sigma`` below the window."""
    model = density.model
    if model.sigma == 0:
        return float(mean_pl_cdf(model, l))
    start = support_bounds(model).low - _CDF_START_SIGMAS * model.sigma
    if l <= start:
        return 0.0
    mass, _ = integrate.quad(
        lambda t: lsf_pdf(density, t),
        start,
        l,
        epsabs=1e-13,
        epsrel=ORACLE_RTOL,
        limit=200,
        points=_knots(model, start, l),
    )
    return min(max(mass, 0.0), 1.0)


def lsf_cdf_many(density: LsfDensity, ls: npt.ArrayLike) -> float | np.ndarray:
    """Vectorised CDF through ``F(l) = E[Phi((l - W) / sigma)]`` (``scipy.integrate.quad_vec``)."""
    model = density.model
    ls = np.asarray(ls, dtype=float)
    if model.sigma == 0:
        return mean_pl_cdf(model, ls)
    sigma = model.sigma
    w0, w_inner, w_cell = breakpoints_db(model)

    def integrand(tau: float) -> np.ndarray:
        return float(mean_pl_pdf(model, tau)) * special.ndtr((ls - tau) / sigma)

    total = sum(
        integrate.quad_vec(integrand, lo, hi, epsabs=1e-14, epsrel=ORACLE_RTOL)[0]
        for lo, hi in ((w0, w_inner), (w_inner, w_cell))
    )
    return scalar_or_array(np.clip(np.asarray(total), 0.0, 1.0))


def lsf_moments(density: LsfDensity) -> tuple[float, float]:
    """Mean and variance of the fading law, integrating :func:`lsf_pdf` numerically."""
    model = density.model
    if model.sigma == 0:
        return mean_pl_moments(model)
    support = support_bounds(model)
    lo = support.low - _MOMENT_SIGMAS * model.sigma
    hi = support.high + _MOMENT_SIGMAS * model.sigma
    knots = _knots(model, lo, hi)
    mean, _ = integrate.quad(lambda t: t * lsf_pdf(density, t), lo, hi, epsrel=ORACLE_RTOL, limit=200, points=knots)
    variance, _ = integrate.quad(
        lambda t: (t - mean) ** 2 * lsf_pdf(density, t), lo, hi, epsrel=ORACLE_RTOL, limit=200, points=knots
    )
    return mean, variance


def lsf_median(density: LsfDensity) -> float:
    support = support_bounds(density.model)
    return float(
        optimize.brentq(lambda l: lsf_cdf_many(density, l) - 0.5, support.low, support.high, xtol=1e-12)
    )
