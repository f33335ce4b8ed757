"""Mean path-loss law, shadowing parameters and the density of the mean path loss."""

import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
import typer
from scipy import integrate
from typing_extensions import Self

from hexfade.exceptions import DomainError
from hexfade.geometry import NetworkGeometry, radial_cdf, scalar_or_array

LN10 = math.log(10.0)

# IEEE 802.20 MBWA urban macrocell (COST-231 Hata at 1.9 GHz folded into alpha)
IEEE80220_ALPHA_DB = 34.5
IEEE80220_BETA_DB = 35.0
IEEE80220_SIGMA_DB = 10.0
IEEE80220_CLOSE_IN_M = 35.0
IEEE80220_CELL_RADIUS_RANGE_M = (600.0, 3500.0)


@dataclass(frozen=True)
class PathLossParams:
    """``w(r) = alpha + beta log10(r)`` in dB; ``beta = 10 n_PL``."""

    alpha_db: float
    beta_db: float

    def __post_init__(self) -> None:
        if not self.beta_db > 0:
            raise DomainError(f"beta_db must be positive (got {self.beta_db:g})")  # noqa: TRY003
        if self.beta_db <= 10:
            typer.secho(
                f"warning: beta_db={self.beta_db:g} implies a path-loss exponent <= 1",
                fg=typer.colors.YELLOW,
                err=True,
            )

    @property
    def exponent(self) -> float:
        return self.beta_db / 10


@dataclass(frozen=True)
class ShadowingParams:
    """Standard deviation of the zero-mean Gaussian shadowing term, in dB."""

    sigma_psi_db: float

    def __post_init__(self) -> None:
        if not self.sigma_psi_db >= 0:
            raise DomainError(f"sigma_psi_db must be non-negative (got {self.sigma_psi_db:g})")  # noqa: TRY003


@dataclass(frozen=True)
class ChannelModel:
    geometry: NetworkGeometry
    pathloss: PathLossParams
    shadowing: ShadowingParams

    @classmethod
    def from_values(
        cls,
        *,
        cell_radius_m: float,
        close_in_m: float,
        alpha_db: float,
        beta_db: float,
        sigma_psi_db: float,
    ) -> Self:
        return cls(
            NetworkGeometry(cell_radius_m, close_in_m),
            PathLossParams(alpha_db, beta_db),
            ShadowingParams(sigma_psi_db),
        )

    @classmethod
    def ieee80220(cls, cell_radius_m: float = 600.0) -> Self:
        low, high = IEEE80220_CELL_RADIUS_RANGE_M
        if not low <= cell_radius_m <= high:
            typer.secho(
                f"warning: L={cell_radius_m:g} m is outside the macrocell range [{low:g}, {high:g}] m",
                fg=typer.colors.YELLOW,
                err=True,
            )
        return cls.from_values(
            cell_radius_m=cell_radius_m,
            close_in_m=IEEE80220_CLOSE_IN_M,
            alpha_db=IEEE80220_ALPHA_DB,
            beta_db=IEEE80220_BETA_DB,
            sigma_psi_db=IEEE80220_SIGMA_DB,
        )

    @property
    def rcr(self) -> float:
        return self.geometry.rcr()

    @property
    def sigma(self) -> float:
        return self.shadowing.sigma_psi_db

    def with_cell_radius(self, cell_radius_m: float) -> Self:
        return replace(self, geometry=NetworkGeometry(cell_radius_m, self.geometry.close_in_m))

    def with_sigma(self, sigma_psi_db: float) -> Self:
        return replace(self, shadowing=ShadowingParams(sigma_psi_db))

    def to_dict(self) -> dict[str, float]:
        return {**asdict(self.geometry), **asdict(self.pathloss), **asdict(self.shadowing)}


class Breakpoints(NamedTuple):
    """Mean path loss at ``r0``, at the apothem and at ``L``."""

    w0: float
    w_inner: float
    w_cell: float


def mean_path_loss_db(pl: PathLossParams, r: npt.ArrayLike) -> float | np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("distance must be positive")  # noqa: TRY003
    return scalar_or_array(pl.alpha_db + pl.beta_db * np.log10(r))


def inverse_distance(pl: PathLossParams, w: npt.ArrayLike) -> float | np.ndarray:
    """Distance in meters whose mean path loss is ``w`` dB."""
    w = np.asarray(w, dtype=float)
    return scalar_or_array(10.0 ** ((w - pl.alpha_db) / pl.beta_db))


def breakpoints_db(model: ChannelModel) -> Breakpoints:
    geom = model.geometry
    w0, w_inner, w_cell = mean_path_loss_db(
        model.pathloss, [geom.close_in_m, geom.apothem_m(), geom.cell_radius_m]
    )
    return Breakpoints(float(w0), float(w_inner), float(w_cell))


def mean_pl_pdf(model: ChannelModel, w: npt.ArrayLike) -> float | np.ndarray:
    """Density of the mean path loss ``W = w(R)`` of a uniform node, in 1/dB.

    Equals ``f_R(r(w)) |dr/dw|``: a ``10^(2(w - alpha)/beta)`` growth between ``w0``
    and the apothem value, then the arcsine-shaped fall to zero at ``w(L)``.
    """
    pl, geom = model.pathloss, model.geometry
    w0, w_inner, w_cell = breakpoints_db(model)
    w = np.asarray(w, dtype=float)
    clipped = np.clip(w, w0, w_cell)
    r = 10.0 ** ((clipped - pl.alpha_db) / pl.beta_db)
    scale = 4 * LN10 * r * r / (pl.beta_db * geom.density_denominator())
    outer = np.maximum(6 * np.arcsin(np.clip(geom.apothem_m() / r, -1.0, 1.0)) - 2 * math.pi, 0.0)
    values = np.select(
        [(w >= w0) & (w <= w_inner), (w > w_inner) & (w <= w_cell)],
        [math.pi * scale, outer * scale],
        default=0.0,
    )
    return scalar_or_array(values)


def mean_pl_cdf(model: ChannelModel, w: npt.ArrayLike) -> float | np.ndarray:
    return radial_cdf(model.geometry, inverse_distance(model.pathloss, w))


def mean_pl_moments(model: ChannelModel) -> tuple[float, float]:
    """Mean and variance of the mean path loss, by quadrature over its support."""
    w0, w_inner, w_cell = breakpoints_db(model)
    first = sum(
        integrate.quad(lambda w: w * mean_pl_pdf(model, w), lo, hi, epsrel=1e-12)[0]
        for lo, hi in ((w0, w_inner), (w_inner, w_cell))
    )
    second = sum(
        integrate.quad(lambda w: (w - first) ** 2 * mean_pl_pdf(model, w), lo, hi, epsrel=1e-12)[0]
        for lo, hi in ((w0, w_inner), (w_inner, w_cell))
    )
    return first, second
