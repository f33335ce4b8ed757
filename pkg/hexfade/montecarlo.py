"""Monte-Carlo validation of the large-scale fading density.

The pipeline samples node distances, maps them to mean path loss, adds Gaussian
shadowing, and compares the resulting fading samples against the analytic law: a
histogram with its recursive CDF for plotting, a Kolmogorov-Smirnov distance on the
raw samples for acceptance, and the fraction of samples inside the ``3 sigma`` band.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import typer
from scipy import special, stats

from hexfade.channel import ChannelModel, mean_path_loss_db
from hexfade.exceptions import DegenerateModelError, DomainError, EmptySampleError
from hexfade.lsf import LsfDensity, lsf_cdf_many, lsf_pdf_many
from hexfade.sampling import RngStream, SamplingStrategy, choose_strategy, sample_distances_parallel
from hexfade.utils import write_json

CI_SIGMAS = 3.0
KS_ALPHA = 0.01


@dataclass
class LsfSamples:
    """Per-node distances ``r_hat``, mean path loss ``l_bar``, fading ``l_hat`` and the normals used."""

    r_hat: np.ndarray
    l_bar: np.ndarray
    l_hat: np.ndarray
    normals: np.ndarray
    sigma_psi_db: float
    strategy: SamplingStrategy
    n_accepted: int
    n_total: int

    def __len__(self) -> int:
        return len(self.l_hat)


@dataclass
class Histogram:
    bin_edges: np.ndarray
    densities: np.ndarray
    n_samples: int

    @property
    def n_bins(self) -> int:
        return len(self.densities)

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2


def simulate_lsf_samples(
    model: ChannelModel,
    rng: RngStream,
    n_s: int,
    *,
    strategy: SamplingStrategy | None = None,
    workers: int = 1,
) -> LsfSamples:
    """Draw ``n_s`` fading samples ``l = alpha + beta log10(r) + sigma n``.

    Distances come first (possibly over ``workers`` substreams), the normals after
    them from ``rng`` itself, so a run is fixed by ``(seed, n_s, workers)``.
    """
    strategy = strategy or choose_strategy(model.rcr)
    batch = sample_distances_parallel(model.geometry, rng, n_s, workers, strategy)
    r_hat = batch.distances()
    l_bar = np.asarray(mean_path_loss_db(model.pathloss, r_hat))
    normals = rng.normals(n_s)
    return LsfSamples(
        r_hat=r_hat,
        l_bar=l_bar,
        l_hat=l_bar + model.sigma * normals,
        normals=normals,
        sigma_psi_db=model.sigma,
        strategy=strategy,
        n_accepted=batch.n_accepted,
        n_total=batch.n_total,
    )


def histogram_estimate(
    samples: npt.ArrayLike, n_bins: int, value_range: tuple[float, float] | None = None
) -> Histogram:
    """Equal-width histogram normalised by ``n_samples * bin_width``.

    The default range is ``[min, max]`` of the samples. Samples on an interior edge
    land in the bin to its right; the maximum lands in the last bin.
    """
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise EmptySampleError("cannot build a histogram from zero samples")  # noqa: TRY003
    if n_bins < 1:
        raise DomainError(f"bin count must be at least 1 (got {n_bins})")  # noqa: TRY003
    if value_range is not None and not value_range[0] < value_range[1]:
        raise DomainError(f"histogram range must be nonempty (got {value_range})")  # noqa: TRY003
    value_range = value_range or (float(values.min()), float(values.max()))
    counts, edges = np.histogram(values, bins=n_bins, range=value_range)
    width = edges[1] - edges[0]
    return Histogram(bin_edges=edges, densities=counts / (values.size * width), n_samples=int(values.size))


def empirical_cdf(hist: Histogram) -> np.ndarray:
    """Recursive CDF at the bin right edges: ``cdf_j = cdf_(j-1) + pdf_j * width``."""
    return np.cumsum(hist.densities * hist.bin_width)


def ci_coverage(samples: LsfSamples) -> float:
    """Fraction of samples whose shadowing stays within ``3 sigma`` of the mean path loss."""
    if samples.sigma_psi_db == 0:
        raise DegenerateModelError("ci_coverage")
    if len(samples) == 0:
        raise EmptySampleError("no samples to measure coverage on")  # noqa: TRY003
    deviation = np.abs(samples.l_hat - samples.l_bar)
    return float(np.mean(deviation <= CI_SIGMAS * samples.sigma_psi_db))


def ks_distance(samples: npt.ArrayLike, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Two-sided KS statistic of the raw sample against a vectorised CDF."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise EmptySampleError("cannot compute a KS distance over zero samples")  # noqa: TRY003
    return float(stats.kstest(values, cdf).statistic)


def ks_critical_value(n: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic Kolmogorov critical distance; about ``1.63 / sqrt(n)`` at ``alpha = 0.01``."""
    if n < 1:
        raise DomainError(f"sample count must be at least 1 (got {n})")  # noqa: TRY003
    return float(special.kolmogi(alpha)) / math.sqrt(n)


@dataclass
class ValidationReport:
    model: dict[str, float]
    seed: int
    n_samples: int
    n_bins: int
    workers: int
    strategy: SamplingStrategy
    n_accepted: int
    n_total: int
    ks_distance: float
    ks_critical_1pct: float
    ci_coverage: float | None
    sample_mean_db: float
    histogram: Histogram
    cdf_estimate: np.ndarray
    analytic_density: np.ndarray
    scatter: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.ks_distance < self.ks_critical_1pct

    def to_dict(self, *, include_scatter: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "model": dict(self.model),
            "seed": self.seed,
            "n_samples": self.n_samples,
            "n_bins": self.n_bins,
            "workers": self.workers,
            "strategy": self.strategy.value,
            "n_accepted": self.n_accepted,
            "n_total": self.n_total,
            "ks_distance": self.ks_distance,
            "ks_critical_1pct": self.ks_critical_1pct,
            "passed": self.passed,
            "ci_coverage": self.ci_coverage,
            "sample_mean_db": self.sample_mean_db,
            "histogram": {
                "bin_edges": self.histogram.bin_edges.tolist(),
                "bin_centers": self.histogram.bin_centers.tolist(),
                "densities": self.histogram.densities.tolist(),
                "cdf": self.cdf_estimate.tolist(),
                "analytic_density": self.analytic_density.tolist(),
            },
        }
        if include_scatter and self.scatter is not None:
            r_hat, l_hat = self.scatter
            data["scatter"] = {"r_m": r_hat.tolist(), "lsf_db": l_hat.tolist()}
        return data

    def write_json(self, path: Path, *, include_scatter: bool = False) -> Path:
        return write_json(path, self.to_dict(include_scatter=include_scatter))


def _progress(message: str, verbose: bool) -> None:
    if verbose:
        typer.secho(message, fg=typer.colors.CYAN, err=True)


def validate(
    model: ChannelModel,
    rng: RngStream,
    n_s: int,
    n_bins: int,
    *,
    workers: int = 1,
    verbose: bool = False,
) -> ValidationReport:
    """Run the sampling, histogram and KS stages and collect everything into a report."""
    density = LsfDensity(model)

    _progress(f"sampling {n_s} nodes (L={model.geometry.cell_radius_m:g} m, workers={workers})", verbose)
    samples = simulate_lsf_samples(model, rng, n_s, workers=workers)
    _progress(
        f"  {samples.strategy.value} sampler accepted {samples.n_accepted}/{samples.n_total} proposals", verbose
    )

    _progress(f"building {n_bins}-bin histogram", verbose)
    hist = histogram_estimate(samples.l_hat, n_bins)

    _progress("computing KS distance against the analytic CDF", verbose)
    distance = ks_distance(samples.l_hat, lambda ls: lsf_cdf_many(density, ls))

    return ValidationReport(
        model=model.to_dict(),
        seed=rng.seed,
        n_samples=n_s,
        n_bins=n_bins,
        workers=workers,
        strategy=samples.strategy,
        n_accepted=samples.n_accepted,
        n_total=samples.n_total,
        ks_distance=distance,
        ks_critical_1pct=ks_critical_value(n_s),
        ci_coverage=ci_coverage(samples) if model.sigma > 0 else None,
        sample_mean_db=float(np.mean(samples.l_hat)),
        histogram=hist,
        cdf_estimate=empirical_cdf(hist),
        analytic_density=lsf_pdf_many(density, hist.bin_centers),
        scatter=(samples.r_hat, samples.l_hat),
    )


def sweep_cell_radius(
    model: ChannelModel,
    seed: int,
    n_s: int,
    n_bins: int,
    radii: Sequence[float],
    *,
    workers: int = 1,
    verbose: bool = False,
) -> list[ValidationReport]:
    """One :func:`validate` run per cell radius, each on a fresh stream of ``seed``."""
    return [
        validate(model.with_cell_radius(radius), RngStream(seed), n_s, n_bins, workers=workers, verbose=verbose)
        for radius in radii
    ]
