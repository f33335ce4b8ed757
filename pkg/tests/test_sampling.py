import math

import numpy as np
import pytest
from scipy import stats

from hexfade.exceptions import DomainError
from hexfade.geometry import SQRT3, NetworkGeometry, contains, hexagon_contains, marginal_cdf_x, radial_cdf
from hexfade.sampling import (
    RngStream,
    SamplingStrategy,
    acceptance_rate_cartesian,
    acceptance_rate_radial,
    ar_estimator_stats,
    ar_estimator_variance_closed_form,
    ar_variance_derivative,
    choose_strategy,
    crossover_rcr,
    numeric_crossover_rcr,
    numeric_optimal_rcr,
    optimal_rcr,
    sample_distances,
    sample_distances_parallel,
    sample_hexagon_points,
    sample_points,
    sample_radius,
    sample_sector_points,
    sample_x,
    sample_y_given_x,
)

UNIT = NetworkGeometry(1.0, 0.1)
MACROCELL = NetworkGeometry(600.0, 35.0)


def _ks_critical(n: int) -> float:
    return 1.63 / math.sqrt(n)


def _within_binomial(rate: float, p: float, n: int, sigmas: float = 4.0) -> bool:
    return abs(rate - p) <= sigmas * math.sqrt(p * (1 - p) / n)


class TestRngStream:
    def test_same_seed_replays(self):
        assert np.array_equal(RngStream(42).uniforms(100), RngStream(42).uniforms(100))

    def test_different_seeds_differ(self):
        assert not np.array_equal(RngStream(1).uniforms(10), RngStream(2).uniforms(10))

    def test_uniforms_in_unit_interval(self):
        u = RngStream(0).uniforms(10_000)
        assert u.min() >= 0
        assert u.max() < 1
        assert stats.kstest(u, "uniform").statistic < _ks_critical(10_000)

    def test_spawned_streams_are_reproducible_and_distinct(self):
        first = [s.uniforms(5) for s in RngStream(9).spawn(3)]
        second = [s.uniforms(5) for s in RngStream(9).spawn(3)]
        for a, b in zip(first, second, strict=True):
            assert np.array_equal(a, b)
        assert not np.array_equal(first[0], first[1])

    def test_repeated_spawn_yields_new_children(self):
        rng = RngStream(9)
        (a,) = rng.spawn(1)
        (b,) = rng.spawn(1)
        assert a.spawn_key != b.spawn_key

    def test_seed_range(self):
        with pytest.raises(DomainError):
            RngStream(-1)
        with pytest.raises(DomainError):
            RngStream(2**64)


class TestCartesianSampler:
    def test_x_support(self):
        batch = sample_x(UNIT, RngStream(1), 5000)
        assert batch.n_accepted == 5000
        assert batch.values.min() >= 0.05
        assert batch.values.max() <= 1.0

    def test_x_matches_marginal_law(self):
        n = 25_000
        batch = sample_x(UNIT, RngStream(2024), n)
        distance = stats.kstest(batch.values, lambda x: marginal_cdf_x(UNIT, x)).statistic
        assert distance < _ks_critical(n)

    def test_acceptance_rate_at_optimal_rcr(self):
        geom = NetworkGeometry(optimal_rcr(), 1.0)
        batch = sample_x(geom, RngStream(5), 10_000)
        assert _within_binomial(batch.acceptance_rate, 0.529, batch.n_total)

    @pytest.mark.parametrize("mu", [2.5, 3.0, 4.57, 10.0, 20.0])
    def test_empirical_rate_tracks_formula(self, mu):
        batch = sample_x(NetworkGeometry(mu, 1.0), RngStream(17), 10_000)
        assert _within_binomial(batch.acceptance_rate, acceptance_rate_cartesian(mu), batch.n_total)

    def test_replay_is_identical(self):
        a = sample_sector_points(MACROCELL, RngStream(3), 1000)
        b = sample_sector_points(MACROCELL, RngStream(3), 1000)
        assert np.array_equal(a.values, b.values)
        assert a.n_total == b.n_total

    def test_n_total_counts_every_rejection(self):
        batch = sample_x(UNIT, RngStream(8), 1)
        assert batch.n_total >= 1
        assert batch.n_accepted == 1

    def test_rejects_empty_request(self):
        with pytest.raises(DomainError):
            sample_x(UNIT, RngStream(0), 0)


class TestConditionalY:
    def test_support(self):
        rng = RngStream(4)
        for _ in range(1000):
            assert 0 <= sample_y_given_x(UNIT, rng, 0.25) <= SQRT3 * 0.25

    def test_apex(self):
        assert sample_y_given_x(UNIT, RngStream(4), 1.0) == 0

    def test_mean_is_midpoint(self):
        rng = RngStream(12)
        n = 100_000
        draws = np.array([sample_y_given_x(UNIT, rng, 0.25) for _ in range(n)])
        sd = SQRT3 * 0.25 / math.sqrt(12)
        assert abs(draws.mean() - 0.2165) <= 4 * sd / math.sqrt(n) + 1e-4


class TestSectorPoints:
    def test_points_inside_sector(self):
        batch = sample_sector_points(UNIT, RngStream(6), 5000)
        assert all(contains(UNIT, p) for p in batch.points())

    def test_chi_square_uniformity(self):
        # 16 equal-area vertical strips of the far-field sector, located through the marginal CDF
        n = 25_000
        batch = sample_sector_points(UNIT, RngStream(21), n)
        cdf = marginal_cdf_x(UNIT, batch.values[:, 0])
        counts = np.bincount(np.minimum((cdf * 16).astype(int), 15), minlength=16)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_distances_match_radial_law(self):
        n = 25_000
        batch = sample_sector_points(UNIT, RngStream(31), n)
        distance = stats.kstest(batch.distances(), lambda r: radial_cdf(UNIT, r)).statistic
        assert distance < _ks_critical(n)


class TestHexagonPoints:
    def test_points_inside_hexagon(self):
        batch = sample_hexagon_points(UNIT, RngStream(7), 5000)
        assert all(hexagon_contains(UNIT, p) for p in batch.points())

    def test_rotations_uniform(self):
        n = 30_000
        batch = sample_hexagon_points(UNIT, RngStream(8), n)
        freq = np.bincount(batch.rotations, minlength=6) / n
        for f in freq:
            assert _within_binomial(f, 1 / 6, n)

    def test_distances_rotation_invariant(self):
        n = 25_000
        batch = sample_hexagon_points(UNIT, RngStream(9), n)
        distance = stats.kstest(batch.distances(), lambda r: radial_cdf(UNIT, r)).statistic
        assert distance < _ks_critical(n)

    @pytest.mark.parametrize(
        ("strategy", "rate"),
        [(SamplingStrategy.CARTESIAN, acceptance_rate_cartesian), (SamplingStrategy.RADIAL, acceptance_rate_radial)],
    )
    def test_strategy_is_honoured(self, strategy, rate):
        """At RCR 3 the two samplers accept at clearly different rates (0.52 against 0.62)."""
        geom = NetworkGeometry(3.0, 1.0)
        batch = sample_hexagon_points(geom, RngStream(12), 20_000, strategy)
        assert all(hexagon_contains(geom, p) for p in batch.points())
        assert _within_binomial(batch.acceptance_rate, rate(3.0), batch.n_total)


class TestRadialSampler:
    def test_support(self):
        batch = sample_radius(UNIT, RngStream(10), 5000)
        assert batch.values.min() >= 0.1
        assert batch.values.max() <= 1.0

    def test_acceptance_rate_at_rcr_three(self):
        batch = sample_radius(NetworkGeometry(3.0, 1.0), RngStream(11), 10_000)
        assert _within_binomial(batch.acceptance_rate, 0.6200, batch.n_total)

    def test_matches_radial_law(self):
        n = 25_000
        batch = sample_radius(UNIT, RngStream(12), n)
        distance = stats.kstest(batch.values, lambda r: radial_cdf(UNIT, r)).statistic
        assert distance < _ks_critical(n)

    def test_radial_points_land_in_sector(self):
        batch = sample_points(UNIT, RngStream(13), 5000, SamplingStrategy.RADIAL)
        assert all(contains(UNIT, p) for p in batch.points())

    @pytest.mark.parametrize(("mu", "strategy"), [(5.0, SamplingStrategy.RADIAL), (17.14, SamplingStrategy.CARTESIAN)])
    @pytest.mark.parametrize("forced", list(SamplingStrategy))
    def test_both_strategies_share_the_radial_law(self, mu, strategy, forced):
        geom = NetworkGeometry(mu, 1.0)
        assert choose_strategy(mu) is strategy
        n = 20_000
        batch = sample_distances(geom, RngStream(14), n, forced)
        distance = stats.kstest(batch.distances(), lambda r: radial_cdf(geom, r)).statistic
        assert distance < _ks_critical(n)


class TestParallelSampling:
    def test_depends_on_seed_and_workers_only(self):
        a = sample_distances_parallel(MACROCELL, RngStream(5), 10_001, workers=4)
        b = sample_distances_parallel(MACROCELL, RngStream(5), 10_001, workers=4)
        assert np.array_equal(a.values, b.values)
        assert a.n_accepted == 10_001

    def test_single_worker_matches_serial(self):
        serial = sample_distances(MACROCELL, RngStream(5), 2000)
        parallel = sample_distances_parallel(MACROCELL, RngStream(5), 2000, workers=1)
        assert np.array_equal(serial.values, parallel.values)

    def test_more_workers_than_samples(self):
        batch = sample_distances_parallel(MACROCELL, RngStream(5), 3, workers=8)
        assert batch.n_accepted == 3

    def test_rejects_zero_workers(self):
        with pytest.raises(DomainError):
            sample_distances_parallel(MACROCELL, RngStream(5), 10, workers=0)


class TestAcceptanceAnalytics:
    def test_cartesian_values(self):
        assert acceptance_rate_cartesian(4.57) == pytest.approx(0.529, abs=1e-3)
        assert acceptance_rate_cartesian(3.0) == pytest.approx(0.51939, abs=1e-5)
        assert acceptance_rate_cartesian(1e6) == pytest.approx(0.5, abs=1e-6)

    def test_cartesian_envelope(self):
        rates = np.array([acceptance_rate_cartesian(mu) for mu in np.linspace(2 + 1e-9, 50, 20_000)])
        assert rates.min() > 0.465
        assert rates.max() <= 0.5290

    def test_cartesian_infimum_below_stated_bound(self):
        assert acceptance_rate_cartesian(2 + 1e-9) == pytest.approx(0.4651, abs=1e-4)

    def test_rcr_domain(self):
        with pytest.raises(DomainError):
            acceptance_rate_cartesian(2.0)
        with pytest.raises(DomainError):
            acceptance_rate_radial(1.5)

    def test_optimal_rcr(self):
        mu = optimal_rcr()
        assert mu == pytest.approx(4.5720, abs=5e-3)
        assert acceptance_rate_cartesian(mu) == pytest.approx(0.529, abs=1e-3)
        slope = (acceptance_rate_cartesian(mu + 1e-5) - acceptance_rate_cartesian(mu - 1e-5)) / 2e-5
        assert abs(slope) <= 1e-6

    def test_optimal_rcr_matches_numeric_maximum(self):
        assert numeric_optimal_rcr() == pytest.approx(optimal_rcr(), abs=1e-6)

    def test_grid_argmax(self):
        grid = np.linspace(4.5, 4.65, 15_001)
        best = grid[np.argmax([acceptance_rate_cartesian(mu) for mu in grid])]
        assert best == pytest.approx(optimal_rcr(), abs=1e-4)

    def test_estimator_stats(self):
        mean, variance = ar_estimator_stats(3.0, 10_000)
        p = acceptance_rate_cartesian(3.0)
        assert mean == p
        assert variance == pytest.approx(p * (1 - p) / 10_000)
        assert variance == pytest.approx(ar_estimator_variance_closed_form(3.0, 10_000), rel=1e-12)

    def test_estimator_variance_consistency(self):
        variances = [ar_estimator_stats(4.0, n)[1] for n in (10, 1000, 100_000)]
        assert variances[0] > variances[1] > variances[2]
        assert 1e6 * ar_estimator_stats(1e6, 1_000_000)[1] == pytest.approx(0.25, abs=1e-6)

    def test_variance_stationary_at_optimal_rcr(self):
        assert ar_variance_derivative(optimal_rcr(), 1000) == pytest.approx(0.0, abs=1e-12)
        assert ar_variance_derivative(3.0, 1000) != pytest.approx(0.0, abs=1e-9)

    def test_radial_values(self):
        assert acceptance_rate_radial(3.0) == pytest.approx(0.6200, abs=1e-4)
        assert acceptance_rate_radial(1e6) == pytest.approx(3 / (2 * math.pi), abs=1e-5)

    def test_radial_strictly_decreasing(self):
        rates = np.array([acceptance_rate_radial(mu) for mu in np.linspace(2.01, 100, 5000)])
        assert np.all(np.diff(rates) < 0)

    def test_crossover(self):
        mu = crossover_rcr()
        assert mu == pytest.approx(11.594, abs=5e-3)
        assert acceptance_rate_radial(mu) == pytest.approx(acceptance_rate_cartesian(mu), abs=1e-9)
        assert numeric_crossover_rcr() == pytest.approx(mu, abs=1e-9)

    def test_strategy_choice(self):
        assert choose_strategy(5.0) is SamplingStrategy.RADIAL
        assert choose_strategy(600 / 35) is SamplingStrategy.CARTESIAN
        assert choose_strategy(crossover_rcr()) is SamplingStrategy.RADIAL
