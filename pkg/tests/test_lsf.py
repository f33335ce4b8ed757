import math

import numpy as np
import pytest
from scipy import integrate

from hexfade.channel import ChannelModel, breakpoints_db, mean_pl_cdf, mean_pl_moments, mean_pl_pdf
from hexfade.exceptions import DegenerateModelError, DomainError
from hexfade.lsf import (
    LsfDensity,
    convolution_oracle,
    lsf_cdf,
    lsf_cdf_many,
    lsf_median,
    lsf_moments,
    lsf_pdf,
    lsf_pdf_many,
    q_function,
    support_bounds,
    z_breakpoints,
    z_breakpoints_log_form,
)

SHIFT_600 = 2 * math.log(10) * 100 / 35


def _unity(sigma: float) -> ChannelModel:
    return ChannelModel.from_values(cell_radius_m=1.0, close_in_m=0.1, alpha_db=0.0, beta_db=20.0, sigma_psi_db=sigma)


def _integrate_pdf(density: LsfDensity, lo: float, hi: float) -> float:
    knots = [k for k in breakpoints_db(density.model) if lo < k < hi]
    return integrate.quad(lambda t: lsf_pdf(density, t), lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200, points=knots)[0]


@pytest.fixture(scope="module")
def macrocell():
    return ChannelModel.ieee80220(600.0)


@pytest.fixture(scope="module")
def density(macrocell):
    return LsfDensity(macrocell)


class TestQFunction:
    def test_values(self):
        assert q_function(0.0) == 0.5
        assert q_function(3.0) == pytest.approx(0.0013499, abs=1e-7)

    def test_symmetry(self):
        z = np.linspace(-8, 8, 33)
        np.testing.assert_allclose(q_function(z) + q_function(-z), 1.0, atol=1e-15)

    def test_far_tail(self):
        assert q_function(8.0) == pytest.approx(6.22096057427e-16, rel=1e-10)


class TestDensityConstants:
    def test_tolerance_range(self, macrocell):
        with pytest.raises(DomainError):
            LsfDensity(macrocell, rtol=0.0)
        with pytest.raises(DomainError):
            LsfDensity(macrocell, rtol=1e-2)
        assert LsfDensity(macrocell, rtol=1e-3).rtol == 1e-3

    def test_k0(self, density, macrocell):
        assert density.k0 == pytest.approx(math.exp((math.sqrt(2) * math.log(10) * 10 / 35) ** 2))
        assert density.k0 >= 1
        assert LsfDensity(macrocell.with_sigma(0.0)).k0 == 1

    def test_prefactor_matches_scale(self, density):
        for l in (60.0, 120.0, 160.0):
            assert density.prefactor * 10 ** (2 * l / 35) == pytest.approx(density.scale(l), rel=1e-12)


class TestZBreakpoints:
    def test_centering(self, macrocell):
        w0, _, _ = breakpoints_db(macrocell)
        z0, _, _ = z_breakpoints(macrocell, w0 - SHIFT_600)
        assert z0 == pytest.approx(0.0, abs=1e-12)

    def test_shift_constant(self):
        assert pytest.approx(13.1576, abs=1e-4) == SHIFT_600

    def test_ordered(self, macrocell):
        for l in np.linspace(40, 180, 15):
            z0, z_inner, z_cell = z_breakpoints(macrocell, l)
            assert z0 < z_inner < z_cell

    def test_both_forms_agree(self, macrocell):
        for l in (60.0, 120.0, 150.0):
            np.testing.assert_allclose(
                z_breakpoints(macrocell, l), z_breakpoints_log_form(macrocell, l), rtol=0, atol=1e-12
            )

    def test_at_120(self, macrocell):
        z0, _, _ = z_breakpoints(macrocell, 120.0)
        w0, _, _ = breakpoints_db(macrocell)
        assert z0 == pytest.approx((w0 - 120.0 - SHIFT_600) / 10, abs=1e-12)

    def test_degenerate(self, macrocell):
        with pytest.raises(DegenerateModelError, match="sigma_psi_db = 0"):
            z_breakpoints(macrocell.with_sigma(0.0), 100.0)
        with pytest.raises(DegenerateModelError):
            z_breakpoints_log_form(macrocell.with_sigma(0.0), 100.0)


class TestClosedForm:
    def test_matches_oracle_at_120(self, density, macrocell):
        assert lsf_pdf(density, 120.0) == pytest.approx(convolution_oracle(macrocell, 120.0), abs=1e-6)

    def test_matches_oracle_on_grid(self, density, macrocell):
        low, high = support_bounds(macrocell)
        grid = np.linspace(low, high, 200)
        closed = lsf_pdf_many(density, grid)
        oracle = np.array([convolution_oracle(macrocell, l) for l in grid])
        assert np.max(np.abs(closed - oracle)) <= 1e-6
        assert np.all(closed >= 0)

    @pytest.mark.parametrize(
        "model",
        [
            pytest.param(ChannelModel.ieee80220(1500.0), id="L1500"),
            pytest.param(ChannelModel.ieee80220(2500.0), id="L2500"),
            pytest.param(ChannelModel.ieee80220(3500.0), id="L3500"),
            pytest.param(_unity(1.0), id="unity-s1"),
            pytest.param(_unity(6.0), id="unity-s6"),
            pytest.param(_unity(10.0), id="unity-s10"),
        ],
    )
    def test_matches_oracle_across_models(self, model):
        density = LsfDensity(model)
        low, high = support_bounds(model)
        grid = np.linspace(low - model.sigma, high + model.sigma, 41)
        closed = lsf_pdf_many(density, grid)
        oracle = np.array([convolution_oracle(model, l) for l in grid])
        assert np.max(np.abs(closed - oracle)) <= 1e-6
        assert np.all(closed >= 0)

    def test_normalised(self, density, macrocell):
        low, high = support_bounds(macrocell)
        assert _integrate_pdf(density, low - 30, high + 30) == pytest.approx(1.0, abs=1e-5)

    def test_small_sigma_approaches_mean_path_loss(self, macrocell):
        model = macrocell.with_sigma(0.01)
        w0, w_inner, _ = breakpoints_db(model)
        l = (w0 + w_inner) / 2
        assert lsf_pdf(LsfDensity(model), l) == pytest.approx(mean_pl_pdf(model, l), rel=1e-3)

    def test_far_tails_vanish(self, density, macrocell):
        low, high = support_bounds(macrocell)
        assert lsf_pdf(density, low - 600) == 0
        assert lsf_pdf(density, high + 600) == 0

    def test_shift_covariance(self, density, macrocell):
        shifted = LsfDensity(
            ChannelModel.from_values(
                cell_radius_m=600.0, close_in_m=35.0, alpha_db=34.5 + 7.25, beta_db=35.0, sigma_psi_db=10.0
            )
        )
        for l in (80.0, 120.0, 130.0, 145.0):
            assert lsf_pdf(shifted, l + 7.25) == pytest.approx(lsf_pdf(density, l), rel=1e-10)

    def test_unshadowed_falls_back(self, macrocell):
        model = macrocell.with_sigma(0.0)
        for l in (90.0, 125.0, 131.0, 140.0):
            assert lsf_pdf(LsfDensity(model), l) == mean_pl_pdf(model, l)

    def test_density_methods_delegate(self, density):
        assert density.pdf(120.0) == lsf_pdf(density, 120.0)
        np.testing.assert_array_equal(density.pdf_many([100.0, 120.0]), lsf_pdf_many(density, [100.0, 120.0]))


class TestOracle:
    def test_far_below_support(self, macrocell):
        low, _ = support_bounds(macrocell)
        assert convolution_oracle(macrocell, low - 100) <= 1e-12

    def test_integrates_to_one(self, macrocell):
        w0, w_inner, w_cell = breakpoints_db(macrocell)
        total = integrate.quad(
            lambda l: convolution_oracle(macrocell, l),
            w0 - 100,
            w_cell + 100,
            epsabs=1e-11,
            epsrel=1e-10,
            limit=200,
            points=[w0, w_inner, w_cell],
        )[0]
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_degenerate(self, macrocell):
        with pytest.raises(DegenerateModelError):
            convolution_oracle(macrocell.with_sigma(0.0), 100.0)


class TestSupport:
    def test_macrocell(self, macrocell):
        low, high = support_bounds(macrocell)
        assert low == pytest.approx(58.542, abs=1e-3)
        assert high == pytest.approx(161.735, abs=1e-3)

    def test_unshadowed(self, macrocell):
        model = macrocell.with_sigma(0.0)
        w0, _, w_cell = breakpoints_db(model)
        assert tuple(support_bounds(model)) == (w0, w_cell)

    def test_window_holds_nearly_all_mass(self, density, macrocell):
        low, high = support_bounds(macrocell)
        lower, upper = lsf_cdf_many(density, [low, high])
        assert upper - lower >= 0.995


class TestCdf:
    def test_endpoints(self, density, macrocell):
        low, high = support_bounds(macrocell)
        assert lsf_cdf(density, low - 60) <= 1e-6
        assert lsf_cdf(density, high + 60) == pytest.approx(1.0, abs=1e-5)

    def test_monotone(self, density, macrocell):
        low, high = support_bounds(macrocell)
        values = lsf_cdf_many(density, np.linspace(low, high, 60))
        assert np.all(np.diff(values) >= 0)

    def test_vectorised_matches_cumulative(self, density):
        ls = np.array([70.0, 100.0, 125.0, 131.0, 150.0])
        cumulative = np.array([lsf_cdf(density, l) for l in ls])
        np.testing.assert_allclose(lsf_cdf_many(density, ls), cumulative, rtol=0, atol=1e-7)
        assert density.cdf(125.0) == lsf_cdf_many(density, 125.0)

    def test_median(self, density, macrocell):
        median = lsf_median(density)
        low, high = support_bounds(macrocell)
        assert low < median < high
        assert lsf_cdf(density, median) == pytest.approx(0.5, abs=1e-6)

    def test_unshadowed(self, macrocell):
        model = macrocell.with_sigma(0.0)
        density = LsfDensity(model)
        assert lsf_cdf(density, 120.0) == mean_pl_cdf(model, 120.0)
        assert lsf_cdf_many(density, 120.0) == mean_pl_cdf(model, 120.0)


class TestMoments:
    def test_variance_adds_shadowing(self, density, macrocell):
        mean, variance = lsf_moments(density)
        w_mean, w_variance = mean_pl_moments(macrocell)
        assert mean == pytest.approx(w_mean, abs=1e-6)
        assert variance == pytest.approx(w_variance + 100.0, rel=1e-4)

    def test_unshadowed(self, macrocell):
        model = macrocell.with_sigma(0.0)
        assert lsf_moments(LsfDensity(model)) == mean_pl_moments(model)
