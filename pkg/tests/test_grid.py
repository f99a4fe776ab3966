import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special
from scipy.integrate import quad

from zakharov4d.grid import (
    GridError,
    RadialField,
    apply_multiplier,
    field,
    gradient_norm_sq,
    inner,
    lp_norm,
    make_grid,
    op_D,
    op_D_inverse,
    op_laplacian,
    low_frequency_fraction,
    radial_derivative,
    to_spectral,
    transform,
    truncation_profile,
    zero_field,
    FOURIER_NORM,
    SPHERE_S3,
    SPECTRAL,
)

W4_4_EXACT = 32.0 * np.pi**2 / 3.0


def sample_w(grid):
    return 1.0 / (1.0 + grid.r_nodes**2 / 8.0)


def band_limited(grid, rng, frac=0.75):
    spec = np.zeros(grid.n, dtype=complex)
    k = int(frac * grid.n)
    spec[:k] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return transform(RadialField(grid, spec, SPECTRAL))


class TestMakeGrid:
    def test_first_bessel_zero_placement(self):
        # j_{1,1} from an independent root bracket on J_1
        from scipy.optimize import brentq
        j11 = brentq(special.j1, 3.0, 4.5, xtol=1e-14)
        assert abs(j11 - 3.8317059702) < 1e-9
        g = make_grid(8, 10.0)
        j19 = special.jn_zeros(1, 9)[-1]
        assert g.r_nodes[0] == pytest.approx(10.0 * j11 / j19, rel=1e-12)
        assert g.rho_nodes[0] == pytest.approx(j11 / 10.0, rel=1e-12)
        assert abs(g.rho_nodes[0] - 0.38317) < 1e-5

    def test_nodes_increasing_and_bounded(self):
        g = make_grid(64, 25.0)
        assert np.all(np.diff(g.r_nodes) > 0)
        assert np.all(np.diff(g.rho_nodes) > 0)
        assert g.r_nodes[0] > 0 and g.r_nodes[-1] < g.r_max
        assert np.all(g.quad_weights_r > 0) and np.all(g.quad_weights_rho > 0)

    def test_zero_accuracy(self):
        g = make_grid(32, 10.0)
        zeros = g.rho_nodes * 10.0
        assert np.abs(special.j1(zeros)).max() < 1e-12

    @pytest.mark.parametrize("bad", [4, 7, 0, -3])
    def test_rejects_small_n(self, bad):
        with pytest.raises(GridError):
            make_grid(bad, 10.0)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
    def test_rejects_bad_rmax(self, bad):
        with pytest.raises(GridError):
            make_grid(16, bad)


class TestTransform:
    def test_gaussian_pair(self, grid_medium):
        g = grid_medium
        f = field(g, np.exp(-g.r_nodes**2 / 2))
        spec = transform(f)
        exact = FOURIER_NORM * np.exp(-g.rho_nodes**2 / 2)
        num = SPHERE_S3 * np.sum(g.quad_weights_rho * np.abs(spec.values - exact) ** 2)
        den = SPHERE_S3 * np.sum(g.quad_weights_rho * np.abs(exact) ** 2)
        assert np.sqrt(num / den) < 1e-8

    def test_zero_field(self, grid_small):
        z = transform(zero_field(grid_small))
        assert np.all(z.values == 0)
        assert z.space == SPECTRAL

    def test_round_trip_band_limited(self, grid_medium, rng):
        f = band_limited(grid_medium, rng)
        back = transform(transform(f))
        err = lp_norm(back - f, 2) / lp_norm(f, 2)
        assert err < 1e-10

    def test_plancherel(self, grid_medium, rng):
        f = band_limited(grid_medium, rng)
        spec = transform(f)
        phys_sq = lp_norm(f, 2) ** 2
        spec_sq = SPHERE_S3 * np.sum(
            grid_medium.quad_weights_rho * np.abs(spec.values) ** 2)
        assert abs(phys_sq - FOURIER_NORM**-2 * spec_sq) / phys_sq < 1e-8

    def test_rejects_non_finite(self, grid_small):
        vals = np.ones(grid_small.n, dtype=complex)
        vals[3] = np.nan
        with pytest.raises(GridError):
            transform(field(grid_small, vals))


class TestMultipliers:
    def test_D_inverse_pair_on_w_squared(self, grid_w):
        w2 = field(grid_w, sample_w(grid_w) ** 2 * truncation_profile(grid_w))
        back = op_D_inverse(op_D(w2))
        assert lp_norm(back - w2, 2) / lp_norm(w2, 2) < 1e-8

    def test_laplacian_of_w_is_minus_w_cubed(self, grid_w):
        g = grid_w
        w = sample_w(g)
        wt = field(g, w * truncation_profile(g))
        lap = op_laplacian(wt)
        mask = g.interior_mask()
        err = np.abs(lap.values + w**3)[mask].max()
        assert err < 1e-6

    def test_half_wave_at_zero_time_is_identity(self, grid_small, rng):
        f = band_limited(grid_small, rng)
        out = apply_multiplier(f, np.exp(1j * 0.0 * grid_small.rho_nodes))
        assert np.allclose(out.values, f.values, rtol=0, atol=1e-12)

    def test_composition_is_product(self, grid_small, rng):
        f = to_spectral(band_limited(grid_small, rng))
        m1 = lambda rho: np.exp(0.3j * rho**2)
        m2 = lambda rho: 1.0 / (1.0 + rho**2)
        one = apply_multiplier(apply_multiplier(f, m1), m2)
        both = apply_multiplier(f, lambda rho: m1(rho) * m2(rho))
        # same spectral representation: no transform round-trip, only fp
        # reassociation of the pointwise products
        scale = np.abs(both.values).max()
        assert np.allclose(one.values, both.values, rtol=0, atol=1e-14 * scale)

    def test_rejects_non_finite_multiplier(self, grid_small):
        f = zero_field(grid_small)
        with pytest.raises(GridError):
            apply_multiplier(f, lambda rho: 1.0 / (rho - rho[3]))

    def test_low_frequency_fraction(self, grid_small):
        spec = np.zeros(grid_small.n, dtype=complex)
        spec[0] = 1.0
        f = RadialField(grid_small, spec, SPECTRAL)
        frac, coeffs = low_frequency_fraction(f)
        assert frac == pytest.approx(1.0)
        assert coeffs[0] == 1.0


class TestNorms:
    def test_w4_norm_closed_form(self):
        g = make_grid(4096, 400.0)
        w = field(g, sample_w(g))
        val = lp_norm(w, 4) ** 4
        # oracle: substitution r^2 = 8t gives 2 pi^2 * 32 * B(2,2) = 32 pi^2/3
        oracle, _ = quad(lambda r: (1 + r * r / 8.0) ** -4 * r**3, 0, np.inf)
        assert abs(SPHERE_S3 * oracle - W4_4_EXACT) < 1e-10
        assert abs(val - W4_4_EXACT) / W4_4_EXACT < 1e-6

    def test_w_squared_l2(self):
        g = make_grid(4096, 400.0)
        w2 = field(g, sample_w(g) ** 2)
        assert lp_norm(w2, 2) == pytest.approx(np.sqrt(W4_4_EXACT), rel=1e-6)
        assert abs(np.sqrt(W4_4_EXACT) - 10.2604) < 1e-3

    def test_zero_norm(self, grid_small):
        for p in (1, 2, 4, np.inf):
            assert lp_norm(zero_field(grid_small), p) == 0.0

    def test_rejects_p_below_one(self, grid_small):
        with pytest.raises(ValueError):
            lp_norm(zero_field(grid_small), 0.5)

    @given(lam=st.floats(-3, 3, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_homogeneity(self, lam):
        g = make_grid(64, 12.0)
        f = field(g, np.exp(-g.r_nodes**2))
        assert lp_norm(lam * f, 3) == pytest.approx(abs(lam) * lp_norm(f, 3), abs=1e-13)


class TestInnerAndGradient:
    def test_inner_w_w3(self):
        g = make_grid(4096, 400.0)
        w = sample_w(g)
        val = inner(field(g, w), field(g, w**3))
        assert val == pytest.approx(W4_4_EXACT, rel=1e-6)

    def test_inner_of_if_vanishes(self, grid_small):
        f = field(grid_small, np.exp(-grid_small.r_nodes**2))
        assert abs(inner(f, RadialField(f.grid, 1j * f.values))) < 1e-14

    def test_inner_w_lap_w(self, grid_w):
        g = grid_w
        w = sample_w(g)
        wt = field(g, w * truncation_profile(g))
        lhs = inner(wt, op_laplacian(wt))
        assert lhs == pytest.approx(-gradient_norm_sq(wt), rel=1e-10)

    def test_gradient_norm_gaussian(self, grid_medium):
        # |grad e^{-r^2/2}|^2 = integral r^2 e^{-r^2} -> 2 pi^2 * Gamma(3)/2 = 2 pi^2
        f = field(grid_medium, np.exp(-grid_medium.r_nodes**2 / 2))
        oracle, _ = quad(lambda r: r**2 * np.exp(-(r**2)) * r**3, 0, np.inf)
        assert gradient_norm_sq(f) == pytest.approx(SPHERE_S3 * oracle, rel=1e-10)

    def test_gradient_of_zero(self, grid_small):
        assert gradient_norm_sq(zero_field(grid_small)) == 0.0

    def test_gradient_scaling(self, grid_medium):
        f = field(grid_medium, np.exp(-grid_medium.r_nodes**2 / 2))
        assert gradient_norm_sq(2.5 * f) == pytest.approx(
            2.5**2 * gradient_norm_sq(f), rel=1e-12)

    def test_grid_mismatch_rejected(self, grid_small, grid_medium):
        with pytest.raises(GridError):
            inner(zero_field(grid_small), zero_field(grid_medium))


class TestDerivative:
    def test_derivative_of_gaussian(self, grid_medium):
        g = grid_medium
        f = field(g, np.exp(-g.r_nodes**2 / 4))
        df = radial_derivative(f)
        exact = -0.5 * g.r_nodes * np.exp(-g.r_nodes**2 / 4)
        assert np.abs(df.values - exact).max() < 5e-6

    def test_derivative_fourth_order(self):
        # halving h cuts the error by ~2^4
        errs = []
        for n in (256, 512):
            g = make_grid(n, 40.0)
            f = field(g, np.exp(-g.r_nodes**2 / 4))
            exact = -0.5 * g.r_nodes * np.exp(-g.r_nodes**2 / 4)
            errs.append(np.abs(radial_derivative(f).values - exact).max())
        assert errs[0] / errs[1] > 10
