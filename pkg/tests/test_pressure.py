import numpy as np
import pytest
from scipy.special import erf, exp1

from pvlab.grid import GridSpec, ScalarField, VectorField, laplacian
from pvlab.mollifier import RampProfile
from pvlab.pressure import (
    NotCompactError,
    cutoff_field,
    green,
    poisson_freespace,
    pressure_freespace,
    ramp_test_function,
    random_test_functions,
    weak_form_residual,
    weak_form_scale,
)
from pvlab.synth import generic_field, radial_vortex_2d, rotate, rotation_group, vortex_profile


def gaussian_source(g, s):
    """Unit-mass Gaussian and its decaying potential (closed form)."""
    r2 = np.broadcast_to(sum(c * c for c in g.coords()), g.shape)
    if g.dim == 2:
        f = np.exp(-r2 / s**2) / (np.pi * s**2)
        u = np.full(g.shape, (2 * np.log(s) - np.euler_gamma) / (4 * np.pi))
        pos = r2 > 0
        u[pos] = (np.log(r2[pos]) + exp1(r2[pos] / s**2)) / (4 * np.pi)
    else:
        f = np.exp(-r2 / s**2) / (np.pi**1.5 * s**3)
        r = np.sqrt(r2)
        u = np.full(g.shape, -1 / (2 * np.pi**1.5 * s))
        pos = r > 0
        u[pos] = -erf(r[pos] / s) / (4 * np.pi * r[pos])
    return ScalarField(g, f), u


class TestPoisson:
    @pytest.mark.parametrize("dim,M,s", [(2, 64, 0.1), (2, 128, 0.08), (3, 64, 0.1)])
    def test_manufactured_gaussian(self, dim, M, s):
        g = GridSpec(dim, M, 1.0)
        f, u = gaussian_source(g, s)
        got = poisson_freespace(f).samples
        assert np.abs(got - u).max() <= 1e-8 * np.abs(u).max()

    def test_sampled_kernel_converges(self):
        errs = []
        for M in (64, 128, 256):
            g = GridSpec(2, M, 1.0)
            f, u = gaussian_source(g, 0.1)
            errs.append(np.abs(poisson_freespace(f, kernel="sampled").samples - u).max())
        assert errs[0] > errs[1] > errs[2]
        with pytest.raises(ValueError):
            poisson_freespace(gaussian_source(GridSpec(2, 64, 1.0), 0.1)[0], kernel="bogus")

    @pytest.mark.parametrize("point", [(1.5, 0.0), (2.0, -3.0), (0.3, 0.4)])
    def test_evaluate_inside_and_beyond_box(self, point):
        g = GridSpec(2, 128, 1.0)
        f, _ = gaussian_source(g, 0.08)
        u = poisson_freespace(f)
        r2 = point[0] ** 2 + point[1] ** 2
        want = (np.log(r2) + exp1(r2 / 0.08**2)) / (4 * np.pi)
        assert u.evaluate([point])[0] == pytest.approx(want, abs=1e-9)

    def test_green_function(self):
        assert green(2, np.array([1.0]))[0] == 0.0
        assert green(3, np.array([2.0]))[0] == pytest.approx(-1 / (8 * np.pi))

    def test_rejects_wide_source(self):
        g = GridSpec(2, 64, 1.0)
        f, _ = gaussian_source(g, 0.3)
        with pytest.raises(NotCompactError):
            poisson_freespace(f)


class TestPressure:
    def test_radial_vortex_profile(self, grid256):
        v, p_exact, _ = radial_vortex_2d(vortex_profile(0.4), grid256)
        p = pressure_freespace(v)
        assert np.abs(p.samples - p_exact.samples).max() <= 1e-6 * np.abs(p_exact.samples).max()

    def test_laplacian_matches_analytic_source(self, grid256):
        # Δp = (1/r) d(f^2)/dr for the tangential vortex with speed f
        a = 0.4
        v, _, _ = radial_vortex_2d(vortex_profile(a), grid256)
        p = pressure_freespace(v, filtered=False)
        r = grid256.radius()
        t = np.minimum(r / a, 1 - 1e-9)
        b = np.where(r < a, np.exp(1 / (t * t - 1)), 0.0)
        f = r * b
        df = b * (1 - 2 * t * t / (t * t - 1) ** 2)
        exact = 2 * b * df  # 2 f f' / r with f / r = b
        lap = laplacian(p).samples
        # limited by the spectral second derivative of the sampled source, not by the solver
        assert np.abs(lap - exact).max() < 1e-4 * np.abs(exact).max()
        assert np.all(f >= 0)

    @pytest.mark.parametrize("lam", [0.5, 3.0])
    def test_quadratic_scaling(self, grid128, lam):
        v = generic_field(grid128, 1)
        p1 = pressure_freespace(v).samples
        p2 = pressure_freespace(v.scaled(lam)).samples
        assert np.allclose(p2, lam**2 * p1, rtol=0, atol=1e-12 * lam**2 * np.abs(p1).max())

    def test_rotation_equivariance(self, grid128):
        v = generic_field(grid128, 2, symmetric=False)
        R = rotation_group(2)[1]
        pr = pressure_freespace(rotate(v, R)).samples
        p = pressure_freespace(v).samples
        rotated = np.rot90(p, 1)  # p(R^T x) on the node lattice
        inner = np.ix_(range(1, 128), range(1, 128))
        assert np.abs(pr[inner] - np.roll(rotated, 1, axis=0)[inner]).max() < 1e-12 * np.abs(p).max()

    def test_zero_velocity(self, grid128):
        z = VectorField(grid128, [np.zeros(grid128.shape)] * 2)
        assert np.all(pressure_freespace(z).samples == 0.0)


class TestWeakForm:
    def test_exact_pair_has_tiny_residual(self, grid256, rng):
        v, _, _ = radial_vortex_2d(vortex_profile(0.4), grid256)
        p = pressure_freespace(v)
        for h in random_test_functions(grid256, rng, 6, ramps=2):
            assert abs(weak_form_residual(v, p, h)) <= 1e-6 * weak_form_scale(v, p, h)

    def test_detects_wrong_pressure(self, grid256, rng):
        v = generic_field(grid256, 0)
        p = pressure_freespace(v)
        wrong = p.with_samples(p.samples * 1.01)
        tests = random_test_functions(grid256, rng, 6, ramps=2)
        rel = [abs(weak_form_residual(v, wrong, h)) / weak_form_scale(v, wrong, h) for h in tests]
        assert max(rel) > 1e-4

    def test_linear_in_pressure(self, grid128, rng):
        v = generic_field(grid128, 0)
        p = pressure_freespace(v)
        h = random_test_functions(grid128, rng, 1)[0]
        q = ScalarField(grid128, rng.normal(size=grid128.shape))
        lhs = weak_form_residual(v, p.with_samples(p.samples + q.samples), h) - weak_form_residual(v, p, h)
        assert lhs == pytest.approx(float(np.sum(q.samples * laplacian(h).samples)) * grid128.cell_volume, rel=1e-9)


class TestTestFunctions:
    def test_random_functions(self, grid256, rng):
        fs = random_test_functions(grid256, rng, 12, ramps=4)
        assert len(fs) == 12
        for h in fs[:8]:
            assert h.support_radius() < 0.48
        for h in fs[8:]:
            # ramps are constant near the box edge
            edge = h.samples[0, :]
            assert np.ptp(edge) < 1e-15 and edge[0] > 0

    def test_ramp_matches_profile(self, grid128):
        h = ramp_test_function(0.2, 0.6, 0.05, grid128)
        want = RampProfile(0.2, 0.6, 0.05)(grid128.radius())
        assert np.array_equal(h.samples, want)
        with pytest.raises(ValueError):
            ramp_test_function(0.2, 0.95, 0.06, grid128)
        with pytest.raises(ValueError):
            ramp_test_function(0.2, 0.6, 0.25, grid128)

    def test_cutoff(self, grid128):
        c = cutoff_field(0.2, grid128)
        r = grid128.radius()
        assert np.all(c.samples[r <= 0.2] == 1.0) and np.all(c.samples[r >= 0.4] == 0.0)
