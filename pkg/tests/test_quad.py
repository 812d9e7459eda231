import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy import integrate, special
from scipy.special import erfc, i0

from pvlab.grid import DomainError, GridSpec, ScalarField, VectorField
from pvlab.meridional import MeridionalField, MeridionalGrid
from pvlab.quad import (
    PlaneSpec,
    SphereRule,
    _int_j0,
    ball_integral,
    meridional_line_integral,
    meridional_line_integrals,
    normal_energy_on_sphere,
    plane_integral,
    radial_shell_energy,
    shell_weighted_integral,
    sphere_integral,
    tangential_shell_energy,
)

S = 0.1


def gauss(g, s=S):
    r2 = sum(c * c for c in g.coords())
    return ScalarField(g, np.broadcast_to(np.exp(-r2 / s**2), g.shape))


@pytest.fixture(scope="module")
def g2():
    return GridSpec(2, 128, 1.0)


@pytest.fixture(scope="module")
def g3():
    return GridSpec(3, 64, 1.0)


class TestPlaneSpec:
    def test_through_and_offset(self):
        pl = PlaneSpec.through((3.0, 4.0), 0.5)
        assert pl.xi == (0.6, 0.8) and pl.offset == pytest.approx(0.5)
        assert np.allclose(pl.frame() @ np.asarray(pl.xi), 0.0)

    def test_frame_3d_orthonormal(self):
        F = PlaneSpec.through((1.0, 2.0, 2.0), 0.0).frame()
        assert np.allclose(F @ F.T, np.eye(2))

    @pytest.mark.parametrize("xi,x0", [((1.0, 1.0), (0.0, 0.0)), ((1.0, 0.0), (0.0, 0.0, 0.0))])
    def test_rejects(self, xi, x0):
        with pytest.raises(ValueError):
            PlaneSpec(xi, x0)


class TestClosedForms2D:
    @pytest.mark.parametrize("R", [0.02, 0.1, 0.25, 0.6])
    def test_sphere(self, g2, R):
        assert sphere_integral(gauss(g2), R) == pytest.approx(2 * np.pi * R * np.exp(-(R**2) / S**2), abs=1e-13)

    def test_off_center_circle(self, g2):
        c, R = np.array([0.05, -0.02]), 0.08
        d = np.linalg.norm(c)
        want = 2 * np.pi * R * np.exp(-(R * R + d * d) / S**2) * i0(2 * R * d / S**2)
        assert sphere_integral(gauss(g2), R, center=c) == pytest.approx(want, rel=1e-11)
        assert sphere_integral(gauss(g2), R, center=c, method="nodes") == pytest.approx(want, rel=1e-10)

    @pytest.mark.parametrize("R", [0.0, 0.05, 0.2])
    def test_shell_and_ball(self, g2, R):
        f = gauss(g2)
        shell = shell_weighted_integral(f, R)
        assert shell.value == pytest.approx(np.pi**1.5 * S * erfc(R / S), rel=1e-11)
        if R > 0:
            assert ball_integral(f, R).value == pytest.approx(np.pi * S * S * (1 - np.exp(-(R**2) / S**2)), rel=1e-11)
        assert ball_integral(f).value == pytest.approx(np.pi * S * S, rel=1e-12)

    def test_grid_method_cross_check(self):
        # the hard cut at |x| = R costs O(h) with lattice-dependent sign
        f = gauss(GridSpec(2, 256, 1.0))
        a = shell_weighted_integral(f, 0.2).value
        b = shell_weighted_integral(f, 0.2, method="grid").value
        assert b == pytest.approx(a, rel=2e-2)
        with pytest.raises(ValueError):
            shell_weighted_integral(f, 0.05, method="bogus")

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.0, np.pi), st.floats(-0.4, 0.4))
    @example(5e-324, 0.25)
    def test_line(self, theta, tau):
        g = GridSpec(2, 64, 1.0)
        pl = PlaneSpec.through((np.cos(theta), np.sin(theta)), tau)
        want = np.sqrt(np.pi) * S * np.exp(-(tau**2) / S**2)
        assert plane_integral(gauss(g), pl).value == pytest.approx(want, abs=1e-12)
        assert plane_integral(gauss(g), pl, method="nodes").value == pytest.approx(want, abs=1e-9)

    def test_normal_and_tangential_energy(self, g2):
        # v = (g, 0): (v·n)^2 = g^2 cos^2θ and |v_τ|^2 = g^2 sin^2θ
        g = gauss(g2).samples
        v = VectorField(g2, [g, np.zeros(g2.shape)])
        R = 0.07
        assert normal_energy_on_sphere(v, R) == pytest.approx(np.pi * R * np.exp(-2 * R * R / S**2), rel=1e-11)
        assert normal_energy_on_sphere(v, R, method="nodes") == pytest.approx(np.pi * R * np.exp(-2 * R * R / S**2), rel=1e-10)
        tang = np.pi * S / np.sqrt(2) * np.sqrt(np.pi) / 2 * erfc(np.sqrt(2) * R / S)
        assert tangential_shell_energy(v, R) == pytest.approx(tang, rel=1e-10)
        assert radial_shell_energy(v, R) == pytest.approx(2 * tang, rel=1e-10)
        assert tangential_shell_energy(v, 2.0) == 0.0

    def test_domain_errors(self, g2):
        f = gauss(g2)
        with pytest.raises(DomainError):
            sphere_integral(f, 0.9, center=(0.3, 0.0))
        with pytest.raises(DomainError):
            ball_integral(f, 1.5)
        with pytest.raises(ValueError):
            shell_weighted_integral(f, -0.1)

    def test_plane_missing_box(self, g2):
        res = plane_integral(gauss(g2), PlaneSpec.through((1.0, 0.0), 1.2))
        assert res.value == 0.0 and "plane-misses-box" in res.flags


class TestClosedForms3D:
    def test_sphere_shell_plane(self, g3):
        f = gauss(g3)
        R = 0.12
        assert sphere_integral(f, R) == pytest.approx(4 * np.pi * R * R * np.exp(-(R**2) / S**2), rel=1e-10)
        assert shell_weighted_integral(f, R).value == pytest.approx(2 * np.pi * S * S * np.exp(-(R**2) / S**2), rel=1e-10)
        pl = PlaneSpec.through((1.0, 2.0, 2.0), 0.07)
        assert plane_integral(f, pl).value == pytest.approx(np.pi * S * S * np.exp(-0.0049 / S**2), rel=1e-10)
        assert ball_integral(f).value == pytest.approx(np.pi**1.5 * S**3, rel=1e-10)


    @pytest.mark.parametrize("xi", [(1.0, 5e-324, 0.0), (1.0, 1e-12, 1e-9)])
    def test_nearly_axis_aligned_plane(self, g3, xi):
        pl = PlaneSpec.through(xi, 0.05)
        assert plane_integral(gauss(g3), pl).value == pytest.approx(np.pi * S * S * np.exp(-0.25), rel=1e-10)


class TestSphereRule:
    @pytest.mark.parametrize("dim,R", [(2, 0.3), (3, 0.3), (3, 0.0)])
    def test_measure(self, dim, R):
        rule = SphereRule.build(dim, R, 1 / 64)
        area = 2 * np.pi * R if dim == 2 else 4 * np.pi * R * R
        assert rule.weights.sum() == pytest.approx(area, abs=1e-14)
        assert np.allclose(np.linalg.norm(rule.nodes, axis=1), R)


@pytest.mark.parametrize("z", [0.3, 2.0, 3.99, 4.0, 7.5, 25.76536951, 60.0, 400.0])
def test_int_j0_against_quad(z):
    edges = np.append(np.arange(0.0, z, 2 * np.pi), z)
    want = sum(integrate.quad(special.j0, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]))
    assert float(_int_j0(np.array([z]))[0]) == pytest.approx(want, abs=1e-12)


def test_int_j0_is_finite_where_struve_breaks():
    z = np.linspace(25.7, 25.8, 2001)
    assert np.all(np.isfinite(_int_j0(z)))


class TestMeridionalLines:
    def test_nodal_and_spline(self):
        mg = MeridionalGrid(2.0, 4.0, 65, 256, periodic_z=True)
        R, Z = mg.mesh()
        p = -np.exp(-(R * R + Z * Z))
        vr = np.zeros(mg.shape)
        mf = MeridionalField(3, mg, vr, vr, p)
        rho, want = 0.5, -np.exp(-0.25) * np.sqrt(np.pi)
        assert meridional_line_integral(mf, "pressure", rho).value == pytest.approx(want, rel=1e-6)
        assert meridional_line_integral(mf, "pressure", 0.51).value == pytest.approx(-np.exp(-0.2601) * np.sqrt(np.pi), rel=1e-6)
        inner, tail, modeled = meridional_line_integrals(mf, "sum")
        assert np.all(tail == 0) and not modeled
        with pytest.raises(DomainError):
            meridional_line_integral(mf, "pressure", 2.5)
        with pytest.raises(ValueError):
            meridional_line_integrals(mf, "bogus")
