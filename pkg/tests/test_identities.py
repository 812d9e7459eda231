import json

import numpy as np
import pytest

from pvlab.grid import DomainError, GridSpec, ScalarField, VectorField
from pvlab.identities import (
    FAIL,
    PASS,
    VIOLATED,
    Hypothesis,
    IdentityReport,
    _report,
    check_axisymmetric_decay,
    check_global,
    check_hyperplane,
    check_sign_sweep,
    check_sphere_formula,
    check_weak_form,
    default_sweep_radii,
)
from pvlab.meridional import MeridionalField, MeridionalGrid, UnsupportedInputError, pressure_meridional
from pvlab.pressure import pressure_freespace, random_test_functions
from pvlab.quad import PlaneSpec
from pvlab.synth import anisotropic_control, meridional_bump_psi, meridional_streamfunction, radial_vortex_2d, vortex_profile


@pytest.fixture(scope="module")
def vortex():
    g = GridSpec(2, 256, 1.0)
    v, _, _ = radial_vortex_2d(vortex_profile(0.4), g)
    return v, pressure_freespace(v)


@pytest.fixture(scope="module")
def meridional():
    mg = MeridionalGrid(4.0, 4.0, 129, 257)
    mf = meridional_streamfunction(3, meridional_bump_psi(mg, 1.2, 0.3, 0.9), mg)
    return pressure_meridional(mf)


class TestWholeSpace:
    @pytest.mark.parametrize("xi,tau", [((1.0, 0.0), 0.0), ((1.0, 2.0), 0.15), ((0.0, 1.0), -0.3)])
    def test_hyperplane_passes_for_exact_pair(self, vortex, xi, tau):
        r = check_hyperplane(*vortex, PlaneSpec.through(xi, tau))
        assert r.status == PASS and r.extra["lhs_nonpositive"]
        assert r.lhs < 0

    def test_global_and_corollary(self, vortex):
        reports = check_global(*vortex)
        assert len(reports) == 2 and all(r.passed for r in reports)
        assert reports[0].extra["energy_spread"] < 1e-12

    def test_wrong_pressure_fails(self, vortex):
        v, p = vortex
        bad = p.with_samples(1.05 * p.samples)
        assert all(r.status == FAIL for r in check_global(v, bad))
        assert check_sphere_formula(v, bad, 0.1).status == FAIL

    @pytest.mark.parametrize("R", [0.0, 0.1, 0.3, 0.5])
    def test_sphere_formula(self, vortex, R):
        assert check_sphere_formula(*vortex, R).status == PASS

    def test_sphere_radius_out_of_range(self, vortex):
        with pytest.raises(DomainError):
            check_sphere_formula(*vortex, 0.6)

    def test_grid_mismatch(self, vortex):
        v, _ = vortex
        other = ScalarField(GridSpec(2, 128, 1.0), np.zeros((128, 128)))
        with pytest.raises(ValueError):
            check_global(v, other)

    def test_anisotropic_field_is_excused(self):
        g = GridSpec(2, 256, 1.0)
        v = anisotropic_control(g)
        reports = check_global(v, pressure_freespace(v))
        assert all(r.status == VIOLATED for r in reports)
        assert reports[0].hypothesis.moment_isotropy > 0.1


class TestReports:
    def test_json_round_trip(self, vortex):
        r = check_hyperplane(*vortex, PlaneSpec.through((3.0, 4.0), 0.1))
        back = IdentityReport.from_dict(json.loads(r.to_json()))
        assert back == r

    def test_schema_checked(self, vortex):
        d = check_global(*vortex)[0].to_dict()
        d["schema"] = 99
        with pytest.raises(ValueError, match="schema"):
            IdentityReport.from_dict(d)

    @pytest.mark.parametrize("lhs,rhs", [(np.nan, 1.0), (1.0, np.inf)])
    def test_non_finite_is_a_failure_even_when_excused(self, lhs, rhs):
        bad_hyp = Hypothesis(moment_isotropy=1.0)
        assert _report("x", {}, lhs, rhs, bad_hyp, 1e-3, 0.0).status == FAIL

    def test_floor_guards_zero_against_zero(self):
        r = _report("x", {}, 1e-20, 0.0, Hypothesis(), 1e-3, 1e-10)
        assert r.status == PASS and r.residual_rel == pytest.approx(1e-10)


class TestSignSweep:
    def test_exact_pair(self, vortex):
        sweep = check_sign_sweep(*vortex)
        assert all(r.passed for r in sweep.reports)
        assert sweep.verdict in ("zero only beyond the support", "no vanishing shell")
        assert np.all(sweep.values <= 1e-6 * sweep.reports[0].extra["scale"])

    def test_zero_field(self):
        g = GridSpec(2, 128, 1.0)
        z = VectorField(g, [np.zeros(g.shape)] * 2)
        sweep = check_sign_sweep(z, ScalarField(g, np.zeros(g.shape)))
        assert sweep.verdict == "v ≡ 0 confirmed"

    def test_zero_pressure_with_motion_is_a_contradiction(self, vortex):
        v, p = vortex
        sweep = check_sign_sweep(v, p.with_samples(np.zeros(p.samples.shape)))
        assert sweep.verdict == "contradiction"

    def test_default_radii(self, vortex):
        radii = default_sweep_radii(vortex[0])
        assert radii.size == 32 and radii[0] == 0.0 and radii[-1] == pytest.approx(0.5)


class TestWeakForm:
    def test_passes_and_detects(self, vortex):
        v, p = vortex
        tests = random_test_functions(v.grid, np.random.default_rng(3), 5, ramps=2)
        assert all(r.passed for r in check_weak_form(v, p, tests))
        shifted = p.with_samples(p.samples + 1e-3 * np.abs(p.samples).max() * np.exp(-v.grid.radius() ** 2 / 0.01))
        assert any(r.status == FAIL for r in check_weak_form(v, shifted, tests))


class TestAxisymmetric:
    @pytest.mark.parametrize("rho1,rho2", [(0.0, 4.0), (0.5, 2.0), (1.0, 3.5)])
    def test_decay_identity(self, meridional, rho1, rho2):
        r = check_axisymmetric_decay(meridional, rho1, rho2)
        assert r.status == PASS and r.extra["monotone"]
        assert r.rhs < 0

    def test_limit_formula(self, meridional):
        lim = check_axisymmetric_decay(meridional, 0.0, 4.0).extra["limit_formula"]
        assert lim["lhs"] == pytest.approx(lim["rhs"], rel=1e-2)

    def test_rejections(self, meridional):
        mg = meridional.grid
        with pytest.raises(DomainError):
            check_axisymmetric_decay(meridional, 2.0, 1.0)
        with pytest.raises(DomainError):
            check_axisymmetric_decay(meridional, 0.0, 5.0)
        no_p = MeridionalField(3, mg, meridional.v_rho, meridional.v_z)
        with pytest.raises(ValueError, match="pressure"):
            check_axisymmetric_decay(no_p, 0.0, 1.0)
        swirl = MeridionalField(3, mg, meridional.v_rho, meridional.v_z, meridional.p, swirl=np.ones(mg.shape))
        with pytest.raises(UnsupportedInputError):
            check_axisymmetric_decay(swirl, 0.0, 1.0)
