import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from pvlab.mollifier import (
    RampProfile,
    bump_profile,
    double_step,
    normalizer,
    radial_cutoff,
    radial_cutoff_derivative,
    smooth_step,
    sphere_area,
)


def _bump_1d(u):
    return np.exp(1 / (u * u - 1)) if abs(u) < 1 else 0.0


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_normalizer_against_quad(dim):
    inner = integrate.quad(lambda r: r ** (dim - 1) * _bump_1d(r), 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    total = 2 * inner if dim == 1 else sphere_area(dim) * inner
    assert normalizer(dim) * total == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("dim,area", [(2, 2 * np.pi), (3, 4 * np.pi), (4, 2 * np.pi**2)])
def test_sphere_area(dim, area):
    assert sphere_area(dim) == pytest.approx(area)
    assert sphere_area(dim, 2.0) == pytest.approx(area * 2 ** (dim - 1))


def test_bump_profile_support():
    s = np.array([-1.5, -1.0, 0.0, 0.5, 1.0, 2.0])
    out = bump_profile(s)
    assert out[0] == out[1] == out[4] == out[5] == 0.0
    assert out[2] == pytest.approx(np.exp(-1))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.2, 1.2))
def test_smooth_step_matches_quad(t):
    c = normalizer(1)
    want = c * integrate.quad(_bump_1d, -1, min(max(t, -1), 1), epsabs=1e-15, epsrel=1e-13)[0] if t > -1 else 0.0
    assert float(smooth_step(np.array([t]))[0]) == pytest.approx(want, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.999, 0.999))
def test_step_symmetry(t):
    s = smooth_step(np.array([t, -t]))
    assert s[0] + s[1] == pytest.approx(1.0, abs=1e-14)


def test_double_step_is_antiderivative():
    t = np.linspace(-1.5, 1.5, 301)
    T = double_step(t)
    assert np.all(T[t <= -1] == 0) and np.allclose(T[t >= 1], t[t >= 1], atol=1e-14)
    dT = np.gradient(T, t)
    assert np.abs(dT - smooth_step(t))[2:-2].max() < 1e-3


class TestRamp:
    @pytest.mark.parametrize("R1,R2,eps", [(0.2, 0.6, 0.05), (0.3, 0.5, 0.09)])
    def test_shape(self, R1, R2, eps):
        ramp = RampProfile(R1, R2, eps)
        r = np.linspace(0, 1, 1001)
        d = ramp.derivative(r)
        assert np.allclose(d[(r > R1 + eps) & (r < R2 - eps)], 1.0, atol=1e-14)
        assert np.all(d[(r < R1 - eps) | (r > R2 + eps)] == 0.0)
        # φ is constant R2 - R1 beyond the ramp and zero before it
        assert ramp(np.array([0.0, R1 - eps]))[1] == 0.0
        assert ramp(np.array([R2 + eps, 0.9]))[1] == pytest.approx(R2 - R1, abs=1e-13)

    def test_second_derivative_by_differences(self):
        ramp = RampProfile(0.2, 0.6, 0.05)
        r = np.linspace(0.1, 0.7, 6001)
        fd = np.gradient(ramp.derivative(r), r)
        assert np.abs(fd - ramp.derivative(r, 2))[1:-1].max() < 1e-2 * np.abs(fd).max()
        with pytest.raises(ValueError):
            ramp.derivative(r, 3)

    @pytest.mark.parametrize("R1,R2,eps", [(0.2, 0.6, 0.0), (0.2, 0.6, 0.2), (0.05, 0.6, 0.06), (0.2, 0.3, 0.06)])
    def test_epsilon_constraint(self, R1, R2, eps):
        with pytest.raises(ValueError):
            RampProfile(R1, R2, eps)


def test_radial_cutoff():
    R = 0.3
    r = np.linspace(0, 1, 2001)
    s = radial_cutoff(r, R)
    assert np.all(s[r <= R] == 1.0) and np.all(s[r >= 2 * R] == 0.0)
    assert np.all(np.diff(s) <= 1e-15)
    fd = np.gradient(s, r)
    assert np.abs(fd - radial_cutoff_derivative(r, R)).max() < 1e-2 * np.abs(fd).max()
