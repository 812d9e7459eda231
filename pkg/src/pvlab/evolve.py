"""Two-dimensional pseudo-spectral Navier-Stokes on the torus ``[-L, L)^2``.

Vorticity form ``ω_t + v·∇ω = ν Δω`` with classical RK4 (viscous term by
integrating factor), the 2/3 rule and a fixed CFL number.  Velocity comes from the periodic Biot-Savart law
``v = ∇^⊥ψ``, ``-Δψ = ω``.

Identity tracking bridges the torus to whole space by windowing the stream
function, ``w = ∇^⊥(σ_R (ψ - c))``, which keeps ``w`` exactly solenoidal
and supported in ``|x| <= 2R``; ``c`` is the value of ``ψ`` on the window
annulus, so ``w = v`` whenever ``v`` itself vanishes there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, ScalarField, VectorField
from .identities import (
    IdentityReport,
    _report,
    check_global,
    check_hyperplane,
    check_sphere_formula,
    scale_floor,
)
from .mollifier import radial_cutoff, radial_cutoff_derivative
from .pressure import pressure_freespace
from .quad import PlaneSpec, normal_energy_on_sphere, plane_integral, tangential_shell_energy
from .synth import symmetrize

CFL = 0.5
SUPPORT_RTOL = 1e-10


class StepSizeError(ValueError):
    """Time step above the CFL limit."""


class WindowOverflowError(ValueError):
    """Vorticity support reaches beyond the tracking window."""


def _spectral(grid: GridSpec):
    """Full-axis wavenumbers ``kx`` (axis 0) and half-axis ``ky`` (rfft axis)."""
    k = grid.wavenumbers()
    kx = k.reshape(-1, 1)
    ky = np.abs(k[: grid.M // 2 + 1]).reshape(1, -1)
    return kx, ky


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """True for modes kept by the 2/3 rule (``|k_a| <= (2/3) k_Nyquist`` per axis)."""
    kx, ky = _spectral(grid)
    cut = (2.0 / 3.0) * np.pi / grid.h
    return (np.abs(kx) <= cut) & (ky <= cut)


def _fft(a):
    return np.fft.rfft2(a)


def _ifft(a, grid):
    return np.fft.irfft2(a, s=grid.shape)


@dataclass(frozen=True, eq=False)
class EvolveState:
    """Immutable snapshot: vorticity, time and viscosity on a 2-D grid."""

    grid: GridSpec
    vorticity: ScalarField
    t: float = 0.0
    nu: float = 0.0
    _hat: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid.dim != 2:
            raise ValueError("the evolver is two-dimensional")
        if self.nu < 0:
            raise ValueError("viscosity must be non-negative")
        if self.vorticity.grid != self.grid:
            raise ValueError("vorticity grid mismatch")
        if self._hat is None:
            hat = _fft(self.vorticity.samples) * dealias_mask(self.grid)
            hat[0, 0] = 0.0
            object.__setattr__(self, "_hat", hat)
            object.__setattr__(self, "vorticity", ScalarField(self.grid, _ifft(hat, self.grid)))

    @classmethod
    def _from_hat(cls, grid, hat, t, nu) -> "EvolveState":
        hat = hat.copy()
        hat.setflags(write=False)
        return cls(grid, ScalarField(grid, _ifft(hat, grid)), t, nu, hat)

    @classmethod
    def from_velocity(cls, v: VectorField, nu: float = 0.0, t: float = 0.0) -> "EvolveState":
        g = v.grid
        kx, ky = _spectral(g)
        w = 1j * kx * _fft(v.components[1]) - 1j * ky * _fft(v.components[0])
        return cls(g, ScalarField(g, _ifft(w, g)), t, nu)

    def streamfunction(self) -> ScalarField:
        return ScalarField(self.grid, _ifft(_psi_hat(self.grid, self._hat), self.grid))

    def velocity(self) -> VectorField:
        u, v = _velocity(self.grid, self._hat)
        return VectorField(self.grid, [u, v], True)

    def energy(self) -> float:
        """``(1/2) ∫ |v|^2`` over the torus."""
        return 0.5 * float(np.sum(self.velocity().speed_squared()) * self.grid.cell_volume)

    def max_stable_dt(self) -> float:
        top = self.velocity().max_speed()
        return np.inf if top == 0.0 else CFL * self.grid.h / top


def _psi_hat(grid, w_hat):
    kx, ky = _spectral(grid)
    k2 = kx * kx + ky * ky
    out = np.zeros_like(w_hat)
    np.divide(w_hat, k2, out=out, where=k2 > 0)
    return out


def _velocity(grid, w_hat):
    kx, ky = _spectral(grid)
    ph = _psi_hat(grid, w_hat)
    return _ifft(1j * ky * ph, grid), _ifft(-1j * kx * ph, grid)


def _advection(grid, w_hat, mask):
    """Dealiased ``-(v·∇ω)^``."""
    kx, ky = _spectral(grid)
    u, v = _velocity(grid, w_hat)
    wx = _ifft(1j * kx * w_hat, grid)
    wy = _ifft(1j * ky * w_hat, grid)
    return -_fft(u * wx + v * wy) * mask


def step(state: EvolveState, dt: float) -> EvolveState:
    """One RK4 step; raises :class:`StepSizeError` above the CFL limit.

    Viscosity enters through the integrating factor ``exp(-ν k^2 t)``, so
    RK4 acts on the advection term only and the step size is limited by the
    CFL condition alone.
    """
    limit = state.max_stable_dt()
    if abs(dt) > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.3e} exceeds CFL limit {limit:.3e}")
    g, nu = state.grid, state.nu
    kx, ky = _spectral(g)
    half = np.exp(-0.5 * nu * (kx * kx + ky * ky) * dt)
    mask = dealias_mask(g)
    w = state._hat
    k1 = _advection(g, w, mask)
    k2 = _advection(g, half * (w + 0.5 * dt * k1), mask)
    k3 = _advection(g, half * w + 0.5 * dt * k2, mask)
    k4 = _advection(g, half * half * w + dt * half * k3, mask)
    new = half * half * w + (dt / 6.0) * (half * half * k1 + 2 * half * (k2 + k3) + k4)
    new[0, 0] = 0.0
    return EvolveState._from_hat(g, new * mask, state.t + dt, nu)


def run(state: EvolveState, t_end: float, snapshots=None, dt_max: float | None = None) -> list[EvolveState]:
    """Advance to ``t_end``; returns the states at ``snapshots`` (default: final only).

    Steps are uniform between consecutive snapshot times and as large as
    the CFL limit (measured at the segment start, with a 10% safety margin)
    allows.
    """
    times = sorted(set([float(t) for t in (snapshots or [])] + [float(t_end)]))
    out = []
    if times and times[0] == state.t:
        out.append(state)
        times = times[1:]
    for target in times:
        span = target - state.t
        if span < 0:
            raise ValueError("snapshot times must not precede the state time")
        while span > 0:
            limit = 0.9 * state.max_stable_dt()
            if dt_max is not None:
                limit = min(limit, dt_max)
            n = 1 if not np.isfinite(limit) else int(np.ceil(span / limit))
            dt = span / n
            state = step(state, dt)
            span = target - state.t
            if abs(span) < 1e-12 * max(1.0, abs(target)):
                state = EvolveState._from_hat(state.grid, state._hat, target, state.nu)
                span = 0.0
        out.append(state)
    return out


def energy(state: EvolveState) -> float:
    return state.energy()


# -- strong-form residual ------------------------------------------------------


def torus_pressure(v: VectorField) -> ScalarField:
    """Zero-mean periodic pressure with ``Δp = -∂_j∂_k(v_j v_k)``."""
    g = v.grid
    kx, ky = _spectral(g)
    k = (kx, ky)
    k2 = kx * kx + ky * ky
    acc = 0
    for j in range(2):
        for l in range(2):
            acc = acc + k[j] * k[l] * _fft(v.components[j] * v.components[l])
    ph = np.zeros_like(acc)
    np.divide(-acc, k2, out=ph, where=k2 > 0)
    return ScalarField(g, _ifft(ph, g))


def momentum_residual(state: EvolveState, dt_probe: float = 1e-4) -> float:
    """``‖∂_t v + (v·∇)v + ∇p - νΔv‖_∞`` with a centered time difference.

    The two probe states come from one RK4 step forward and one backward.
    """
    g = state.grid
    kx, ky = _spectral(g)
    fwd = step(state, dt_probe).velocity()
    bwd = step(state, -dt_probe).velocity()
    v = state.velocity()
    p_hat = _fft(torus_pressure(v).samples)
    grad_p = (_ifft(1j * kx * p_hat, g), _ifft(1j * ky * p_hat, g))
    out = 0.0
    for j in range(2):
        c_hat = _fft(v.components[j])
        dx = _ifft(1j * kx * c_hat, g)
        dy = _ifft(1j * ky * c_hat, g)
        lap = _ifft(-(kx * kx + ky * ky) * c_hat, g)
        dt_v = (fwd.components[j] - bwd.components[j]) / (2.0 * dt_probe)
        res = dt_v + v.components[0] * dx + v.components[1] * dy + grad_p[j] - state.nu * lap
        out = max(out, float(np.abs(res).max()))
    return out


# -- classical data ------------------------------------------------------------


def taylor_green_state(grid: GridSpec, nu: float, t: float = 0.0) -> EvolveState:
    """``v = e^{-2νt}(sin x cos y, -cos x sin y)``; needs ``L = π``."""
    if not np.isclose(grid.L, np.pi):
        raise ValueError("Taylor-Green data needs the 2π-periodic box (L = π)")
    x, y = grid.coords()
    w = 2.0 * np.exp(-2.0 * nu * t) * np.sin(x) * np.sin(y)
    return EvolveState(grid, ScalarField(grid, np.broadcast_to(w, grid.shape)), t, nu)


def taylor_green_velocity(grid: GridSpec, nu: float, t: float) -> VectorField:
    x, y = grid.coords()
    a = np.exp(-2.0 * nu * t)
    u = np.broadcast_to(a * np.sin(x) * np.cos(y), grid.shape)
    v = np.broadcast_to(-a * np.cos(x) * np.sin(y), grid.shape)
    return VectorField(grid, [u, v], True)


def vortex_ring_state(
    grid: GridSpec,
    nu: float,
    sigma: float,
    rings=((0.1, 0.3, 1.0), (0.22, 1.1, -1.0)),
    speed: float = 1.0,
) -> EvolveState:
    """Four-fold symmetric Gaussian vortices, normalized to ``max|v| = speed``.

    Each ring entry ``(radius, phase, sign)`` places four Gaussians
    ``sign * exp(-|x - c|^2 / σ^2)`` at quarter turns; equal and opposite
    signs give zero circulation.  Lengths are absolute, so the same flow
    can be placed in boxes of different size.
    """
    x, y = grid.coords()
    w = np.zeros(grid.shape)
    for rad, phase, sign in rings:
        for q in range(4):
            a = phase + 0.5 * np.pi * q
            cx, cy = rad * np.cos(a), rad * np.sin(a)
            w = w + sign * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / sigma**2)
    st = EvolveState(grid, ScalarField(grid, w), 0.0, nu)
    top = st.velocity().max_speed()
    return EvolveState(grid, ScalarField(grid, st.vorticity.samples * (speed / top)), 0.0, nu)


# -- windowed identity tracking -----------------------------------------------


def vorticity_support(state: EvolveState, rtol: float = SUPPORT_RTOL) -> float:
    return state.vorticity.support_radius(rtol)


def windowed_velocity(state: EvolveState, R: float) -> tuple[VectorField, float]:
    """``w = ∇^⊥(σ_R (ψ - c))`` and the relative L2 window error ``‖v - w‖/‖v‖``."""
    g = state.grid
    if 2.0 * R > 0.5 * g.L * (1 + 1e-12):
        raise WindowOverflowError(f"window 2R={2 * R:.4g} exceeds the pressure solver's radius L/2={0.5 * g.L:.4g}")
    x, y = g.coords()
    r = g.radius()
    sig = radial_cutoff(r, R)
    ds = radial_cutoff_derivative(r, R)
    with np.errstate(invalid="ignore", divide="ignore"):
        sx = np.where(r > 0, ds * x / r, 0.0)
        sy = np.where(r > 0, ds * y / r, 0.0)
    psi = state.streamfunction().samples
    weight = np.abs(ds)
    c = float(np.sum(psi * weight) / np.sum(weight))
    v = state.velocity()
    phi = psi - c
    w = VectorField(g, [sig * v.components[0] + phi * sy, sig * v.components[1] - phi * sx], True)
    norm = float(np.sqrt(np.sum(v.speed_squared())))
    err = float(np.sqrt(np.sum((v.components[0] - w.components[0]) ** 2 + (v.components[1] - w.components[1]) ** 2)))
    return w, (err / norm if norm > 0 else 0.0)


def default_planes(scale: float) -> list[PlaneSpec]:
    """Three planes through the flow core: two axis-aligned, one diagonal."""
    d = np.array([1.0, 1.0]) / np.sqrt(2.0)
    return [
        PlaneSpec((1.0, 0.0), (0.0, 0.0)),
        PlaneSpec((0.0, 1.0), (0.0, 0.25 * scale)),
        PlaneSpec.through(d, 0.1 * scale),
    ]


def track_identities(
    state: EvolveState,
    window_radius: float,
    planes=None,
    sphere_radii=None,
    symmetrize_field: bool = False,
    tolerance: float = 1e-2,
) -> list[IdentityReport]:
    """Identity reports for one snapshot of the torus flow.

    The pressure is the free-space pressure of the windowed field ``w``;
    every right-hand side is evaluated on the unwindowed flow ``v``, so the
    residuals contain the windowing error.  ``extra["kinematic_residual"]``
    holds the static checker's residual on ``(w, p_w)``, and
    ``extra["window_error"]`` the relative L2 distance ``‖v - w‖/‖v‖``.
    Default planes and sphere radii scale with ``window_radius / 2``; pass
    them explicitly to compare runs with different windows.
    """
    R = float(window_radius)
    supp = vorticity_support(state)
    if supp > R:
        raise WindowOverflowError(f"vorticity support {supp:.4g} exceeds window radius {R:.4g}")
    w, werr = windowed_velocity(state, R)
    if symmetrize_field:
        w = symmetrize(w)
    p = pressure_freespace(w)
    v = state.velocity()
    g = state.grid
    tag = {"t": state.t, "window_radius": R, "window_error": werr, "vorticity_support": supp}
    kinematic = []
    flow_rhs = []
    for plane in planes if planes is not None else default_planes(0.5 * R):
        kinematic.append(check_hyperplane(w, p, plane, tolerance))
        flow_rhs.append(-plane_integral(v.normal_squared(np.asarray(plane.xi)), plane).value)
    for j, rep in enumerate(check_global(w, p, tolerance)):
        kinematic.append(rep)
        flow_rhs.append(-float(np.sum(v.components[j] ** 2) * g.cell_volume))
    for Rs in sphere_radii if sphere_radii is not None else [0.0, 0.25 * R]:
        kinematic.append(check_sphere_formula(w, p, Rs, tolerance))
        normal = normal_energy_on_sphere(v, Rs) if Rs > 0 else 0.0
        flow_rhs.append(-normal - tangential_shell_energy(v, Rs))
    floor = scale_floor(w, p)
    out = []
    for kin, rhs in zip(kinematic, flow_rhs):
        extra = dict(kin.extra, kinematic_residual=kin.residual_rel, rhs_windowed=kin.rhs, **tag)
        params = dict(kin.params, t=state.t)
        out.append(_report(kin.identity, params, kin.lhs, rhs, kin.hypothesis, tolerance, floor, extra))
    return out


def track_trajectory(states, window_radius: float, **kwargs) -> list[IdentityReport]:
    """Concatenated :func:`track_identities` reports over several snapshots."""
    out = []
    for s in states:
        out.extend(track_identities(s, window_radius, **kwargs))
    return out
