"""Hyperplane, sphere, shell and meridional line integrals.

Inside the ball ``|x| <= valid_radius`` a field is its trigonometric
interpolant ``Re Σ c_m exp(i k_m·x)``, and every rotation-invariant
integral of a plane wave has a closed form in Bessel functions of
``|k| r``.  The default (``method="spectral"``) rules sum those closed forms
over the modes, grouped by ``|k|^2``, so they are exact for the interpolant.
Beyond the valid radius, pressure fields from
:func:`pvlab.pressure.pressure_freespace` are evaluated by direct Green's
function summation; radial weights ``1/|x|`` integrated to infinity get a
power-law tail model whose size is reported separately.

``method="nodes"`` gives the classical quadratures (trapezoid in angle,
Gauss-Legendre in ``cos θ``, uniform in-plane grids), used as cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .grid import DomainError, ScalarField, Spectrum, VectorField, grid_spectrum
from .meridional import MeridionalField
from .mollifier import sphere_area

_GL64 = np.polynomial.legendre.leggauss(64)
_GL48 = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True)
class QuadResult:
    """Integral value split into the in-box part and the exterior part.

    ``tail_modeled`` tells whether ``tail`` comes from the power-law model
    (True) or from direct evaluation (False).
    """

    value: float
    inner: float
    tail: float = 0.0
    tail_modeled: bool = False
    flags: tuple = ()

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class PlaneSpec:
    """Hyperplane ``{x : ξ·(x - x0) = 0}``."""

    xi: tuple
    x0: tuple

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise ValueError(f"plane normal must be a unit vector, |xi| = {np.linalg.norm(xi)!r}")
        if len(self.x0) != xi.size:
            raise ValueError("xi and x0 must have the same length")
        object.__setattr__(self, "xi", tuple(float(t) for t in xi))
        object.__setattr__(self, "x0", tuple(float(t) for t in self.x0))

    @classmethod
    def through(cls, xi, offset: float) -> "PlaneSpec":
        xi = np.asarray(xi, dtype=float)
        xi = xi / np.linalg.norm(xi)
        return cls(tuple(xi), tuple(offset * xi))

    @property
    def dim(self) -> int:
        return len(self.xi)

    @property
    def offset(self) -> float:
        return float(np.dot(self.xi, self.x0))

    @property
    def foot(self) -> np.ndarray:
        return self.offset * np.asarray(self.xi)

    def frame(self) -> np.ndarray:
        """Orthonormal in-plane basis, shape ``(dim-1, dim)``."""
        xi = np.asarray(self.xi)
        if self.dim == 2:
            return np.array([[-xi[1], xi[0]]])
        helper = np.eye(3)[np.argmin(np.abs(xi))]
        e1 = np.cross(xi, helper)
        e1 /= np.linalg.norm(e1)
        return np.array([e1, np.cross(xi, e1)])

    def to_dict(self) -> dict:
        return {"xi": list(self.xi), "x0": list(self.x0)}


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Product rule on the sphere of radius ``R`` about ``center``."""

    R: float
    center: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, dim: int, R: float, h: float, center=None, refine: int = 1) -> "SphereRule":
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        if R == 0:
            return cls(0.0, c, c[None, :].copy(), np.zeros(1))
        if dim == 2:
            n = 4 * int(np.ceil(2 * np.pi * R / h)) * refine
            th = 2 * np.pi * np.arange(n) / n
            nodes = c + R * np.stack([np.cos(th), np.sin(th)], axis=1)
            return cls(R, c, nodes, np.full(n, 2 * np.pi * R / n))
        nt = (2 * int(np.ceil(np.pi * R / h)) + 8) * refine
        nphi = 2 * nt
        x, w = np.polynomial.legendre.leggauss(nt)
        phi = 2 * np.pi * np.arange(nphi) / nphi
        st = np.sqrt(1 - x * x)
        nodes = np.stack(
            [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(x, nphi)], axis=1
        )
        weights = np.repeat(w, nphi) * (2 * np.pi / nphi) * R * R
        return cls(R, c, c + R * nodes, weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


# -- mode aggregation ---------------------------------------------------------


def _aggregate(spec: Spectrum, *coefs: np.ndarray):
    """Sum coefficients over modes with equal ``|k|``; returns (|k|, sums, ...).

    Several coefficient arrays share one set of shells (the union of the
    shells where any of them is nonzero).
    """
    n2 = spec.integer_k2().ravel()
    sums = [np.bincount(n2, weights=c.real.ravel()) + 1j * np.bincount(n2, weights=c.imag.ravel()) for c in coefs]
    used = np.flatnonzero(np.any([s != 0 for s in sums], axis=0))
    if used.size == 0 or used[0] != 0:
        used = np.concatenate([[0], used])
    return (spec.dk * np.sqrt(used.astype(float)), *(s[used] for s in sums))


def _safe_div(num, den, limit):
    out = np.full(np.shape(num), limit, dtype=float)
    np.divide(num, den, out=out, where=den != 0)
    return out


_LAG_X, _LAG_W = np.polynomial.laguerre.laggauss(80)


def _struve_minus_y(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``H0 - Y0`` and ``H1 - Y1`` from their Laplace integrals (accurate for ``z >= 4``)."""
    t = _LAG_X / z[:, None]
    root = np.sqrt(1.0 + t * t)
    return (2 / np.pi) * (root**-1 @ _LAG_W) / z, (2 / np.pi) * (root @ _LAG_W)


def _int_j0(z: np.ndarray) -> np.ndarray:
    """``∫_0^z J0``.

    scipy's ``itj0y0`` loses all accuracy beyond ``z ≈ 20`` and
    ``struve(0, z)`` returns NaN on small intervals (e.g. near 25.765), so
    large arguments use ``J1 Y0 - J0 Y1 = 2/(πz)`` together with the
    Laplace integrals of ``H_n - Y_n``.
    """
    z = np.asarray(z, dtype=float)
    j0, j1 = special.j0(z), special.j1(z)
    out = np.empty_like(z)
    lo = z < 4.0
    zl = z[lo]
    out[lo] = zl * j0[lo] + 0.5 * np.pi * zl * (j1[lo] * special.struve(0, zl) - j0[lo] * special.struve(1, zl))
    zh = z[~lo]
    a0, a1 = _struve_minus_y(zh)
    out[~lo] = zh * j0[~lo] + 1.0 + 0.5 * np.pi * zh * (j1[~lo] * a0 - j0[~lo] * a1)
    return out


def _sphere_kernel(dim: int, k: np.ndarray, R: float) -> np.ndarray:
    """``∮_{|x|=R} exp(i k·x) dσ`` as a function of ``|k|``."""
    z = k * R
    if dim == 2:
        return 2 * np.pi * R * special.j0(z)
    return 4 * np.pi * R * R * special.spherical_jn(0, z)


def _ball_kernel(dim: int, k: np.ndarray, R: float) -> np.ndarray:
    """``∫_{|x|<R} exp(i k·x) dx``."""
    z = k * R
    if dim == 2:
        return 2 * np.pi * R * R * _safe_div(special.j1(z), z, 0.5)
    small = z < 1e-3
    out = np.empty_like(z)
    zz = z[~small]
    out[~small] = 4 * np.pi * R**3 * (np.sin(zz) - zz * np.cos(zz)) / zz**3
    out[small] = 4 * np.pi * R**3 * (1.0 / 3.0 - z[small] ** 2 / 30.0)
    return out


def _inv_radius_kernel(dim: int, k: np.ndarray, R: float) -> np.ndarray:
    """Antiderivative in ``R`` of ``∮_{|x|=R} exp(i k·x)/|x| dσ``."""
    if dim == 2:
        z = k * R
        i0 = _int_j0(z)
        return 2 * np.pi * _safe_div(i0, k, 0.0) + np.where(k == 0, 2 * np.pi * R, 0.0)
    z = k * R
    return np.where(k == 0, 2 * np.pi * R * R, -4 * np.pi * _safe_div(np.cos(z), k * k, 0.0))


def _real_sum(agg: np.ndarray, kern: np.ndarray) -> float:
    return float(np.sum((agg * kern).real))


def _require_radius(f: ScalarField, R: float) -> None:
    if R < 0:
        raise ValueError("radius must be non-negative")
    if R > f.valid_radius * (1 + 1e-12):
        raise DomainError(f"radius {R} exceeds the representable radius {f.valid_radius}")


# -- spheres, balls and shells -------------------------------------------------


def sphere_integral(f: ScalarField, R: float, center=None, method: str = "spectral") -> float:
    """``∮_{|x-center|=R} f dσ``."""
    dim = f.grid.dim
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    if R == 0:
        return 0.0
    if method == "nodes":
        if np.linalg.norm(c) + R > f.valid_radius and not hasattr(f, "direct_sum"):
            raise DomainError(f"sphere of radius {R} leaves the representable domain")
        rule = SphereRule.build(dim, R, f.grid.h, c)
        return rule.integrate(f.evaluate(rule.nodes))
    if np.linalg.norm(c) + R > f.valid_radius * (1 + 1e-12):
        raise DomainError(f"sphere of radius {R} about {c} leaves the representable domain")
    spec = f.spectrum()
    k, agg = _aggregate(spec, spec.shifted(c))
    return _real_sum(agg, _sphere_kernel(dim, k, R))


def _tail_coefficient(f: ScalarField, spec: Spectrum, k, agg) -> float:
    """Least-squares ``c`` in ``f ≈ c |x|^{-(dim+1)}`` from the two outer shells."""
    dim = f.grid.dim
    r_in = spec.valid_radius
    edges = [0.5 * r_in, r_in / np.sqrt(2.0), r_in]
    area = sphere_area(dim)
    data, model = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        data.append(_real_sum(agg, _ball_kernel(dim, k, b) - _ball_kernel(dim, k, a)))
        model.append(area * (1.0 / a - 1.0 / b))
    data, model = np.array(data), np.array(model)
    return float(np.dot(data, model) / np.dot(model, model))


def shell_weighted_integral(f: ScalarField, R: float, method: str = "spectral") -> QuadResult:
    """``∫_{|x|>R} f(x)/|x| dx`` with the in-box part and the tail reported apart.

    The tail beyond the valid radius models ``f`` as ``c |x|^{-(dim+1)}``.
    ``method="grid"`` replaces the in-box part by the node sum over
    ``R < |x_i| < valid_radius`` (first order, for cross-checks).
    """
    if R < 0:
        raise ValueError("radius must be non-negative")
    dim = f.grid.dim
    spec = f.spectrum()
    r_in = spec.valid_radius
    k, agg = _aggregate(spec, spec.coef)
    c = _tail_coefficient(f, spec, k, agg)
    lo = min(R, r_in)
    if method == "spectral":
        inner = _real_sum(agg, _inv_radius_kernel(dim, k, r_in) - _inv_radius_kernel(dim, k, lo)) if lo < r_in else 0.0
    elif method == "grid":
        r = f.grid.radius()
        sel = (r > lo) & (r < r_in)
        inner = float(np.sum(f.samples[sel] / r[sel]) * f.grid.cell_volume)
    else:
        raise ValueError(f"unknown method {method!r}")
    start = max(R, r_in)
    tail = c * sphere_area(dim) / (2.0 * start * start)
    return QuadResult(inner + tail, inner, tail, True)


def ball_integral(f: ScalarField, R: float | None = None) -> QuadResult:
    """``∫_{|x|<R} f dx``; ``R=None`` integrates over the whole space with tail model."""
    dim = f.grid.dim
    spec = f.spectrum()
    k, agg = _aggregate(spec, spec.coef)
    if R is not None:
        _require_radius(f, R)
        val = _real_sum(agg, _ball_kernel(dim, k, R))
        return QuadResult(val, val)
    r_in = spec.valid_radius
    inner = _real_sum(agg, _ball_kernel(dim, k, r_in))
    c = _tail_coefficient(f, spec, k, agg)
    tail = c * sphere_area(dim) / r_in
    return QuadResult(inner + tail, inner, tail, True)


# -- velocity quadratic forms ---------------------------------------------------


def _tensor_aggregates(v: VectorField):
    """Aggregated trace and ``k̂·T·k̂`` of ``T_jk = v_j v_k`` spectra."""
    g = v.grid
    spec0 = None
    tr = 0
    ktk = 0
    ks = None
    for j in range(g.dim):
        for l in range(j, g.dim):
            s = grid_spectrum(v.components[j] * v.components[l], -g.L, g.h, g.L)
            if spec0 is None:
                spec0 = s
                kk = np.meshgrid(*s.k, indexing="ij", sparse=True)
                k2 = sum(a * a for a in kk)
                k2 = np.where(k2 == 0, 1.0, k2)
                ks = (kk, k2)
            kk, k2 = ks
            w = (1.0 if j == l else 2.0) * kk[j] * kk[l] / k2
            ktk = ktk + w * s.coef
            if j == l:
                tr = tr + s.coef
    return _aggregate(spec0, tr, ktk)


def normal_energy_on_sphere(v: VectorField, R: float, method: str = "spectral") -> float:
    """``∮_{|x|=R} (v·x/|x|)^2 dσ``."""
    dim = v.grid.dim
    if R == 0:
        return 0.0
    if R > v.grid.L:
        raise DomainError(f"radius {R} exceeds the box half-width")
    if method == "nodes":
        rule = SphereRule.build(dim, R, v.grid.h)
        vals = v.evaluate(rule.nodes)
        xhat = rule.nodes / R
        return rule.integrate(np.sum(vals * xhat, axis=1) ** 2)
    k, a_tr, a_ktk = _tensor_aggregates(v)
    z = k * R
    if dim == 2:
        b1 = _safe_div(special.j1(z), z, 0.5)
        b2 = special.jv(2, z)
        area = 2 * np.pi * R
    else:
        b1 = _safe_div(special.spherical_jn(1, z), z, 1.0 / 3.0)
        b2 = special.spherical_jn(2, z)
        area = 4 * np.pi * R * R
    return area * float(np.sum((a_tr * b1 - a_ktk * b2).real))


def _tangential_antiderivative(dim: int, k, R, a_tr, a_ktk) -> float:
    z = k * R
    if dim == 2:
        i0 = _int_j0(z)
        j1 = special.j1(z)
        val = 2 * np.pi * (a_tr * _safe_div(j1, k, 0.0) + a_ktk * _safe_div(i0 - 2 * j1, k, 0.0))
        val = val + np.where(k == 0, np.pi * R * a_tr, 0.0)
        return float(np.sum(val.real))
    j0 = special.spherical_jn(0, z)
    cz = np.cos(z)
    val = 4 * np.pi * (a_tr * _safe_div(j0 - cz, k * k, 0.0) + a_ktk * _safe_div(cz - 3 * j0, k * k, 0.0))
    val = val + np.where(k == 0, (2 * np.pi / 3) * R * R * a_tr * 2, 0.0)
    return float(np.sum(val.real))


def tangential_shell_energy(v: VectorField, R: float) -> float:
    """``∫_{|x|>R} |v_τ|^2/|x| dx`` with ``v_τ = v - (v·x̂) x̂`` (``v`` compact)."""
    dim = v.grid.dim
    r_in = v.grid.L
    if R >= r_in:
        return 0.0
    k, a_tr, a_ktk = _tensor_aggregates(v)
    return _tangential_antiderivative(dim, k, r_in, a_tr, a_ktk) - _tangential_antiderivative(dim, k, R, a_tr, a_ktk)


def radial_shell_energy(v: VectorField, R: float) -> float:
    """``∫_{|x|>R} |v|^2/|x| dx`` (no tail: ``v`` is compact)."""
    return shell_weighted_integral(ScalarField(v.grid, v.speed_squared()), R).inner


# -- planes ------------------------------------------------------------------


def _plane_inner(spec: Spectrum, plane: PlaneSpec) -> tuple[float, float]:
    """Exact integral over the plane ∩ ball(valid_radius); returns (value, chord)."""
    r_in = spec.valid_radius
    tau = plane.offset
    if abs(tau) >= r_in:
        return 0.0, 0.0
    c = np.sqrt(r_in * r_in - tau * tau)
    dim = spec.dim
    kk = np.meshgrid(*spec.k, indexing="ij", sparse=True)
    xi = np.asarray(plane.xi)
    foot = plane.foot
    phase = sum(kk[a] * foot[a] for a in range(dim))
    coef = spec.coef * np.exp(1j * phase)
    if dim == 2:
        t = plane.frame()[0]
        kap = kk[0] * t[0] + kk[1] * t[1]
        kern = 2 * c * np.sinc(c * kap / np.pi)
    else:
        kn = sum(kk[a] * xi[a] for a in range(3))
        k2 = sum(a * a for a in kk)
        kap = np.sqrt(np.maximum(k2 - kn * kn, 0.0))
        z = c * kap
        # j1(z)/z = 1/2 - z^2/16 + ...; guard against underflow for near-aligned modes
        z = np.where(z < 1e-8, 0.0, z)
        kern = np.pi * c * c * 2 * _safe_div(special.j1(z), z, 0.5)
    return float(np.sum((coef * kern).real)), float(c)


def _plane_exterior(f, plane: PlaneSpec, c: float) -> float:
    """Integral over the plane outside radius ``c`` about the foot point."""
    L = f.grid.L
    t, w = _GL64 if plane.dim == 2 else _GL48
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    s = c + L * t / (1.0 - t)
    ds = L / (1.0 - t) ** 2
    frame = plane.frame()
    foot = plane.foot
    if plane.dim == 2:
        e = frame[0]
        pts = np.concatenate([foot + np.outer(s, e), foot - np.outer(s, e)])
        vals = f.evaluate(pts)
        return float(np.dot(np.concatenate([w * ds, w * ds]), vals))
    nphi = 64
    phi = 2 * np.pi * np.arange(nphi) / nphi
    dirs = np.outer(np.cos(phi), frame[0]) + np.outer(np.sin(phi), frame[1])
    pts = (foot + s[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    vals = f.evaluate(pts).reshape(s.size, nphi)
    return float(np.sum((w * ds * s)[:, None] * vals) * 2 * np.pi / nphi)


def plane_integral(f: ScalarField, plane: PlaneSpec, method: str = "spectral") -> QuadResult:
    """``∫_Π f dS`` over a hyperplane.

    ``"spectral"``: closed-form integral of the interpolant over the part of
    the plane inside the valid ball, plus direct evaluation beyond it for
    fields that provide one (``direct_sum``).  ``"nodes"``: trapezoidal rule on
    an in-plane grid of spacing ``h`` over the support, with an exact
    slice-sum fast path for grid-aligned planes.
    """
    g = f.grid
    if plane.dim != g.dim:
        raise ValueError("plane and field dimensions differ")
    tau = plane.offset
    if method == "nodes":
        return _plane_nodes(f, plane)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    spec = f.spectrum()
    inner, c = _plane_inner(spec, plane)
    exterior = hasattr(f, "direct_sum")
    flags = ()
    if abs(tau) >= g.L and not exterior:
        return QuadResult(0.0, 0.0, 0.0, False, ("plane-misses-box",))
    tail = _plane_exterior(f, plane, c) if exterior else 0.0
    return QuadResult(inner + tail, inner, tail, False, flags)


def _plane_nodes(f: ScalarField, plane: PlaneSpec) -> QuadResult:
    g = f.grid
    xi = np.asarray(plane.xi)
    tau = plane.offset
    if abs(tau) >= g.L:
        return QuadResult(0.0, 0.0, 0.0, False, ("plane-misses-box",))
    axis = int(np.argmax(np.abs(xi)))
    pos = (tau * np.sign(xi[axis]) + g.L) / g.h
    if abs(abs(xi[axis]) - 1.0) < 1e-15 and abs(pos - round(pos)) < 1e-9:
        sl = [slice(None)] * g.dim
        sl[axis] = int(round(pos)) % g.M
        val = float(f.samples[tuple(sl)].sum() * g.h ** (g.dim - 1))
        return QuadResult(val, val)
    rs = min(f.support_radius(1e-15) + 2 * g.h, g.L)
    if abs(tau) >= rs:
        return QuadResult(0.0, 0.0)
    half = np.sqrt(rs * rs - tau * tau)
    n = int(np.ceil(half / g.h))
    u = g.h * np.arange(-n, n + 1)
    frame = plane.frame()
    mesh = np.meshgrid(*([u] * (g.dim - 1)), indexing="ij")
    pts = plane.foot + sum(m.reshape(-1, 1) * e for m, e in zip(mesh, frame))
    inside = np.all((pts >= -g.L) & (pts < g.L), axis=1)
    vals = np.zeros(len(pts))
    vals[inside] = f.evaluate(pts[inside])
    val = float(vals.sum() * g.h ** (g.dim - 1))
    return QuadResult(val, val)


# -- meridional lines ------------------------------------------------------------


def _far_tail(mf: MeridionalField, rho: np.ndarray) -> np.ndarray:
    """``∫_{|z|>Z} p dz`` at each ``ρ`` from the solver's exterior expansion."""
    t, w = _GL48
    u = 0.5 * (t + 1.0)
    w = 0.5 * w
    Z = mf.grid.Z
    zz = Z / u
    jac = Z / u**2
    R = rho[:, None]
    vals = mf.farfield(R, zz[None, :]) + mf.farfield(R, -zz[None, :])
    return np.sum(vals * (w * jac)[None, :], axis=1)


def _model_tail(mf: MeridionalField) -> np.ndarray:
    """Fallback tail: ``p ≈ c_± |z|^{-N}`` matched at ``z = ±Z``."""
    Z, N = mf.grid.Z, mf.N
    return (mf.p[:, 0] + mf.p[:, -1]) * Z / (N - 1)


def meridional_line_integrals(mf: MeridionalField, which: str = "sum") -> tuple[np.ndarray, np.ndarray, bool]:
    """Line integrals at every ``ρ`` node: (in-domain value, tail, modeled?)."""
    g = mf.grid
    wz = g.z_weights()
    if which not in ("pressure", "vrho_sq", "sum"):
        raise ValueError(f"unknown integrand {which!r}")
    q = np.zeros(g.shape)
    if which in ("pressure", "sum"):
        if mf.p is None:
            raise ValueError("field has no pressure")
        q = q + mf.p
    if which in ("vrho_sq", "sum"):
        q = q + mf.v_rho**2
    inner = q @ wz
    tail = np.zeros(g.n_rho)
    modeled = False
    if which != "vrho_sq" and not g.periodic_z:
        if mf.farfield is not None:
            tail = _far_tail(mf, g.rho())
        else:
            tail = _model_tail(mf)
            modeled = True
    return inner, tail, modeled


def meridional_line_integral(mf: MeridionalField, which: str, rho: float) -> QuadResult:
    """``∫ q(ρ, z) dz`` over the full line (or one period) at fixed ``ρ``.

    ``which`` selects ``p``, ``v_ρ^2`` or their sum.  Off-node ``ρ`` values
    are interpolated with a cubic spline through the nodal integrals.
    """
    g = mf.grid
    if not 0.0 <= rho <= g.P * (1 + 1e-12):
        raise DomainError(f"rho={rho} outside [0, {g.P}]")
    inner, tail, modeled = meridional_line_integrals(mf, which)
    pos = rho / g.h_rho
    if abs(pos - round(pos)) < 1e-9:
        i = int(round(pos))
        a, b = float(inner[i]), float(tail[i])
    else:
        rr = g.rho()
        a = float(CubicSpline(rr, inner)(rho))
        b = float(CubicSpline(rr, tail)(rho))
    return QuadResult(a + b, a, b, modeled)
