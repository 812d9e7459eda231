"""Checkers for the pressure identities.

Each checker evaluates both sides of one identity with :mod:`pvlab.quad`
and returns an :class:`IdentityReport`.  Reports carry three hypothesis
diagnostics; when any is out of bounds the status is
``"hypothesis-violated"`` regardless of the residual, because the
identities need an integrable pressure (isotropic second moments),
compact support inside the box and a negligible modeled tail.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from .grid import DomainError, ScalarField, VectorField
from .pressure import weak_form_residual, weak_form_scale
from .meridional import MeridionalField, UnsupportedInputError
from .quad import (
    PlaneSpec,
    ball_integral,
    meridional_line_integrals,
    normal_energy_on_sphere,
    plane_integral,
    shell_weighted_integral,
    sphere_integral,
    tangential_shell_energy,
)
from .synth import second_moments

SCHEMA_VERSION = 1
SPECTRAL_TOL = 1e-3
MERIDIONAL_TOL = 1e-2
WEAK_TOL = 1e-6
ISOTROPY_BOUND = 1e-6
TAIL_BOUND = 0.1
# absolute floor for 0≈0 checks; sized for discretization noise, not roundoff
FLOOR_FACTOR = 1e-5
VANISH_FACTOR = 1e-8
# shell values above -ZERO_RTOL*scale count as "zero" in the vanishing logic;
# quadrature noise on shell values is ~1e-7*scale at M = 256
ZERO_RTOL = 1e-6
# a zero shell value with more than this energy fraction outside R is inconsistent
EXTERIOR_ENERGY_RTOL = 1e-3

PASS, FAIL, VIOLATED = "pass", "fail", "hypothesis-violated"


@dataclass(frozen=True)
class Hypothesis:
    """Diagnostics for the admissibility of a field.

    moment_isotropy
        ``‖M - (tr M / dim) I‖_F / tr M`` for the second moments ``M``.
    support_margin
        Distance between the velocity support and the edge of the region
        where the solvers are exact (negative: support too large).
    tail_fraction
        Modeled tail as a fraction of the residual budget.
    """

    moment_isotropy: float = 0.0
    support_margin: float = 0.0
    tail_fraction: float = 0.0

    @property
    def violated(self) -> bool:
        return self.moment_isotropy > ISOTROPY_BOUND or self.support_margin < 0 or self.tail_fraction > TAIL_BOUND


@dataclass(frozen=True)
class IdentityReport:
    identity: str
    params: dict
    lhs: float
    rhs: float
    residual_abs: float
    residual_rel: float
    hypothesis: Hypothesis
    status: str
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return _plain(
            {
                "schema": SCHEMA_VERSION,
                "identity": self.identity,
                "params": self.params,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "residual_abs": self.residual_abs,
                "residual_rel": self.residual_rel,
                "hypothesis": asdict(self.hypothesis),
                "status": self.status,
                "tolerance": self.tolerance,
                "extra": self.extra,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "IdentityReport":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            d["identity"],
            dict(d["params"]),
            float(d["lhs"]),
            float(d["rhs"]),
            float(d["residual_abs"]),
            float(d["residual_rel"]),
            Hypothesis(**d["hypothesis"]),
            d["status"],
            float(d["tolerance"]),
            dict(d.get("extra", {})),
        )


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _report(identity, params, lhs, rhs, hyp, tol, floor, extra=None, ok=True) -> IdentityReport:
    lhs, rhs = float(lhs), float(rhs)
    res = abs(lhs - rhs)
    denom = max(abs(lhs), abs(rhs), floor)
    rel = res / denom if denom > 0 else 0.0
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        status = FAIL  # a broken quadrature is never excused by the hypothesis gate
    elif hyp.violated:
        status = VIOLATED
    else:
        status = PASS if (rel <= tol and ok) else FAIL
    return IdentityReport(identity, _plain(params), lhs, rhs, res, rel, hyp, status, tol, _plain(extra or {}))


# -- diagnostics -------------------------------------------------------------


def moment_isotropy(v: VectorField) -> float:
    m = second_moments(v)
    return m.anisotropy


def support_margin(v: VectorField) -> float:
    g = v.grid
    top = v.max_speed()
    if top == 0.0:
        return 0.5 * g.L
    reach = max(v.component(j).support_radius(1e-14) for j in range(g.dim))
    return 0.5 * g.L - reach


def scale_floor(v: VectorField, p: ScalarField) -> float:
    """Absolute floor for relative residuals: ``1e-5 (∫|v|^2 + ‖p‖_1)``."""
    return FLOOR_FACTOR * (float(np.sum(v.speed_squared()) * v.grid.cell_volume) + p.l1_norm())


def vanish_threshold(v: VectorField, reference_rms: float | None = None) -> float:
    """Scale-aware zero for ``max|v|``: ``1e-8`` times the box RMS."""
    return VANISH_FACTOR * (v.rms() if reference_rms is None else reference_rms)


def _tail_fraction(tail: float, lhs: float, rhs: float, floor: float, tol: float) -> float:
    budget = tol * max(abs(lhs), abs(rhs), floor)
    if tail == 0.0:
        return 0.0
    return abs(tail) / budget if budget > 0 else float("inf")


def _hypothesis(v: VectorField, tail=0.0, lhs=0.0, rhs=0.0, floor=0.0, tol=SPECTRAL_TOL) -> Hypothesis:
    return Hypothesis(moment_isotropy(v), support_margin(v), _tail_fraction(tail, lhs, rhs, floor, tol))


def _same_grid(v: VectorField, p: ScalarField) -> None:
    if v.grid != p.grid:
        raise ValueError("velocity and pressure live on different grids")


# -- whole-space identities ----------------------------------------------------


def check_hyperplane(v: VectorField, p: ScalarField, plane: PlaneSpec, tolerance: float = SPECTRAL_TOL) -> IdentityReport:
    """``∫_Π p = -∫_Π (v·ξ)^2`` on one hyperplane.

    Besides the equality, the plane integral of ``p`` must be non-positive
    (up to ``tolerance`` times the plane scale); ``extra`` records the
    derived statement that ``p <= 0`` somewhere on the plane.
    """
    _same_grid(v, p)
    xi = np.asarray(plane.xi)
    left = plane_integral(p, plane)
    right = plane_integral(v.normal_squared(xi), plane)
    lhs, rhs = left.value, -right.value
    floor = scale_floor(v, p)
    hyp = _hypothesis(v, left.tail if left.tail_modeled else 0.0, lhs, rhs, floor, tolerance)
    nonpositive = lhs <= tolerance * max(abs(rhs), floor)
    extra = {
        "exterior": left.tail,
        "lhs_nonpositive": nonpositive,
        "meets_nonpositive_set": nonpositive,
        "flags": list(left.flags),
    }
    return _report("hyperplane", {"plane": plane.to_dict()}, lhs, rhs, hyp, tolerance, floor, extra, nonpositive)


def check_global(v: VectorField, p: ScalarField, tolerance: float = SPECTRAL_TOL) -> list[IdentityReport]:
    """``∫p = -∫v_j^2`` for every component, plus the equal-energy corollary."""
    _same_grid(v, p)
    g = v.grid
    total = ball_integral(p)
    energies = [float(np.sum(c * c) * g.cell_volume) for c in v.components]
    energy = sum(energies)
    spread = (max(energies) - min(energies)) / energy if energy > 0 else 0.0
    corollary = spread <= tolerance
    floor = scale_floor(v, p)
    out = []
    for j, e in enumerate(energies):
        hyp = _hypothesis(v, total.tail, total.value, -e, floor, tolerance)
        extra = {
            "inner": total.inner,
            "tail": total.tail,
            "component_energies": energies,
            "energy_spread": spread,
            "corollary_pass": corollary,
        }
        out.append(_report("global", {"component": j}, total.value, -e, hyp, tolerance, floor, extra, corollary))
    return out


def check_sphere_formula(v: VectorField, p: ScalarField, R: float, tolerance: float = SPECTRAL_TOL) -> IdentityReport:
    """``(N-1)∫_{|x|>R} p/|x| + ∮_R p = -∮_R (v^r)^2 - ∫_{|x|>R} |v^τ|^2/|x|``."""
    _same_grid(v, p)
    g = v.grid
    if R < 0 or R > 0.5 * g.L * (1 + 1e-12):
        raise DomainError(f"sphere radius {R} outside [0, L/2]")
    d = g.dim
    shell = shell_weighted_integral(p, R)
    sph = sphere_integral(p, R) if R > 0 else 0.0
    normal = normal_energy_on_sphere(v, R) if R > 0 else 0.0
    tang = tangential_shell_energy(v, R)
    lhs = (d - 1) * shell.value + sph
    rhs = -normal - tang
    floor = scale_floor(v, p)
    hyp = _hypothesis(v, (d - 1) * shell.tail, lhs, rhs, floor, tolerance)
    extra = {"shell": shell.value, "shell_tail": shell.tail, "sphere": sph, "normal": normal, "tangential": tang}
    return _report("sphere", {"R": R}, lhs, rhs, hyp, tolerance, floor, extra)


def default_sweep_radii(v: VectorField, count: int = 32) -> np.ndarray:
    """``0`` followed by ``count - 1`` log-spaced radii from ``h`` to ``L/2``."""
    g = v.grid
    return np.concatenate([[0.0], np.geomspace(g.h, 0.5 * g.L, count - 1)])


@dataclass(frozen=True)
class SweepResult:
    """Per-radius sign reports and the equality-case verdict."""

    reports: list
    verdict: str
    values: np.ndarray
    radii: np.ndarray

    def to_dict(self) -> dict:
        return _plain(
            {"schema": SCHEMA_VERSION, "verdict": self.verdict, "reports": [r.to_dict() for r in self.reports]}
        )


def check_sign_sweep(
    v: VectorField,
    p: ScalarField,
    R_list=None,
    tolerance: float = SPECTRAL_TOL,
    reference_rms: float | None = None,
) -> SweepResult:
    """Sign of ``∫_{|x|>=R} p/|x|`` over a sweep of radii.

    Each report is an inequality check: ``lhs`` is the shell value, ``rhs``
    the nearest admissible (non-positive) value, so ``residual_abs`` is the
    size of any violation; ``residual_rel`` divides it by the scale
    ``∫|v|^2/|x|`` and must stay below ``tolerance``.

    The verdict covers the equality case.  A shell value is "zero" when it
    is above ``-1e-6`` times the scale (the quadrature noise sits near
    ``1e-7``).  A zero value while more than ``1e-3`` of the kinetic energy
    (nodal sum) lies outside that radius is a contradiction; zero values everywhere together with
    ``max|v| <= vanish_threshold`` confirm ``v ≡ 0``.
    """
    _same_grid(v, p)
    radii = default_sweep_radii(v) if R_list is None else np.asarray(R_list, dtype=float)
    g = v.grid
    speed = ScalarField(g, v.speed_squared())
    scale = shell_weighted_integral(speed, 0.0).inner
    e_tot = float(np.sum(speed.samples) * g.cell_volume)
    r_nodes = g.radius()
    floor = scale_floor(v, p)
    reports, values, zero, contradiction = [], [], [], False
    for R in radii:
        res = shell_weighted_integral(p, R)
        val = res.value
        values.append(val)
        is_zero = val >= -ZERO_RTOL * scale
        zero.append(is_zero)
        frac = float(np.sum(speed.samples[r_nodes > R]) * g.cell_volume) / e_tot if e_tot > 0 else 0.0
        if is_zero and frac > EXTERIOR_ENERGY_RTOL:
            contradiction = True
        violation = max(val, 0.0)
        rel = violation / scale if scale > 0 else (0.0 if violation == 0 else float("inf"))
        hyp = _hypothesis(v, res.tail, val, 0.0, max(scale, floor), tolerance)
        status = FAIL if not np.isfinite(val) else (VIOLATED if hyp.violated else (PASS if rel <= tolerance else FAIL))
        extra = {"tail": res.tail, "scale": scale, "exterior_energy_fraction": frac, "zero": is_zero}
        reports.append(
            IdentityReport(
                "sign", {"R": float(R)}, val, min(val, 0.0), violation, rel, hyp, status, tolerance, _plain(extra)
            )
        )
    threshold = vanish_threshold(v, reference_rms)
    if all(zero) and v.max_speed() <= threshold:
        verdict = "v ≡ 0 confirmed"
    elif contradiction:
        verdict = "contradiction"
    elif any(zero):
        verdict = "zero only beyond the support"
    else:
        verdict = "no vanishing shell"
    return SweepResult(reports, verdict, np.array(values), radii)


def check_weak_form(v: VectorField, p: ScalarField, tests, tolerance: float = WEAK_TOL) -> list[IdentityReport]:
    """Weak pressure relation ``∫ p Δh + Σ ∫ v_j v_k ∂_j∂_k h = 0`` for each test function ``h``.

    The relation needs no integrability, so only the support margin enters
    the hypothesis; ``residual_rel`` divides by :func:`weak_form_scale`.
    """
    _same_grid(v, p)
    hyp = Hypothesis(0.0, support_margin(v), 0.0)
    out = []
    for i, h in enumerate(tests):
        res = weak_form_residual(v, p, h)
        scale = weak_form_scale(v, p, h)
        rel = abs(res) / scale if scale > 0 else 0.0
        status = FAIL if not np.isfinite(res) else (VIOLATED if hyp.violated else (PASS if rel <= tolerance else FAIL))
        out.append(IdentityReport("weak_form", {"test": i}, res, 0.0, abs(res), rel, hyp, status, tolerance, {"scale": scale}))
    return out


# -- axisymmetric decay ----------------------------------------------------------


def line_profile(mf: MeridionalField) -> tuple[np.ndarray, np.ndarray]:
    """``I(ρ) = ∫ (v_ρ^2 + p) dz`` at every ``ρ`` node."""
    inner, tail, _ = meridional_line_integrals(mf, "sum")
    return mf.grid.rho(), inner + tail


def _radial_density(mf: MeridionalField) -> np.ndarray:
    """``g(ρ) = ∫ v_ρ^2/ρ dz`` per node; ``g(0) = 0`` since ``v_ρ`` is odd in ``ρ``."""
    g = mf.grid
    rho = g.rho()
    out = np.zeros(g.n_rho)
    out[1:] = (mf.v_rho[1:] ** 2 @ g.z_weights()) / rho[1:]
    return out


def _integrate_nodes(y: np.ndarray, h: float, a: float, b: float) -> float:
    """Trapezoid of nodal values over ``[a, b]``, partial cells linearly interpolated."""
    x = h * np.arange(y.size)
    inside = (x > a) & (x < b)
    xs = np.concatenate([[a], x[inside], [b]])
    ys = np.interp(xs, x, y)
    return float(trapezoid(ys, xs))


def check_axisymmetric_decay(
    mf: MeridionalField,
    rho1: float,
    rho2: float,
    tolerance: float = MERIDIONAL_TOL,
    sweep: int = 64,
) -> IdentityReport:
    """``I(ρ2) - I(ρ1) = -(N-2) ∫_{ρ1}^{ρ2} ∫ v_ρ^2/ρ dz dρ`` plus monotonicity of ``I``.

    ``I`` must be nonincreasing over ``sweep`` equispaced radii within
    ``0.1 * tolerance * max|I|``.  For ``(ρ1, ρ2) = (0, P)`` ``extra`` also
    carries the limit form ``∫ p(0, z) dz = (N-2) ∫∫ v_ρ^2/ρ`` with the
    residual ``I(P)``.
    """
    if mf.swirl is not None and np.any(mf.swirl != 0):
        raise UnsupportedInputError("swirling flows are not supported")
    if mf.p is None:
        raise ValueError("meridional field has no pressure; run pressure_meridional first")
    g = mf.grid
    if not 0.0 <= rho1 < rho2 <= g.P * (1 + 1e-12):
        raise DomainError(f"need 0 <= rho1 < rho2 <= P, got ({rho1}, {rho2})")
    rho, I = line_profile(mf)
    spline = CubicSpline(rho, I)
    I1, I2 = float(spline(rho1)), float(spline(rho2))
    dens = _radial_density(mf)
    energy = _integrate_nodes(dens, g.h_rho, rho1, rho2)
    lhs = I2 - I1
    rhs = -(mf.N - 2) * energy

    probe = np.linspace(0.0, g.P, sweep)
    Iv = spline(probe)
    scale = float(np.abs(I).max())
    rise = float(np.max(np.diff(Iv), initial=0.0))
    monotone = rise <= 0.1 * tolerance * scale
    _, tail, modeled = meridional_line_integrals(mf, "pressure")

    top = max(np.abs(mf.v_rho).max(), np.abs(mf.v_z).max())
    floor = FLOOR_FACTOR * (float(np.sum(dens) * g.h_rho) + float(np.abs(mf.p).sum() * g.h_rho * g.h_z))
    if top > 0:
        mask = (np.abs(mf.v_rho) > 1e-14 * top) | (np.abs(mf.v_z) > 1e-14 * top)
        R, Z = g.mesh()
        margin = g.P - R[mask].max()
        if not g.periodic_z:
            margin = min(margin, g.Z - np.abs(Z[mask]).max())
    else:
        margin = g.P
    tail_used = float(np.abs(tail).max()) if modeled else 0.0
    hyp = Hypothesis(0.0, float(margin), _tail_fraction(tail_used, lhs, rhs, floor, tolerance))
    extra = {
        "I_rho1": I1,
        "I_rho2": I2,
        "monotone": monotone,
        "max_increase": rise,
        "I_scale": scale,
        "sweep": {"rho": probe, "I": Iv},
        "periodic_z": g.periodic_z,
        "tail_modeled": modeled,
    }
    if rho1 == 0.0 and abs(rho2 - g.P) <= 1e-12 * g.P:
        axis, _, _ = meridional_line_integrals(mf, "pressure")
        a0 = float(axis[0] + tail[0])
        extra["limit_formula"] = {"lhs": a0, "rhs": (mf.N - 2) * energy, "I_P": I2}
    params = {"N": mf.N, "rho1": rho1, "rho2": rho2, "periodic_z": g.periodic_z}
    return _report("axisymmetric", params, lhs, rhs, hyp, tolerance, floor, extra, monotone)
