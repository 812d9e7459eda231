"""Divergence-free field generators and closed-form (v, p) oracle pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Callable, Sequence

import numpy as np

from .grid import FieldError, GridSpec, ScalarField, VectorField, partial_derivative
from .meridional import AxisError, MeridionalField, MeridionalGrid
from .mollifier import bump_profile


class MarginError(ValueError):
    """A generator's support would leave the ball of radius ``L/2``."""


class GridCompatibilityError(ValueError):
    """The grid does not admit the requested exact symmetry operation."""


@dataclass(frozen=True)
class BumpSpec:
    """``amplitude * exp(1/(|x-center|^2/a^2 - 1))`` inside radius ``a``."""

    center: tuple
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    def __call__(self, *coords) -> np.ndarray:
        r2 = sum((x - c) ** 2 for x, c in zip(coords, self.center))
        return self.amplitude * bump_profile(np.sqrt(r2) / self.radius)

    def gradient(self, *coords) -> list[np.ndarray]:
        """Exact partial derivatives, one array per coordinate."""
        d = [x - c for x, c in zip(coords, self.center)]
        s2 = sum(t * t for t in d) / self.radius**2
        b = self.amplitude * bump_profile(np.sqrt(s2))
        inside = s2 < 1.0
        w = np.zeros(np.shape(s2))
        w[inside] = -2.0 / (self.radius**2 * (s2[inside] - 1.0) ** 2)
        w = w * b
        return [np.broadcast_to(w * t, np.shape(w)) for t in d]


def _check_margin(spec: BumpSpec, grid: GridSpec) -> None:
    if len(spec.center) != grid.dim:
        raise ValueError(f"bump center has {len(spec.center)} coordinates, grid has dim {grid.dim}")
    reach = float(np.linalg.norm(spec.center)) + spec.radius
    if reach > 0.5 * grid.L * (1 + 1e-12):
        raise MarginError(f"bump reaches radius {reach:.6g} > L/2 = {0.5 * grid.L:.6g}")


def bump(spec: BumpSpec, grid: GridSpec) -> ScalarField:
    """Sample a single bump; its support must stay within radius ``L/2``."""
    _check_margin(spec, grid)
    return ScalarField(grid, np.broadcast_to(spec(*grid.coords()), grid.shape))


def bump_sum(specs: Sequence[BumpSpec], grid: GridSpec) -> ScalarField:
    acc = np.zeros(grid.shape)
    for s in specs:
        _check_margin(s, grid)
        acc = acc + s(*grid.coords())
    return ScalarField(grid, acc)


def _bump_gradient(specs: Sequence[BumpSpec], grid: GridSpec) -> list[np.ndarray]:
    acc = [np.zeros(grid.shape) for _ in range(grid.dim)]
    for s in specs:
        _check_margin(s, grid)
        for a, g in enumerate(s.gradient(*grid.coords())):
            acc[a] = acc[a] + g
    return acc


def bump_curl(specs, grid: GridSpec) -> VectorField:
    """Exact curl of bump-sum potentials, sampled on the grid.

    ``specs`` is one list of bumps (stream function, 2-D) or three lists
    (vector potential components, 3-D).  Unlike :func:`curl_potential` the
    result has exactly the support of the bumps.
    """
    if grid.dim == 2:
        d = _bump_gradient(specs, grid)
        return VectorField(grid, [d[1], -d[0]], True)
    if len(specs) != 3:
        raise ValueError("a 3-D vector potential needs three bump lists")
    D = [_bump_gradient(s, grid) for s in specs]
    v = [D[2][1] - D[1][2], D[0][2] - D[2][0], D[1][0] - D[0][1]]
    return VectorField(grid, v, True)


def curl_potential(potential, grid: GridSpec | None = None) -> VectorField:
    """Velocity from a stream function (2-D) or vector potential (3-D).

    ``v = (∂_2 ψ, -∂_1 ψ)`` in two dimensions, ``v = ∇ × A`` in three.
    """
    if isinstance(potential, ScalarField):
        g = potential.grid
        if g.dim != 2:
            raise ValueError("a scalar potential requires dim=2")
        return VectorField(g, [partial_derivative(potential, 1).samples, -partial_derivative(potential, 0).samples], True)
    if isinstance(potential, VectorField) or (isinstance(potential, (list, tuple)) and len(potential) == 3):
        comps = list(potential.components) if isinstance(potential, VectorField) else list(potential)
        if isinstance(comps[0], ScalarField):
            g = comps[0].grid
            comps = [c.samples for c in comps]
        else:
            g = potential.grid if isinstance(potential, VectorField) else grid
        if g is None or g.dim != 3 or len(comps) != 3:
            raise ValueError("a vector potential requires three components on a dim=3 grid")
        A = [ScalarField(g, c) for c in comps]
        d = lambda f, a: partial_derivative(f, a).samples  # noqa: E731
        v = [d(A[2], 1) - d(A[1], 2), d(A[0], 2) - d(A[2], 0), d(A[1], 0) - d(A[0], 1)]
        return VectorField(g, v, True)
    raise ValueError("potential must be a 2-D stream function or a 3-component vector potential")


# -- radial profiles and the 2-D vortex oracle -------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _panel_rule(lo: float, hi: float, panels: int):
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X).ravel()
    weights = (half[:, None] * _GL_W).ravel()
    return nodes, weights


def _tail_integral(g: Callable, r: np.ndarray, b: float, panels: int = 24) -> np.ndarray:
    """``∫_r^b g(s) ds`` for every entry of ``r`` (zero where ``r >= b``)."""
    r = np.minimum(np.asarray(r, dtype=float), b)
    out = np.zeros(r.shape)
    chunk = 4096
    flat_r, flat_o = r.ravel(), out.ravel()
    t = np.linspace(0.0, 1.0, panels + 1)
    for s in range(0, flat_r.size, chunk):
        lo = flat_r[s : s + chunk]
        edges = lo[:, None] + (b - lo)[:, None] * t
        half = 0.5 * np.diff(edges, axis=1)
        x = 0.5 * (edges[:, 1:] + edges[:, :-1])[..., None] + half[..., None] * _GL_X
        flat_o[s : s + chunk] = np.sum(half[..., None] * _GL_W * g(x), axis=(1, 2))
    return out


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A radial function on ``[0, support]`` with a composite Gauss rule.

    ``func`` evaluates the profile anywhere (zero beyond ``support``);
    ``nodes``/``weights`` integrate smooth functions on ``[0, support]``.
    """

    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    support: float
    func: Callable = field(repr=False)

    @classmethod
    def from_function(cls, func: Callable, support: float, panels: int = 32) -> "RadialProfile":
        nodes, weights = _panel_rule(0.0, support, panels)
        return cls(nodes, np.asarray(func(nodes), dtype=float), weights, float(support), func)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        inside = r < self.support
        out[inside] = self.func(r[inside])
        return out

    def integrate(self, g: Callable | None = None) -> float:
        """``∫_0^support g(r, f(r)) dr``, or of ``f`` itself when ``g`` is None."""
        vals = self.values if g is None else g(self.nodes, self.values)
        return float(np.dot(self.weights, vals))


def vortex_profile(a: float, amplitude: float = 1.0) -> RadialProfile:
    """``f(r) = amplitude * r * exp(1/(r^2/a^2 - 1))`` for ``r < a``."""
    return RadialProfile.from_function(lambda r: amplitude * r * bump_profile(np.asarray(r) / a), a)


def zero_profile(a: float = 1.0) -> RadialProfile:
    return RadialProfile.from_function(lambda r: np.zeros_like(np.asarray(r, dtype=float)), a)


def vortex_pressure_profile(f: RadialProfile) -> RadialProfile:
    """``p(r) = -∫_r^∞ f(s)^2/s ds`` for a tangential vortex with speed ``f``."""
    a = f.support

    def integrand(s):
        fs = f(s)
        return np.divide(fs * fs, s, out=np.zeros_like(s), where=s > 0)

    def p(r):
        r = np.asarray(r, dtype=float)
        u, inv = np.unique(r.ravel(), return_inverse=True)
        return -_tail_integral(integrand, u, a)[inv].reshape(r.shape)

    return RadialProfile.from_function(p, a)


def radial_vortex_2d(f: RadialProfile, grid: GridSpec):
    """Purely tangential vortex ``v = f(r) e_θ`` and its exact pressure.

    Returns
    -------
    v : VectorField
    p : ScalarField
        Samples of ``p(r) = -∫_r^∞ f(s)^2/s ds``.
    p_of_r : RadialProfile
    """
    if grid.dim != 2:
        raise ValueError("radial_vortex_2d needs a dim=2 grid")
    scale = max(np.abs(f.values).max(), 1e-300)
    if abs(float(f(np.array([0.0]))[0])) > 1e-14 * scale and np.abs(f.values).max() > 0:
        raise AxisError("vortex profile must vanish at r = 0")
    if f.support > 0.5 * grid.L * (1 + 1e-12):
        raise MarginError(f"vortex support {f.support} exceeds L/2 = {0.5 * grid.L}")
    x, y = grid.coords()
    r = grid.radius()
    u, inv = np.unique(r.ravel(), return_inverse=True)
    fu = f(u)
    ratio = np.divide(fu, u, out=np.zeros_like(u), where=u > 0)[inv].reshape(r.shape)
    v = VectorField(grid, [-ratio * y, ratio * x])
    pp = vortex_pressure_profile(f)
    p = ScalarField(grid, pp(u)[inv].reshape(r.shape))
    return v, p, pp


# -- symmetry and moments ----------------------------------------------------


def rotation_group(dim: int) -> list[np.ndarray]:
    """Rotations generated by quarter turns in coordinate planes."""
    if dim == 2:
        r = np.array([[0, -1], [1, 0]])
        return [np.linalg.matrix_power(r, k) for k in range(4)]
    mats = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=int)
            for i, (j, s) in enumerate(zip(perm, signs)):
                m[i, j] = s
            if round(np.linalg.det(m)) == 1:
                mats.append(m)
    return mats


def rotate(v: VectorField, R: np.ndarray) -> VectorField:
    """``w(x) = R v(R^{-1} x)`` as an exact permutation of grid nodes."""
    g = v.grid
    if g.M % 4:
        raise GridCompatibilityError("exact quarter turns need M divisible by 4")
    offs = np.indices(g.shape).reshape(g.dim, -1) - g.M // 2
    src = (R.T @ offs + g.M // 2) % g.M
    idx = tuple(src)
    moved = [c[idx].reshape(g.shape) for c in v.components]
    comps = [sum(R[j, k] * moved[k] for k in range(g.dim) if R[j, k]) for j in range(g.dim)]
    return VectorField(g, comps, v.solenoidal)


def symmetrize(v: VectorField) -> VectorField:
    """Average ``v`` over the quarter-turn rotation group (vector transformation)."""
    group = rotation_group(v.grid.dim)
    acc = [np.zeros(v.grid.shape) for _ in range(v.grid.dim)]
    for R in group:
        w = rotate(v, R)
        for j in range(v.grid.dim):
            acc[j] += w.components[j]
    return VectorField(v.grid, [a / len(group) for a in acc], v.solenoidal)


@dataclass(frozen=True, eq=False)
class SecondMomentMatrix:
    """Entries ``∫ v_j v_k dx``."""

    matrix: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def deviatoric(self) -> np.ndarray:
        d = self.matrix.shape[0]
        return self.matrix - self.trace / d * np.eye(d)

    @property
    def anisotropy(self) -> float:
        """Frobenius norm of the trace-free part relative to the trace."""
        tr = self.trace
        return float(np.linalg.norm(self.deviatoric()) / tr) if tr > 0 else 0.0


def second_moments(v: VectorField) -> SecondMomentMatrix:
    d = v.grid.dim
    w = v.grid.cell_volume
    m = np.empty((d, d))
    for j in range(d):
        for k in range(j, d):
            m[j, k] = m[k, j] = float(np.sum(v.components[j] * v.components[k]) * w)
    return SecondMomentMatrix(m)


# -- generic and control fields -----------------------------------------------


def random_bumps(grid: GridSpec, rng: np.random.Generator, count: int, radius=(0.12, 0.2), reach: float = 0.45):
    """Random bump specs with radii in ``radius * L`` and ``|c| + a <= reach * L``."""
    specs = []
    for _ in range(count):
        a = rng.uniform(*radius) * grid.L
        direction = rng.normal(size=grid.dim)
        direction /= np.linalg.norm(direction)
        dist = rng.uniform(0.0, reach * grid.L - a)
        amp = rng.uniform(-1.0, 1.0)
        specs.append(BumpSpec(tuple(dist * direction), a, amp))
    return specs


def generic_field(
    grid: GridSpec, seed: int, count: int = 5, radius=(0.12, 0.2), symmetric: bool = True, reach: float = 0.45
) -> VectorField:
    """Curl of a random bump-sum potential, optionally symmetrized.

    Bump radii are drawn from ``radius * L`` and every bump stays within
    ``reach * L`` of the origin.
    """
    rng = np.random.default_rng(seed)
    if grid.dim == 2:
        v = bump_curl(random_bumps(grid, rng, count, radius, reach), grid)
    else:
        v = bump_curl([random_bumps(grid, rng, count, radius, reach) for _ in range(3)], grid)
    return symmetrize(v) if symmetric else v


def anisotropic_control(grid: GridSpec, offset: float = 0.12, radius: float = 0.25) -> VectorField:
    """Curl of two overlapping same-sign bumps offset along ``x_1`` (lengths in units of ``L``).

    Its second-moment matrix is far from isotropic, so the pressure decays
    only like ``|x|^{-dim}`` and is not integrable.
    """
    c = np.zeros(grid.dim)
    c[0] = offset * grid.L
    specs = [BumpSpec(tuple(c), radius * grid.L), BumpSpec(tuple(-c), radius * grid.L)]
    if grid.dim == 2:
        return bump_curl(specs, grid)
    return bump_curl([[], [], specs], grid)


# -- meridional stream functions ---------------------------------------------


def meridional_bump_psi(grid: MeridionalGrid, rho_c: float, z_c: float, radius: float, amplitude: float = 1.0) -> np.ndarray:
    """Bump in the ``(ρ, z)`` plane centered off the axis."""
    R, Z = grid.mesh()
    return amplitude * bump_profile(np.hypot(R - rho_c, Z - z_c) / radius)


def meridional_streamfunction(N: int, psi, grid: MeridionalGrid) -> MeridionalField:
    """Swirl-free axisymmetric velocity from a stream function ``Ψ(ρ, z)``.

    ``v_ρ = -ρ^{-m} ∂_z Ψ`` and ``v_z = ρ^{-m} ∂_ρ Ψ`` with ``m = N - 2``,
    differenced to second order.
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    psi = np.asarray(psi, dtype=float)
    if psi.shape != grid.shape:
        raise FieldError(f"stream function shape {psi.shape} does not match grid {grid.shape}")
    top = np.abs(psi).max()
    if top > 0 and np.abs(psi[:3]).max() > 1e-14 * top:
        raise AxisError("stream function support touches the axis")
    m = N - 2
    rho = grid.rho()
    inv = np.zeros_like(rho)
    inv[1:] = rho[1:] ** (-m)
    if grid.periodic_z:
        dpsi_z = (np.roll(psi, -1, axis=1) - np.roll(psi, 1, axis=1)) / (2 * grid.h_z)
    else:
        dpsi_z = np.gradient(psi, grid.h_z, axis=1, edge_order=2)
    dpsi_r = np.gradient(psi, grid.h_rho, axis=0, edge_order=2)
    return MeridionalField(N, grid, -inv[:, None] * dpsi_z, inv[:, None] * dpsi_r)
