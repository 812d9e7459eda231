"""Axisymmetric swirl-free fields in ``R^N`` on the meridional half-plane.

Coordinates are ``(ρ, z)`` with ``ρ = |x'|`` the distance to the ``x_N`` axis.
For ``m = N - 2`` the Laplacian of an axisymmetric function is
``ρ^{-m} ∂_ρ(ρ^m ∂_ρ p) + ∂_z^2 p``.

The pressure solve discretizes that operator with a conservative
finite-volume stencil (fluxes at half nodes, so ``ρ = 0`` never divides),
diagonalizes ``z`` with a sine or Fourier transform and finishes with
tridiagonal solves in ``ρ``.  Open boundaries get Dirichlet data from a
Gegenbauer multipole expansion of the source, which is the exterior
free-space solution; on a z-periodic strip each Fourier mode gets the exact
decaying Robin condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import special


class AxisError(ValueError):
    """Input violates axis regularity (``v_rho != 0`` on ``ρ = 0``, support on the axis)."""


class UnsupportedInputError(ValueError):
    """Input outside the swirl-free axisymmetric class."""


class SolverError(RuntimeError):
    """Linear solve failed; ``history`` carries the residual norms."""

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


@dataclass(frozen=True)
class MeridionalGrid:
    """Uniform ``(ρ, z)`` grid: ``ρ ∈ [0, P]`` with ``n_rho`` nodes.

    Non-periodic: ``z ∈ [-Z, Z]`` with ``n_z`` nodes including both ends.
    Periodic: ``z = -Z + j * 2Z/n_z`` for ``j < n_z`` (period ``2Z``).
    """

    P: float
    Z: float
    n_rho: int
    n_z: int
    periodic_z: bool = False

    def __post_init__(self):
        if self.P <= 0 or self.Z <= 0:
            raise ValueError("P and Z must be positive")
        if self.n_rho < 8 or self.n_z < 8:
            raise ValueError("meridional grid needs at least 8 nodes per direction")

    @property
    def h_rho(self) -> float:
        return self.P / (self.n_rho - 1)

    @property
    def h_z(self) -> float:
        return 2.0 * self.Z / (self.n_z if self.periodic_z else self.n_z - 1)

    @property
    def period(self) -> float:
        return 2.0 * self.Z

    def rho(self) -> np.ndarray:
        return self.h_rho * np.arange(self.n_rho)

    def z(self) -> np.ndarray:
        return -self.Z + self.h_z * np.arange(self.n_z)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.rho(), self.z(), indexing="ij")

    def z_weights(self) -> np.ndarray:
        w = np.full(self.n_z, self.h_z)
        if not self.periodic_z:
            w[0] = w[-1] = 0.5 * self.h_z
        return w

    def rho_weights(self) -> np.ndarray:
        w = np.full(self.n_rho, self.h_rho)
        w[0] = w[-1] = 0.5 * self.h_rho
        return w

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rho, self.n_z)


@dataclass(frozen=True, eq=False)
class MeridionalField:
    """``v_rho``, ``v_z`` and optionally ``p`` on a :class:`MeridionalGrid`.

    ``farfield`` holds the exterior expansion produced by the pressure solve
    (used for line-integral tails); ``swirl`` is accepted only so that
    unsupported inputs can be rejected explicitly.
    """

    N: int
    grid: MeridionalGrid
    v_rho: np.ndarray
    v_z: np.ndarray
    p: np.ndarray | None = None
    farfield: "MultipoleExpansion | None" = field(default=None, repr=False)
    swirl: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 3:
            raise ValueError(f"ambient dimension N must be >= 3, got {self.N}")
        arrays = [self.v_rho, self.v_z] + ([self.p] if self.p is not None else [])
        for a in arrays:
            if np.shape(a) != self.grid.shape:
                raise ValueError(f"array shape {np.shape(a)} does not match grid {self.grid.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError("meridional field contains non-finite values")
        for name in ("v_rho", "v_z", "p"):
            a = getattr(self, name)
            if a is not None:
                a = np.array(a, dtype=float)
                a.setflags(write=False)
                object.__setattr__(self, name, a)

    @property
    def m(self) -> int:
        return self.N - 2

    def with_pressure(self, p, farfield=None) -> "MeridionalField":
        return MeridionalField(self.N, self.grid, self.v_rho, self.v_z, p, farfield, self.swirl)


# -- finite-difference pieces ----------------------------------------------


def _radial_div(q: np.ndarray, rho: np.ndarray, m: int, h: float, odd: bool) -> np.ndarray:
    """``ρ^{-m} ∂_ρ(ρ^m q)`` by centered differences, with axis parity."""
    out = np.zeros_like(q)
    rm = rho**m
    out[1:-1] = (rm[2:, None] * q[2:] - rm[:-2, None] * q[:-2]) / (2.0 * h * rm[1:-1, None])
    # odd-in-ρ q: limit (m+1) ∂_ρ q(0); even q: the expression vanishes on the axis
    out[0] = (m + 1) * q[1] / h if odd else 0.0
    return out


def _dz(q: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) / (2.0 * h)
    out = np.zeros_like(q)
    out[:, 1:-1] = (q[:, 2:] - q[:, :-2]) / (2.0 * h)
    return out


def meridional_source(mf: MeridionalField) -> np.ndarray:
    """``f = -[ρ^{-m}∂_ρ(ρ^m g_ρ) + ∂_z g_z]`` from the velocity."""
    g = mf.grid
    rho, m, hr, hz, per = g.rho(), mf.m, g.h_rho, g.h_z, g.periodic_z
    vr, vz = mf.v_rho, mf.v_z
    g_rho = _radial_div(vr * vr, rho, m, hr, odd=False) + _dz(vr * vz, hz, per)
    g_z = _radial_div(vr * vz, rho, m, hr, odd=True) + _dz(vz * vz, hz, per)
    return -(_radial_div(g_rho, rho, m, hr, odd=True) + _dz(g_z, hz, per))


def axisymmetric_divergence(mf: MeridionalField) -> np.ndarray:
    """Centered-difference ``ρ^{-m}∂_ρ(ρ^m v_ρ) + ∂_z v_z``."""
    g = mf.grid
    return _radial_div(mf.v_rho, g.rho(), mf.m, g.h_rho, odd=True) + _dz(mf.v_z, g.h_z, g.periodic_z)


def _radial_operator(rho: np.ndarray, h: float, m: int):
    """Tridiagonal finite-volume ``ρ^{-m}∂_ρ(ρ^m ∂_ρ ·)`` on nodes ``0..n-2``.

    Returns sub, diag, super and the coupling of the last interior row to the
    boundary node ``n-1``.
    """
    n = rho.size - 1
    half = rho[:n] + 0.5 * h  # ρ_{i+1/2}
    wp = half**m
    wm = np.concatenate([[0.0], wp[:-1]])
    lo = np.concatenate([[0.0], rho[1:n] - 0.5 * h])
    vol = (half ** (m + 1) - lo ** (m + 1)) / ((m + 1) * h)
    scale = 1.0 / (h * h * vol)
    return wm * scale, -(wm + wp) * scale, wp * scale


def _thomas(a, b, c, d):
    """Batched tridiagonal solve; ``b`` and ``d`` have a trailing batch axis."""
    n = b.shape[0]
    cp = np.empty_like(b)
    dp = np.empty_like(d)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        den = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den
    x = np.empty_like(d)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


# -- exterior expansion ----------------------------------------------------


@dataclass(frozen=True)
class MultipoleExpansion:
    """Exterior free-space field ``-c Σ Q_n r^{-(N-2+n)} C_n^λ(cos θ)/C_n^λ(1)``."""

    N: int
    moments: np.ndarray

    @classmethod
    def from_source(cls, N: int, grid: MeridionalGrid, f: np.ndarray, order: int = 40) -> "MultipoleExpansion":
        lam = 0.5 * (N - 2)
        R, Zg = grid.mesh()
        r = np.hypot(R, Zg)
        ct = np.divide(Zg, r, out=np.ones_like(r), where=r > 0)
        area = 2.0 * np.pi ** ((N - 1) / 2) / special.gamma((N - 1) / 2)  # |S^{N-2}|
        W = area * (grid.rho() ** (N - 2) * grid.rho_weights())[:, None] * grid.z_weights()[None, :]
        wf = W * f
        moments = np.array([np.sum(wf * r**k * special.eval_gegenbauer(k, lam, ct)) for k in range(order + 1)])
        return cls(N, moments)

    def __call__(self, rho, z) -> np.ndarray:
        N = self.N
        lam = 0.5 * (N - 2)
        rho, z = np.broadcast_arrays(np.asarray(rho, float), np.asarray(z, float))
        r = np.hypot(rho, z)
        ct = z / r
        c = special.gamma(N / 2) / (2.0 * np.pi ** (N / 2) * (N - 2))
        out = np.zeros_like(r)
        for k, q in enumerate(self.moments):
            out += q * r ** (-(N - 2 + k)) * special.eval_gegenbauer(k, lam, ct) / special.eval_gegenbauer(k, lam, 1.0)
        return -c * out


# -- solvers ----------------------------------------------------------------


def solve_meridional_poisson(N: int, grid: MeridionalGrid, f: np.ndarray, boundary: str = "multipole"):
    """Solve ``Δ_N p = f`` for axisymmetric ``p`` on the meridional grid.

    Parameters
    ----------
    N : int
        Ambient dimension (``>= 3``).
    grid : MeridionalGrid
    f : ndarray
        Source on the nodes.
    boundary : {"multipole", "zero"}
        Dirichlet data on the open boundary: the multipole expansion of the
        exterior solution, or homogeneous.  Ignored in the z direction when
        the grid is periodic.

    Returns
    -------
    p : ndarray
    farfield : MultipoleExpansion or None
    """
    m = N - 2
    rho = grid.rho()
    hr, hz = grid.h_rho, grid.h_z
    a, b, c = _radial_operator(rho, hr, m)
    n = grid.n_rho - 1
    p = np.zeros(grid.shape)
    far = None
    if grid.periodic_z:
        return _solve_periodic(N, grid, f, a, b, c), None
    if boundary == "multipole":
        far = MultipoleExpansion.from_source(N, grid, f)
        R, Zg = grid.mesh()
        p[-1, :] = far(R[-1, :], Zg[-1, :])
        p[:, 0] = far(R[:, 0], Zg[:, 0])
        p[:, -1] = far(R[:, -1], Zg[:, -1])
    elif boundary != "zero":
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    rhs = f[:n, 1:-1].copy()
    rhs[:, 0] -= p[:n, 0] / hz**2
    rhs[:, -1] -= p[:n, -1] / hz**2
    rhs[-1, :] -= c[-1] * p[n, 1:-1]
    F = sfft.dst(rhs, type=1, axis=1)
    nz = grid.n_z - 2
    q = np.arange(1, nz + 1)
    eig = -(4.0 / hz**2) * np.sin(np.pi * q / (2.0 * (nz + 1))) ** 2
    X = _thomas(a, b[:, None] + eig[None, :], c, F)
    p[:n, 1:-1] = sfft.idst(X, type=1, axis=1)
    _check_residual(grid, p, f, a, b, c)
    return p, far


def _solve_periodic(N, grid, f, a, b, c):
    m = N - 2
    hz, n = grid.h_z, grid.n_rho - 1
    F = np.fft.rfft(f[:n], axis=1)
    kz = 2.0 * np.pi * np.fft.rfftfreq(grid.n_z, d=hz)
    eig = -(4.0 / hz**2) * np.sin(0.5 * kz * hz) ** 2
    bb = b[:, None] + eig[None, :] + 0j
    # beyond the source each mode decays like ρ^{-ν} K_ν(qρ) with ν = m/2; the
    # ratio between the last two nodes closes the system exactly
    P, hr = grid.P, grid.h_rho
    nu = 0.5 * m
    qs = np.sqrt(-eig[1:])
    g = np.zeros_like(kz)
    g[1:] = (P / (P - hr)) ** (-nu) * special.kve(nu, qs * P) / special.kve(nu, qs * (P - hr)) * np.exp(-qs * hr)
    bb[-1, :] += c[-1] * g
    X = _thomas(a, bb, c, F)
    pn = np.empty((n + 1, kz.size), dtype=complex)
    pn[:n] = X
    pn[n] = g * X[-1]
    return np.fft.irfft(pn, n=grid.n_z, axis=1)


def _check_residual(grid, p, f, a, b, c):
    n = grid.n_rho - 1
    hz = grid.h_z
    Lp = a[:, None] * np.vstack([np.zeros((1, grid.n_z)), p[: n - 1]]) + b[:, None] * p[:n] + c[:, None] * p[1 : n + 1]
    Lp[:, 1:-1] += (p[:n, 2:] - 2.0 * p[:n, 1:-1] + p[:n, :-2]) / hz**2
    res = Lp[:, 1:-1] - f[:n, 1:-1]
    # normwise backward error of the linear system
    scale = np.abs(f).max() + np.abs(p).max() * (np.abs(b).max() + 4.0 / hz**2)
    rel = float(np.abs(res).max() / max(scale, 1e-300))
    if not rel <= 1e-10:
        raise SolverError(f"meridional solve residual {rel:.3e} exceeds 1e-10", history=[rel])


def pressure_meridional(mf: MeridionalField, boundary: str = "multipole") -> MeridionalField:
    """Pressure of an axisymmetric swirl-free velocity; returns a copy with ``p``."""
    if mf.swirl is not None and np.any(mf.swirl != 0):
        raise UnsupportedInputError("swirling flows are not supported")
    scale = max(np.abs(mf.v_rho).max(), np.abs(mf.v_z).max(), 1e-300)
    if np.abs(mf.v_rho[0]).max() > 1e-12 * scale:
        raise AxisError("v_rho must vanish on the axis row")
    edge = np.abs(np.concatenate([mf.v_rho[-1], mf.v_z[-1]])).max()
    if not mf.grid.periodic_z:
        edge = max(edge, np.abs(mf.v_rho[:, [0, -1]]).max(), np.abs(mf.v_z[:, [0, -1]]).max())
    if edge > 1e-12 * scale:
        raise ValueError("velocity is not compactly supported inside the meridional domain")
    f = meridional_source(mf)
    p, far = solve_meridional_poisson(mf.N, mf.grid, f, boundary)
    return mf.with_pressure(p, far)
