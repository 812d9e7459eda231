"""Free-space pressure from velocity, weak-form residuals and test functions.

The whole-space solution of ``Δp = f`` is ``p = G * f`` with
``G = ln|x|/(2π)`` (2-D) or ``-1/(4π|x|)`` (3-D).  The default solver
convolves with ``G`` truncated at radius ``Λ = 2.4 L`` on the doubled grid.
The truncated kernel has a closed-form Fourier transform, which makes the
convolution exact for the band-limited interpolant of the source.
``kernel="sampled"`` instead uses point samples of ``G`` with the singular
cell replaced by its cell average; it is second-order accurate.

The quadratic source ``v_j v_k`` is sampled pointwise, so its spectrum is
aliased near Nyquist.  By default the source is damped with the exponential
filter ``exp(-36 (|k_a|/k_N)^36)`` per axis, which roughly halves the
pressure error at every resolution tested.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .grid import GridSpec, ScalarField, Spectrum, VectorField, laplacian, mixed_derivative
from .meridional import MeridionalField, pressure_meridional, solve_meridional_poisson  # noqa: F401
from .mollifier import RampProfile, radial_cutoff
from .synth import BumpSpec, bump

TRUNCATION = 2.4  # kernel truncation radius in units of L


class NotCompactError(ValueError):
    """The input does not vanish outside the ball of radius ``L/2``."""


def green(dim: int, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if dim == 2:
        return np.log(r) / (2.0 * np.pi)
    return -1.0 / (4.0 * np.pi * r)


def _doubled_k2(grid: GridSpec):
    n = 2 * grid.M
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.h)
    kr = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.h)
    axes = [k] * (grid.dim - 1) + [kr]
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    return grids, sum(g * g for g in grids)


def _truncated_kernel_hat(grid: GridSpec, k2: np.ndarray) -> np.ndarray:
    lt = TRUNCATION * grid.L
    kk = np.sqrt(k2)
    out = np.empty(k2.shape)
    pos = kk > 0
    z = kk[pos] * lt
    if grid.dim == 2:
        out[pos] = -(1.0 - special.j0(z)) / k2[pos] + lt * np.log(lt) * special.j1(z) / kk[pos]
        out[~pos] = -(lt**2) / 4.0 + lt**2 * np.log(lt) / 2.0
    else:
        out[pos] = -(1.0 - np.cos(z)) / k2[pos]
        out[~pos] = -(lt**2) / 2.0
    return out


def _cell_average(dim: int, h: float) -> float:
    if dim == 2:
        # mean of ln r over the square [-h/2, h/2]^2
        return (np.log(h) - 0.5 * np.log(2.0) - 1.5 + 0.25 * np.pi) / (2.0 * np.pi)
    # mean of 1/r over the cube of side h: (3 ln((√3+1)/(√3-1)) - π/2)/h
    s3 = np.sqrt(3.0)
    return -(3.0 * np.log((s3 + 1) / (s3 - 1)) - 0.5 * np.pi) / (4.0 * np.pi * h)


def _sampled_kernel_hat(grid: GridSpec) -> np.ndarray:
    n = 2 * grid.M
    idx = np.arange(n)
    x = np.where(idx < grid.M, idx, idx - n) * grid.h
    coords = np.meshgrid(*([x] * grid.dim), indexing="ij", sparse=True)
    r = np.sqrt(sum(c * c for c in coords))
    with np.errstate(divide="ignore"):
        G = green(grid.dim, r)
    G[(0,) * grid.dim] = _cell_average(grid.dim, grid.h)
    return np.fft.rfftn(G).real * grid.cell_volume


def source_filter(grid: GridSpec, kv) -> np.ndarray:
    """Per-axis exponential filter ``exp(-36 (|k|/k_N)^36)`` on doubled-grid modes."""
    kn = np.pi / grid.h
    out = 1.0
    for k in kv:
        out = out * np.exp(-36.0 * (np.abs(k) / kn) ** 36)
    return out


def _pad(a: np.ndarray) -> np.ndarray:
    M = a.shape[0]
    out = np.zeros((2 * M,) * a.ndim)
    out[(slice(0, M),) * a.ndim] = a
    return out


class FreeSpacePressure(ScalarField):
    """Decaying whole-space Poisson solution sampled on the box.

    Besides the box samples it keeps the doubled-grid spectrum (accurate for
    ``|x| <= L``) and the source samples, which :meth:`evaluate` sums
    directly against the Green's function for points beyond ``L``.
    """

    def __init__(
        self,
        grid: GridSpec,
        samples,
        doubled_hat: np.ndarray,
        source: ScalarField,
        kernel: str,
        source_radius: float,
        zero_mass: bool = False,
    ):
        super().__init__(grid, samples)
        self.zero_mass = zero_mass
        self.source_radius = float(source_radius)
        self._hat = doubled_hat
        self.source = source
        self.kernel = kernel
        self._full_spectrum = None
        self._ext = None

    def spectrum(self) -> Spectrum:
        if self._full_spectrum is None:
            g = self.grid
            n = 2 * g.M
            c = np.fft.fftn(np.fft.irfftn(self._hat, s=(n,) * g.dim, axes=range(g.dim))) / n**g.dim
            k = tuple(2.0 * np.pi * np.fft.fftfreq(n, d=g.h) for _ in range(g.dim))
            for a, ka in enumerate(k):
                shp = [1] * g.dim
                shp[a] = n
                c = c * np.exp(1j * ka * g.L).reshape(shp)
            self._full_spectrum = Spectrum(k, c, g.L)
        return self._full_spectrum

    def _exterior_sources(self):
        if self._ext is None:
            g = self.grid
            f = self.source.samples
            r = g.radius()
            keep = r <= min(g.L, self.source_radius + 4 * g.h)
            pts = np.stack([np.broadcast_to(c, g.shape)[keep] for c in g.coords()], axis=-1)
            w = f[keep] * g.cell_volume
            # a divergence-form source has zero mass; truncating the filtered
            # source leaves a ~1e-10 monopole whose log tail would dominate far away
            self._ext = (pts, w - w.mean() if self.zero_mass else w)
        return self._ext

    def direct_sum(self, points) -> np.ndarray:
        """Trapezoidal ``Σ G(x - y) f(y) h^dim`` over the source nodes."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        src, w = self._exterior_sources()
        out = np.empty(pts.shape[0])
        chunk = max(1, int(4e6 // max(len(w), 1)))
        for s in range(0, pts.shape[0], chunk):
            d = pts[s : s + chunk, None, :] - src[None, :, :]
            out[s : s + chunk] = green(self.grid.dim, np.sqrt(np.einsum("pqd,pqd->pq", d, d))) @ w
        return out

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        out = np.empty(len(pts))
        inner = r <= self.valid_radius
        if np.any(inner):
            out[inner] = self.spectrum().evaluate(pts[inner])
        if np.any(~inner):
            out[~inner] = self.direct_sum(pts[~inner])
        return out


def _solve_hat(grid: GridSpec, f_hat: np.ndarray, k2: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "spectral":
        return f_hat * _truncated_kernel_hat(grid, k2)
    if kernel == "sampled":
        return f_hat * _sampled_kernel_hat(grid)
    raise ValueError(f"unknown kernel {kernel!r}")


def _finish(
    grid: GridSpec, u_hat: np.ndarray, source: ScalarField, kernel: str, radius: float, zero_mass: bool = False
) -> FreeSpacePressure:
    n = 2 * grid.M
    u = np.fft.irfftn(u_hat, s=(n,) * grid.dim, axes=range(grid.dim))
    box = u[(slice(0, grid.M),) * grid.dim]
    return FreeSpacePressure(grid, box, u_hat, source, kernel, radius, zero_mass)


def _check_compact(grid: GridSpec, arrays, what: str, rtol: float = 1e-12) -> None:
    r = grid.radius()
    outside = r > 0.5 * grid.L * (1 + 1e-12)
    top = max(np.abs(a).max() for a in arrays)
    if top == 0.0:
        return
    spill = max(np.abs(a[outside]).max() for a in arrays)
    if spill > rtol * top:
        raise NotCompactError(f"{what} is not supported within radius L/2 (|outside|/max = {spill / top:.2e})")


def poisson_freespace(rhs: ScalarField, kernel: str = "spectral", support_rtol: float = 1e-8) -> FreeSpacePressure:
    """Decaying solution of ``Δu = rhs`` for a source supported within ``L/2``.

    Spectrally differentiated sources ring at roundoff-to-``1e-9`` level
    outside their support, hence the looser default ``support_rtol``.
    """
    g = rhs.grid
    _check_compact(g, [rhs.samples], "source", support_rtol)
    _, k2 = _doubled_k2(g)
    f_hat = np.fft.rfftn(_pad(rhs.samples))
    return _finish(g, _solve_hat(g, f_hat, k2, kernel), rhs, kernel, rhs.support_radius(support_rtol))


def pressure_freespace(v: VectorField, kernel: str = "spectral", filtered: bool = True) -> FreeSpacePressure:
    """Decaying pressure solving ``Δp = -Σ ∂_j ∂_k (v_j v_k)``.

    Parameters
    ----------
    v : VectorField
        Velocity supported within radius ``L/2``.
    kernel : {"spectral", "sampled"}
        Green's-function treatment (see module docstring).
    filtered : bool
        Apply the anti-aliasing filter to the quadratic source.

    Raises
    ------
    NotCompactError
        If ``max|v|`` outside radius ``L/2`` exceeds ``1e-12 max|v|``.
    """
    g = v.grid
    _check_compact(g, v.components, "velocity")
    kv, k2 = _doubled_k2(g)
    f_hat = 0
    for j in range(g.dim):
        for k in range(j, g.dim):
            t = np.fft.rfftn(_pad(v.components[j] * v.components[k]))
            if j == k:
                sym = kv[j] * kv[j]
            else:
                sym = 2.0 * _odd(kv[j], 2 * g.M) * _odd(kv[k], 2 * g.M)
            f_hat = f_hat + sym * t
    # f = -∂_j∂_k(v_j v_k) has symbol +k_j k_k
    if filtered:
        f_hat = f_hat * source_filter(g, kv)
    n = 2 * g.M
    f_doubled = np.fft.irfftn(f_hat, s=(n,) * g.dim, axes=range(g.dim))
    source = ScalarField(g, f_doubled[(slice(0, g.M),) * g.dim])
    radius = max(v.component(j).support_radius(1e-15) for j in range(g.dim))
    return _finish(g, _solve_hat(g, f_hat, k2, kernel), source, kernel, radius, zero_mass=True)


def _odd(k: np.ndarray, n: int) -> np.ndarray:
    """First-derivative wavenumber with the Nyquist entry removed."""
    k = np.array(k, copy=True)
    flat = k.reshape(-1)
    flat[np.argmax(np.abs(flat))] = 0.0
    return k


# -- weak form ---------------------------------------------------------------


def weak_form_residual(v: VectorField, p: ScalarField, h: ScalarField) -> float:
    """``∫ p Δh dx + Σ_jk ∫ v_j v_k ∂_j ∂_k h dx`` by grid quadrature."""
    g = v.grid
    acc = np.sum(p.samples * laplacian(h).samples)
    for j in range(g.dim):
        for k in range(g.dim):
            acc += np.sum(v.components[j] * v.components[k] * mixed_derivative(h, j, k).samples)
    return float(acc * g.cell_volume)


def weak_form_scale(v: VectorField, p: ScalarField, h: ScalarField) -> float:
    """``‖p‖_1 ‖Δh‖_∞ + ‖v‖_2^2 ‖D^2 h‖_∞``, the natural size of the residual."""
    g = v.grid
    d2 = max(np.abs(mixed_derivative(h, j, k).samples).max() for j in range(g.dim) for k in range(g.dim))
    return p.l1_norm() * float(np.abs(laplacian(h).samples).max()) + v.energy() * d2


def ramp_test_function(R1: float, R2: float, eps: float, grid: GridSpec) -> ScalarField:
    """Sample ``φ_{R1,R2,ε}(|x|)``; requires ``0 < ε < min(R1, (R2-R1)/2)``."""
    prof = RampProfile(R1, R2, eps)
    if R2 + eps >= grid.L:
        raise ValueError("ramp must be constant before the box boundary (R2 + eps < L)")
    return ScalarField(grid, prof(grid.radius()))


def cutoff_field(R: float, grid: GridSpec) -> ScalarField:
    """Smooth radial cutoff ``σ_R``: 1 inside ``R``, 0 beyond ``2R``."""
    return ScalarField(grid, radial_cutoff(grid.radius(), R))


def random_test_functions(grid: GridSpec, rng: np.random.Generator, count: int, ramps: int = 0) -> list[ScalarField]:
    """``count`` test functions: random bumps inside ``|x| < 0.48 L`` plus ``ramps`` radial ramps.

    Ramp parameters are drawn so that ``0 < ε < min(R1, (R2-R1)/2)`` and
    ``R2 + ε < L``.
    """
    out = []
    for _ in range(count - ramps):
        a = rng.uniform(0.1, 0.25) * grid.L
        d = rng.normal(size=grid.dim)
        c = d / np.linalg.norm(d) * rng.uniform(0.0, 0.48 * grid.L - a)
        out.append(bump(BumpSpec(tuple(c), a), grid))
    for _ in range(ramps):
        R1 = rng.uniform(0.1, 0.3) * grid.L
        R2 = R1 + rng.uniform(0.2, 0.4) * grid.L
        eps = rng.uniform(0.2, 0.8) * min(R1, 0.5 * (R2 - R1), 0.9 * grid.L - R2)
        out.append(ramp_test_function(R1, R2, eps, grid))
    return out
