"""Standard mollifier, smooth steps, radial cutoffs and ramp profiles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_PANELS = 8


def bump_profile(s) -> np.ndarray:
    """``exp(1/(s^2 - 1))`` for ``|s| < 1`` and 0 elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 / (s[inside] ** 2 - 1.0))
    return out


def sphere_area(dim: int, R: float = 1.0) -> float:
    """Surface measure of the radius-``R`` sphere in ``R^dim``."""
    return 2.0 * np.pi ** (dim / 2) / special.gamma(dim / 2) * R ** (dim - 1)


@lru_cache(maxsize=None)
def normalizer(dim: int = 1) -> float:
    """Constant ``c`` with ``c * ∫_{R^dim} exp(1/(|x|^2-1)) dx = 1``."""
    val = float(_composite_gl(np.zeros(1), 1.0, lambda r: r ** (dim - 1) * bump_profile(r))[0])
    return 1.0 / (sphere_area(dim) * val) if dim > 1 else 1.0 / (2.0 * val)


def _composite_gl(lo: np.ndarray, hi: float | np.ndarray, g) -> np.ndarray:
    """∫_lo^hi g for each entry of ``lo`` using panelled Gauss-Legendre."""
    lo = np.asarray(lo, dtype=float)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), lo.shape)
    edges = lo[..., None] + (hi - lo)[..., None] * np.linspace(0.0, 1.0, _PANELS + 1)
    a, b = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (b - a)
    x = 0.5 * (a + b)[..., None] + half[..., None] * _GL_X
    return np.sum(half[..., None] * _GL_W * g(x), axis=(-1, -2))


def _eta1(u):
    return normalizer(1) * bump_profile(u)


def smooth_step(t) -> np.ndarray:
    """``S(t) = ∫_{-1}^t η(u) du`` for the 1-D normalized mollifier ``η``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    # integrate over the shorter side and use S(t) = 1 - S(-t)
    lower = (t > -1.0) & (t <= 0.0)
    upper = (t > 0.0) & (t < 1.0)
    if np.any(lower):
        out[lower] = _composite_gl(np.full(lower.sum(), -1.0), t[lower], _eta1)
    if np.any(upper):
        out[upper] = 1.0 - _composite_gl(np.full(upper.sum(), -1.0), -t[upper], _eta1)
    return out


def _first_moment(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    mid = (t > -1.0) & (t < 1.0)
    if np.any(mid):
        out[mid] = _composite_gl(np.full(mid.sum(), -1.0), t[mid], lambda u: u * _eta1(u))
    return out


def double_step(t) -> np.ndarray:
    """``T(t) = ∫_{-1}^t S(u) du``; equals ``t`` for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    clipped = np.clip(t, -1.0, 1.0)
    out = t * smooth_step(clipped) - _first_moment(clipped)
    out = np.where(t >= 1.0, t, out)
    return np.where(t <= -1.0, 0.0, out)


def _unique_apply(r: np.ndarray, fn) -> np.ndarray:
    u, inv = np.unique(np.asarray(r, dtype=float), return_inverse=True)
    return fn(u)[inv].reshape(np.shape(r))


@dataclass(frozen=True)
class RampProfile:
    """Radial ramp ``φ(r) = ∫_0^r ∫_0^σ {η_ε(s-R1) - η_ε(s-R2)} ds dσ``.

    ``φ' `` equals 1 on ``(R1+ε, R2-ε)`` and vanishes outside ``(R1-ε, R2+ε)``.
    """

    R1: float
    R2: float
    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < min(self.R1, 0.5 * (self.R2 - self.R1))):
            raise ValueError(
                f"ramp parameters need 0 < eps < min(R1, (R2-R1)/2); got R1={self.R1}, R2={self.R2}, eps={self.eps}"
            )

    def __call__(self, r) -> np.ndarray:
        e = self.eps
        return _unique_apply(r, lambda u: e * (double_step((u - self.R1) / e) - double_step((u - self.R2) / e)))

    def derivative(self, r, order: int = 1) -> np.ndarray:
        e = self.eps
        r = np.asarray(r, dtype=float)
        if order == 1:
            return smooth_step((r - self.R1) / e) - smooth_step((r - self.R2) / e)
        if order == 2:
            return (_eta1((r - self.R1) / e) - _eta1((r - self.R2) / e)) / e
        raise ValueError(f"unsupported derivative order {order}")


def radial_cutoff(r, R: float) -> np.ndarray:
    """Smooth ``σ_R(r)``: 1 for ``r <= R``, 0 for ``r >= 2R``, monotone between."""
    r = np.asarray(r, dtype=float)
    return 1.0 - _unique_apply(r, lambda u: smooth_step(2.0 * u / R - 3.0))


def radial_cutoff_derivative(r, R: float) -> np.ndarray:
    """``dσ_R/dr``."""
    r = np.asarray(r, dtype=float)
    return -(2.0 / R) * _eta1(2.0 * r / R - 3.0)
