"""
Heat semigroups on the torus, periodic heat kernels, the anisotropic
Helmholtz projection P_eps and div_eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Grid, PhysicalField, SpectralField, derivative_symbol

TAIL_TOL = 1e-14


def _lattice_radius(t: float, tol: float = TAIL_TOL) -> int:
    # Gaussian exp(-(2 pi m - pi)^2 / 4t) below tol for all |m| > radius
    return int(math.ceil(math.sqrt(4.0 * t * math.log(1.0 / tol)) / (2.0 * math.pi) + 1.0))


@dataclass(frozen=True)
class KernelSpec:
    """Heat kernel (s = 0) or fractional kernel M_t (0 < s < 1) on T^d."""

    t: float
    d: int = 1
    s: float = 0.0
    truncation_radius: int | None = None

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise ValueError("kernel time t must be > 0")
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if not 0 <= self.s < 1:
            raise ValueError("s must lie in [0, 1)")
        if self.truncation_radius is None:
            if self.s == 0:
                r = _lattice_radius(self.t)
            else:
                r = int(math.ceil(math.sqrt(40.0 / self.t))) + 2
            object.__setattr__(self, "truncation_radius", r)


def _points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if d == 1:
        return pts.reshape(-1, 1) if pts.ndim <= 1 else pts
    if pts.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}")
    return pts.reshape(-1, d)


def heat_kernel_1d(t: float, x, order: int = 0, radius: int | None = None) -> np.ndarray:
    """
    d^order/dx^order of the periodized Gaussian sum_m g_t(x - 2 pi m).

    g_t(x) = (4 pi t)^(-1/2) exp(-x^2/4t). Derivatives use probabilists'
    Hermite polynomials of y = x / sqrt(2t).
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    x = np.asarray(x, dtype=np.float64)
    radius = _lattice_radius(t) if radius is None else radius
    m = np.arange(-radius, radius + 1)
    y = (x[..., None] - 2.0 * np.pi * m) / math.sqrt(2.0 * t)
    gauss = np.exp(-0.5 * y**2) / math.sqrt(4.0 * math.pi * t)
    if order == 0:
        poly = 1.0
    else:
        coef = np.zeros(order + 1)
        coef[order] = 1.0
        poly = (-1) ** order * np.polynomial.hermite_e.hermeval(y, coef) / (2.0 * t) ** (order / 2.0)
    return np.sum(gauss * poly, axis=-1)


def heat_kernel_spectral_1d(t: float, x, order: int = 0, s: float = 0.0, kmax: int | None = None) -> np.ndarray:
    """(1/2pi) sum_k (ik)^order |k|^s exp(-t k^2) exp(ikx), the Fourier-side representation."""
    x = np.asarray(x, dtype=np.float64)
    kmax = int(math.ceil(math.sqrt(40.0 / t))) + 2 if kmax is None else kmax
    k = np.arange(-kmax, kmax + 1, dtype=np.float64)
    amp = np.exp(-t * k**2) * np.abs(k) ** s * (1j * k) ** order
    if s > 0:
        amp = np.where(k == 0, 0.0, amp)
    return (np.exp(1j * x[..., None] * k) @ amp).real / (2.0 * math.pi)


def heat_kernel_values(spec: KernelSpec, points) -> np.ndarray:
    """Kernel values at ``points`` (shape (npts,) for d=1 or (npts, d))."""
    pts = _points(points, spec.d)
    if spec.s == 0:
        out = np.ones(pts.shape[0])
        for a in range(spec.d):
            out = out * heat_kernel_1d(spec.t, pts[:, a], radius=spec.truncation_radius)
        return out
    if spec.d != 1:
        raise NotImplementedError("fractional kernels are provided on T^1 only")
    return heat_kernel_spectral_1d(spec.t, pts[:, 0], s=spec.s, kmax=spec.truncation_radius)


# multipliers ---------------------------------------------------------------

def heat_symbol(grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("time must be >= 0")
    return np.exp(-t * grid.ksq())


def split_heat_symbol(grid: Grid, t1: float, t2: float) -> np.ndarray:
    if t1 < 0 or t2 < 0:
        raise ValueError("times must be >= 0")
    vax = grid.vertical_axis
    kh2 = grid.ksq(grid.horizontal_axes)
    kv2 = grid.k(vax) ** 2 if vax is not None else 0.0
    return np.exp(-t1 * kh2) * np.exp(-t2 * kv2)


def fractional_symbol(grid: Grid, s1: float, s2: float, t1: float, t2: float) -> np.ndarray:
    if not (0 <= s1 < 1 and 0 <= s2 < 1):
        raise ValueError("s1, s2 must lie in [0, 1)")
    if not (t1 > 0 and t2 > 0):
        raise ValueError("t1, t2 must be > 0")
    vax = grid.vertical_axis
    kh = np.sqrt(grid.ksq(grid.horizontal_axes))
    sym = split_heat_symbol(grid, t1, t2)
    if s1 > 0:
        sym = sym * kh**s1
    if s2 > 0 and vax is not None:
        sym = sym * np.abs(grid.k(vax)) ** s2
    return sym


def apply_heat(F: SpectralField, t: float) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * heat_symbol(F.grid, t))


def apply_split_heat(F: SpectralField, t1: float, t2: float) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * split_heat_symbol(F.grid, t1, t2))


def apply_fractional(F: SpectralField, s1: float, s2: float, t1: float, t2: float) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * fractional_symbol(F.grid, s1, s2, t1, t2))


# anisotropic projection ---------------------------------------------------------

@dataclass(frozen=True)
class ProjectionSpec:
    epsilon: float = 1.0
    zero_mode_rule: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


def xi_eps(grid: Grid, eps: float) -> list[np.ndarray]:
    """Broadcastable components of xi_eps = (xi', xi3/eps)."""
    vax = grid.vertical_axis
    return [grid.k(a) / eps if a == vax else grid.k(a) for a in range(grid.ndim)]


def project_eps_array(coeffs: np.ndarray, grid: Grid, eps: float, zero_mode_rule: bool = True) -> np.ndarray:
    """Apply I - xi_eps xi_eps^T / |xi_eps|^2 per mode to (3, *dims) coefficients."""
    xi = xi_eps(grid, eps)
    xi2 = sum(c**2 for c in xi)
    zero = xi2 == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, xi2))
    dot = sum(xi[j] * coeffs[j] for j in range(grid.ndim)) * inv
    out = np.stack([coeffs[i] - xi[i] * dot for i in range(grid.ndim)])
    if not zero_mode_rule:
        out = np.where(zero, 0.0, out)
    return np.where(grid.any_nyquist, 0.0, out)


def projection_matrix(k: tuple[float, float, float], eps: float) -> np.ndarray:
    """3x3 symbol of P_eps at a single nonzero wavenumber."""
    xi = np.array([k[0], k[1], k[2] / eps], dtype=np.float64)
    n2 = xi @ xi
    if n2 == 0:
        return np.eye(3)
    return np.eye(3) - np.outer(xi, xi) / n2


def apply_projection_eps(F: SpectralField, spec: ProjectionSpec) -> SpectralField:
    if F.coeffs.shape[0] != 3 or F.coeffs.ndim != 4:
        raise ValueError("projection acts on 3-component fields on a 3D grid")
    return SpectralField(F.grid, project_eps_array(F.coeffs, F.grid, spec.epsilon, spec.zero_mode_rule))


def div_eps_array(coeffs: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    """Coefficients of div_H f' + d3 f3 / eps."""
    if not eps > 0:
        raise ValueError("epsilon must be > 0")
    vax = grid.vertical_axis
    out = 0.0
    for a in range(grid.ndim):
        term = coeffs[a] * derivative_symbol(grid, a)
        out = out + (term / eps if a == vax else term)
    return out


def div_eps(F, eps: float):
    """div_eps of a 3-component field; returns the same field type it is given."""
    if isinstance(F, PhysicalField):
        c = div_eps_array(F.grid.fft(F.values), F.grid, eps)
        return PhysicalField(F.grid, F.grid.ifft(c))
    return SpectralField(F.grid, div_eps_array(F.coeffs, F.grid, eps))


DERIVS = ("d1", "d2", "d3", "frac_h", "frac_v", "none")


def _deriv_symbol(grid: Grid, deriv: str, s: float) -> np.ndarray | float:
    vax = grid.vertical_axis
    if deriv == "none":
        return 1.0
    if deriv in ("d1", "d2", "d3"):
        return derivative_symbol(grid, int(deriv[1]) - 1)
    if deriv == "frac_h":
        return np.sqrt(grid.ksq(grid.horizontal_axes)) ** s
    if deriv == "frac_v":
        return np.abs(grid.k(vax)) ** s
    raise ValueError(f"deriv must be one of {DERIVS}")


def composite_heat_proj(F: SpectralField, t: float, eps: float, deriv: str = "none", s: float = 0.5) -> SpectralField:
    """
    e^{t Delta} P_eps D F in one multiplier pass, D one of ``DERIVS``.

    ``frac_h`` is (-Delta_H)^{s/2}, ``frac_v`` is |d3|^s.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    grid = F.grid
    m = heat_symbol(grid, t) * _deriv_symbol(grid, deriv, s)
    xi = xi_eps(grid, eps)
    xi2 = sum(c**2 for c in xi)
    zero = xi2 == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, xi2))
    c = F.coeffs
    dot = sum(xi[j] * c[j] for j in range(3)) * inv
    out = np.stack([m * (c[i] - xi[i] * dot) for i in range(3)])
    return SpectralField(grid, np.where(grid.any_nyquist, 0.0, out))
