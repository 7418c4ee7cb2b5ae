"""
Anisotropic L^inf_H L^q norms, vertical mean/fluctuation, vertical
antiderivative, and the weighted trajectory functionals X and Y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    Grid,
    PhysicalField,
    derivative_symbol,
    horizontal_grid,
)


@dataclass(frozen=True)
class AnisoNormSpec:
    """q: vertical exponent, with_gradient: add the weighted gradient term, time_weight: gamma in t^gamma."""

    q: float = 1.0
    with_gradient: bool = True
    time_weight: float = 0.5

    def __post_init__(self) -> None:
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        if self.time_weight < 0:
            raise ValueError("time_weight must be >= 0")


@dataclass(frozen=True)
class TrajectoryFunctionals:
    x_value: float
    y_value: float
    times: np.ndarray
    x_samples: dict[str, np.ndarray]
    y_samples: dict[str, np.ndarray]


def magnitude(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Pointwise Euclidean (Frobenius) magnitude over leading component axes."""
    lead = values.ndim - grid.ndim
    if lead == 0:
        return np.abs(values)
    return np.sqrt(np.sum(values**2, axis=tuple(range(lead))))


def linf_h_lq(values: np.ndarray, grid: Grid, q: float) -> float:
    """Array-level norm; ``values`` may carry leading component axes."""
    if not q >= 1:
        raise ValueError("q must be >= 1")
    vax = grid.vertical_axis
    if vax is None or grid.ndim != 3:
        raise ValueError("anisotropic norm needs a 3D grid with a vertical axis")
    m = magnitude(values, grid)
    if np.isinf(q):
        return float(m.max())
    h = grid.spacing[vax]
    if q == 1:
        col = np.sum(m, axis=vax) * h
    else:
        col = (np.sum(m**q, axis=vax) * h) ** (1.0 / q)
    return float(col.max())


def norm_linf_h_lq(f: PhysicalField, q: float) -> float:
    return linf_h_lq(f.values, f.grid, q)


def _vertical_mean_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    vax = grid.vertical_axis
    lead = values.ndim - grid.ndim
    return np.mean(values, axis=lead + vax)


def vertical_average(f: PhysicalField) -> PhysicalField:
    """(1/2pi) * integral over x3; exact for band-limited fields."""
    return PhysicalField(horizontal_grid(f.grid), _vertical_mean_array(f.values, f.grid))


def fluctuation(f: PhysicalField) -> PhysicalField:
    lead = f.values.ndim - f.grid.ndim
    mean = np.expand_dims(_vertical_mean_array(f.values, f.grid), lead + f.grid.vertical_axis)
    return PhysicalField(f.grid, f.values - mean)


def antiderivative_coeffs(coeffs: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """
    Spectral part of x3 -> int_{-pi}^{x3} f dz.

    Returns ``(G, fbar)`` where G holds the periodic part's coefficients and
    fbar the coefficients of the vertical mean (k3 = 0 slice). The full
    antiderivative is inverse(G) + fbar(x') * (x3 + pi).
    """
    vax = grid.vertical_axis
    k3 = grid.k(vax)
    nz = (k3 != 0) & ~grid.nyquist(vax)
    safe = np.where(nz, k3, 1.0)
    G = np.where(nz, coeffs / (1j * safe), 0.0)
    # constant so that the value at x3 = -pi vanishes: sum_k G_k e^{-i k pi} = 0
    sign = np.where(grid.k(vax) % 2 == 0, 1.0, -1.0)
    const = -np.sum(G * sign, axis=coeffs.ndim - grid.ndim + vax, keepdims=True)
    zero_slice = [slice(None)] * coeffs.ndim
    zero_slice[coeffs.ndim - grid.ndim + vax] = slice(0, 1)
    G[tuple(zero_slice)] = const
    fbar = coeffs[tuple(zero_slice)]
    return G, fbar


def antiderivative_array(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Grid values of int_{-pi}^{x3} f dz from coefficients of f."""
    G, fbar = antiderivative_coeffs(coeffs, grid)
    vax = grid.vertical_axis
    shape = [1] * grid.ndim
    shape[vax] = grid.dims[vax]
    x3p = (grid.coords(vax) + np.pi).reshape(shape)
    mean_c = np.zeros(coeffs.shape, dtype=complex)
    zero_slice = [slice(None)] * coeffs.ndim
    zero_slice[coeffs.ndim - grid.ndim + vax] = slice(0, 1)
    mean_c[tuple(zero_slice)] = fbar
    lin = grid.ifft(mean_c) * x3p
    return grid.ifft(G) + lin


def vertical_antiderivative(f: PhysicalField) -> PhysicalField:
    return PhysicalField(f.grid, antiderivative_array(f.grid.fft(f.values), f.grid))


def gradient_array(coeffs: np.ndarray, grid: Grid, axes: tuple[int, ...] | None = None) -> np.ndarray:
    """Grid values of the gradient along ``axes``; new leading axis indexes the direction."""
    axes = tuple(range(grid.ndim)) if axes is None else axes
    return np.stack([grid.ifft(coeffs * derivative_symbol(grid, a)) for a in axes])


def trajectory_functionals(traj, spec: AnisoNormSpec | None = None) -> TrajectoryFunctionals:
    """
    X = sup ||U|| + sup t^g ||grad U||, Y = sup ||u|| + sup ||grad_H u|| + sup t^g ||grad grad_H u||.

    ``traj`` is a :class:`hydrolab.trajectory.Trajectory`; U is its primary
    stored field and u the same field (for PE and difference trajectories the
    stored field is the natural carrier of both functionals).
    """
    spec = AnisoNormSpec() if spec is None else spec
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    grid = traj.grid
    q = spec.q
    ha = grid.horizontal_axes
    xs = {"u": [], "grad_u": []}
    ys = {"u": [], "grad_h_u": [], "grad_grad_h_u": []}
    for t, c in zip(traj.times, traj.coeffs):
        vals = grid.ifft(c)
        n0 = linf_h_lq(vals, grid, q)
        weight = t**spec.time_weight if spec.time_weight > 0 else 1.0
        g = gradient_array(c, grid)
        gh = gradient_array(c, grid, ha)
        ggh = np.stack(
            [gradient_array(c * derivative_symbol(grid, a), grid) for a in ha]
        )
        xs["u"].append(n0)
        xs["grad_u"].append(weight * linf_h_lq(g, grid, q) if spec.with_gradient else 0.0)
        ys["u"].append(n0)
        ys["grad_h_u"].append(linf_h_lq(gh, grid, q))
        ys["grad_grad_h_u"].append(weight * linf_h_lq(ggh, grid, q))
    xs = {k: np.asarray(v) for k, v in xs.items()}
    ys = {k: np.asarray(v) for k, v in ys.items()}
    x_value = float(sum(v.max() for v in xs.values()))
    y_value = float(sum(v.max() for v in ys.values()))
    return TrajectoryFunctionals(x_value, y_value, np.asarray(traj.times), xs, ys)
