"""
Primitive equations on T^3: w-reconstruction, hydrostatic projection,
exponential-midpoint time stepping, the w-equation forcing F(v, w), the
difference forcing F~(v, w), and the w-equation residual check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aniso import antiderivative_array, antiderivative_coeffs
from .semigroups import heat_symbol
from .spectral import Grid, PhysicalField, derivative_symbol
from .trajectory import HydroState, Trajectory

INVARIANT_TOL = 1e-8


class InvariantError(RuntimeError):
    """Raised when a solver invariant drifts beyond tolerance or a NaN appears."""


# spectral building blocks ----------------------------------------------------

def div_h_coeffs(vc: np.ndarray, grid: Grid) -> np.ndarray:
    return vc[0] * derivative_symbol(grid, 0) + vc[1] * derivative_symbol(grid, 1)


def _vertical_zero_slice(grid: Grid, lead: int) -> tuple:
    sl = [slice(None)] * (lead + grid.ndim)
    sl[lead + grid.vertical_axis] = 0
    return tuple(sl)


def barotropic_defect(vc: np.ndarray, grid: Grid) -> float:
    """Sup of |div_H vbar| bounded by the l1 norm of its coefficients."""
    d = div_h_coeffs(vc, grid)
    return float(np.sum(np.abs(d[_vertical_zero_slice(grid, 0)])))


def w_coeffs(vc: np.ndarray, grid: Grid) -> np.ndarray:
    """Coefficients of w = -int_{-pi}^{x3} div_H v dz (mean of div_H v assumed zero)."""
    G, _ = antiderivative_coeffs(-div_h_coeffs(vc, grid), grid)
    return G


def hydrostatic_project_coeffs(tc: np.ndarray, grid: Grid) -> np.ndarray:
    """Remove grad_H pi, pi = pi(x'), so that div_H of the vertical mean vanishes."""
    out = np.array(tc, dtype=np.complex128, copy=True)
    zs = _vertical_zero_slice(grid, 1)
    k1 = grid.k(0)[..., 0]
    k2 = grid.k(1)[..., 0]
    kh2 = k1**2 + k2**2
    inv = np.where(kh2 == 0, 0.0, 1.0 / np.where(kh2 == 0, 1.0, kh2))
    bar = out[zs]
    dot = (k1 * bar[0] + k2 * bar[1]) * inv
    bar[0] = bar[0] - k1 * dot
    bar[1] = bar[1] - k2 * dot
    nyq = grid.nyquist(0)[..., 0] | grid.nyquist(1)[..., 0]
    bar[:, nyq] = 0.0
    out[zs] = bar
    return out


def pe_nonlinear_coeffs(vc: np.ndarray, grid: Grid, wc: np.ndarray | None = None) -> np.ndarray:
    """Dealiased coefficients of v.grad_H v + w d3 v."""
    wc = w_coeffs(vc, grid) if wc is None else wc
    v = grid.ifft(vc)
    w = grid.ifft(wc)
    n = v[0] * grid.ifft(vc * derivative_symbol(grid, 0))
    n += v[1] * grid.ifft(vc * derivative_symbol(grid, 1))
    n += w * grid.ifft(vc * derivative_symbol(grid, 2))
    return grid.fft(n) * grid.dealias_mask


def pe_rhs_coeffs(vc: np.ndarray, grid: Grid) -> np.ndarray:
    return -hydrostatic_project_coeffs(pe_nonlinear_coeffs(vc, grid), grid)


# public operations -----------------------------------------------------------

def reconstruct_w(v: PhysicalField, tol: float = 1e-9) -> PhysicalField:
    """w = -int_{-pi}^{x3} div_H v dz; rejects v whose barotropic part is not div_H-free."""
    grid = v.grid
    vc = grid.fft(v.values)
    defect = barotropic_defect(vc, grid)
    scale = max(1.0, float(np.max(np.abs(v.values))))
    if defect > tol * scale:
        raise ValueError(f"div_H of the vertical mean is {defect:.3e}, expected 0")
    return PhysicalField(grid, antiderivative_array(-div_h_coeffs(vc, grid), grid))


def hydrostatic_project(tendency: PhysicalField) -> PhysicalField:
    grid = tendency.grid
    out = hydrostatic_project_coeffs(grid.fft(tendency.values), grid)
    return PhysicalField(grid, grid.ifft(out))


def pe_rhs(state: HydroState) -> PhysicalField:
    """-(v.grad_H v + w d3 v), dealiased and hydrostatically projected."""
    grid = state.grid
    vc = grid.fft(state.v)
    wc = grid.fft(state.w)
    rhs = -hydrostatic_project_coeffs(pe_nonlinear_coeffs(vc, grid, wc), grid)
    return PhysicalField(grid, grid.ifft(rhs))


def default_initial_v(grid: Grid) -> PhysicalField:
    """(sin x1 cos x3 + sin x2 / 2, -cos x1 sin x2 cos x3), barotropically projected."""
    x1, x2, x3 = grid.mesh()
    v = np.stack([
        np.sin(x1) * np.cos(x3) + 0.5 * np.sin(x2),
        -np.cos(x1) * np.sin(x2) * np.cos(x3),
    ])
    return hydrostatic_project(PhysicalField(grid, v))


def step_count(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if T < dt * (1 - 1e-12):
        raise ValueError("T must be >= dt")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-12 * max(T, 1.0):
        raise ValueError(f"dt={dt!r} does not divide T={T!r}")
    return n


def etd2_step(uc: np.ndarray, dt: float, e_half: np.ndarray, rhs) -> np.ndarray:
    """One exponential-midpoint step for u' = Delta u + rhs(u)."""
    mid = e_half * (uc + 0.5 * dt * rhs(uc))
    return e_half * (e_half * uc + dt * rhs(mid))


def hydro_invariants(vc: np.ndarray, wc: np.ndarray, grid: Grid) -> dict[str, float]:
    div3 = div_h_coeffs(vc, grid) + wc * derivative_symbol(grid, 2)
    w_bottom = grid.ifft(wc).take(0, axis=grid.vertical_axis)
    return {
        "div_h_mean": barotropic_defect(vc, grid),
        "div_3d": float(np.sum(np.abs(div3))),
        "w_boundary": float(np.max(np.abs(w_bottom))),
    }


def solve_pe(v0: PhysicalField, T: float, dt: float, store_every: int = 1) -> Trajectory:
    """
    Integrate the primitive equations with the exponential midpoint rule.

    Stores (v1, v2, w) every ``store_every`` steps including t = 0.
    """
    grid = v0.grid
    nsteps = step_count(T, dt)
    if nsteps % store_every != 0:
        raise ValueError("store_every must divide the number of steps")
    vc = grid.fft(np.asarray(v0.values)) * grid.dealias_mask
    vc = np.where(grid.any_nyquist, 0.0, vc)
    defect = barotropic_defect(vc, grid)
    if defect > 1e-9 * max(1.0, float(np.max(np.abs(v0.values)))):
        raise ValueError(f"initial data violates div_H vbar = 0 (defect {defect:.3e})")
    e_half = heat_symbol(grid, 0.5 * dt)
    rhs = lambda c: pe_rhs_coeffs(c, grid)  # noqa: E731

    nstore = nsteps // store_every + 1
    out = np.empty((nstore, 3, *grid.dims), dtype=np.complex128)
    worst = {"div_h_mean": 0.0, "div_3d": 0.0, "w_boundary": 0.0}

    def record(j: int, c: np.ndarray, t: float) -> None:
        wc = w_coeffs(c, grid)
        if not (np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))):
            raise InvariantError(f"non-finite PE state at t={t:.6g}")
        inv = hydro_invariants(c, wc, grid)
        for key, val in inv.items():
            worst[key] = max(worst[key], val)
            if val > INVARIANT_TOL:
                raise InvariantError(f"PE invariant {key} = {val:.3e} at t={t:.6g}")
        out[j, :2] = c
        out[j, 2] = wc

    record(0, vc, 0.0)
    for n in range(1, nsteps + 1):
        vc = etd2_step(vc, dt, e_half, rhs)
        if n % store_every == 0:
            record(n // store_every, vc, n * dt)
    times = np.arange(nstore) * (dt * store_every)
    meta = {"solver": "etd2-midpoint", "dt": dt, "T": T, "store_every": store_every,
            "invariants_max": worst}
    return Trajectory(grid, "hydrostatic", times, out, dt * store_every, None, meta)


# forcing terms -------------------------------------------------------------

def _state_coeffs(state: HydroState) -> tuple[Grid, np.ndarray, np.ndarray]:
    grid = state.grid
    return grid, grid.fft(np.asarray(state.v)), grid.fft(np.asarray(state.w))


def _dealiased(product: np.ndarray, grid: Grid) -> np.ndarray:
    return grid.fft(product) * grid.dealias_mask


def compute_F_coeffs(vc: np.ndarray, wc: np.ndarray, grid: Grid) -> np.ndarray:
    """
    Coefficients of F(v, w) = d_t w - Delta w along PE solutions.

    With G = v.grad_H v + (div_H v) v:
        F = int_{-pi}^{x3} div_H G dz - (x3 + pi)/(2 pi) int_{-pi}^{pi} div_H G dz
            + div_H(w v) + div_H d3 v |_{x3=-pi}
    The first two terms combine into the periodic antiderivative of the
    vertical fluctuation of div_H G.
    """
    d1, d2, d3 = (derivative_symbol(grid, a) for a in range(3))
    v = grid.ifft(vc)
    w = grid.ifft(wc)
    divv = grid.ifft(div_h_coeffs(vc, grid))
    G = v[0] * grid.ifft(vc * d1) + v[1] * grid.ifft(vc * d2) + divv * v
    Gc = _dealiased(G, grid)
    dGc = div_h_coeffs(Gc, grid)
    zs = _vertical_zero_slice(grid, 0)
    dGc_fluct = dGc.copy()
    dGc_fluct[zs] = 0.0
    term1, _ = antiderivative_coeffs(dGc_fluct, grid)
    term2 = div_h_coeffs(_dealiased(w * v, grid), grid)
    # trace of div_H d3 v at x3 = -pi, a function of x' only
    tr = div_h_coeffs(vc, grid) * d3
    sign = np.where(grid.k(2) % 2 == 0, 1.0, -1.0)
    trace = np.zeros_like(tr)
    trace[zs] = np.sum(tr * sign, axis=2)
    return term1 + term2 + trace


def compute_F(state: HydroState) -> PhysicalField:
    grid, vc, wc = _state_coeffs(state)
    return PhysicalField(grid, grid.ifft(compute_F_coeffs(vc, wc, grid)))


def compute_F_tilde_coeffs(vc: np.ndarray, wc: np.ndarray, grid: Grid, form: str = "definition") -> np.ndarray:
    d1, d2, d3 = (derivative_symbol(grid, a) for a in range(3))
    F = compute_F_coeffs(vc, wc, grid)
    v = grid.ifft(vc)
    adv_h = v[0] * grid.ifft(wc * d1) + v[1] * grid.ifft(wc * d2)
    if form == "definition":
        w = grid.ifft(wc)
        vert = w * grid.ifft(wc * d3)
    elif form == "no_d3":
        # w d3 w = (int div_H v dz) div_H v, using d3 w = -div_H v and w = -int div_H v dz
        dv = div_h_coeffs(vc, grid)
        A = antiderivative_array(dv, grid)
        vert = A * grid.ifft(dv)
    else:
        raise ValueError("form must be 'definition' or 'no_d3'")
    return -(F + _dealiased(adv_h + vert, grid))


def compute_F_tilde(state: HydroState, form: str = "definition") -> PhysicalField:
    grid, vc, wc = _state_coeffs(state)
    return PhysicalField(grid, grid.ifft(compute_F_tilde_coeffs(vc, wc, grid, form)))


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    l2_residual: float
    times: np.ndarray
    per_time_max: np.ndarray
    dt: float


def check_w_equation(traj: Trajectory) -> ResidualReport:
    """d_t w - Delta w - F(v, w) with centered differences at interior samples."""
    if traj.kind != "hydrostatic":
        raise ValueError("w-equation check needs a hydrostatic trajectory")
    if len(traj) < 3:
        raise ValueError("need at least 3 samples")
    grid = traj.grid
    lap = -grid.ksq()
    dt = traj.dt
    per_max, sq = [], []
    for i in range(1, len(traj) - 1):
        c = traj.coeffs
        dwdt = (c[i + 1, 2] - c[i - 1, 2]) / (2 * dt)
        res = dwdt - lap * c[i, 2] - compute_F_coeffs(c[i, :2], c[i, 2], grid)
        r = grid.ifft(res)
        per_max.append(float(np.max(np.abs(r))))
        sq.append(float(np.sum(r**2) * grid.cell_volume))
    per_max = np.asarray(per_max)
    return ResidualReport(
        max_residual=float(per_max.max()),
        l2_residual=float(np.sqrt(np.mean(sq))),
        times=traj.times[1:-1].copy(),
        per_time_max=per_max,
        dt=dt,
    )
