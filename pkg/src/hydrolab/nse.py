"""
Scaled Navier-Stokes solver, the difference system against the primitive
equations (direct subtraction and Picard iteration on the mild form), and the
Fujita-Kato error functionals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aniso import gradient_array, linf_h_lq
from .pe import INVARIANT_TOL, InvariantError, compute_F_tilde_coeffs, etd2_step, step_count
from .semigroups import div_eps_array, heat_symbol, project_eps_array
from .spectral import Grid, PhysicalField, derivative_symbol
from .trajectory import Trajectory


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return eps


def _velocity_from_scaled(ut: np.ndarray, eps: float) -> np.ndarray:
    """u = (ut1, ut2, ut3 / eps) for grid values of the rescaled field."""
    u = ut.copy()
    u[2] /= eps
    return u


def advect(u: np.ndarray, fc: np.ndarray, grid: Grid) -> np.ndarray:
    """Grid values of (u . grad) f for vector f given by coefficients ``fc``."""
    out = u[0] * grid.ifft(fc * derivative_symbol(grid, 0))
    out += u[1] * grid.ifft(fc * derivative_symbol(grid, 1))
    out += u[2] * grid.ifft(fc * derivative_symbol(grid, 2))
    return out


def nse_rhs_coeffs(uc: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    """-P_eps (u_eps . grad ut), with u_eps = (ut', ut3/eps), dealiased."""
    u = _velocity_from_scaled(grid.ifft(uc), eps)
    n = grid.fft(advect(u, uc, grid)) * grid.dealias_mask
    return -project_eps_array(n, grid, eps)


def div_eps_sup(uc: np.ndarray, grid: Grid, eps: float) -> float:
    return float(np.max(np.abs(grid.ifft(div_eps_array(uc, grid, eps)))))


def solve_scaled_nse(u0: PhysicalField, eps: float, T: float, dt: float, store_every: int = 1) -> Trajectory:
    """
    Evolve ut = (v_eps, eps w_eps) from unscaled data u0 = (v0, w0).

    The stored trajectory has kind ``scaled``; its third component is eps*w_eps.
    """
    eps = _check_eps(eps)
    grid = u0.grid
    nsteps = step_count(T, dt)
    if nsteps % store_every != 0:
        raise ValueError("store_every must divide the number of steps")
    c0 = grid.fft(np.asarray(u0.values))
    div0 = float(np.max(np.abs(grid.ifft(div_eps_array(c0, grid, 1.0)))))
    if div0 > 1e-9 * max(1.0, float(np.max(np.abs(u0.values)))):
        raise ValueError(f"initial data is not divergence free (sup |div u0| = {div0:.3e})")
    uc = c0 * grid.dealias_mask
    uc = np.where(grid.any_nyquist, 0.0, uc)
    uc[2] *= eps
    e_half = heat_symbol(grid, 0.5 * dt)
    rhs = lambda c: nse_rhs_coeffs(c, grid, eps)  # noqa: E731

    nstore = nsteps // store_every + 1
    out = np.empty((nstore, 3, *grid.dims), dtype=np.complex128)
    worst = 0.0

    def record(j: int, c: np.ndarray, t: float) -> None:
        nonlocal worst
        if not (np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))):
            raise InvariantError(f"non-finite NSE state at t={t:.6g}, eps={eps}")
        d = div_eps_sup(c, grid, eps)
        worst = max(worst, d)
        if d > INVARIANT_TOL:
            raise InvariantError(f"div_eps drift {d:.3e} at t={t:.6g}, eps={eps}")
        out[j] = c

    record(0, uc, 0.0)
    for n in range(1, nsteps + 1):
        uc = etd2_step(uc, dt, e_half, rhs)
        if n % store_every == 0:
            record(n // store_every, uc, n * dt)
    times = np.arange(nstore) * (dt * store_every)
    meta = {"solver": "etd2-midpoint", "dt": dt, "T": T, "store_every": store_every, "div_eps_max": worst}
    return Trajectory(grid, "scaled", times, out, dt * store_every, eps, meta)


def difference_direct(nse_traj: Trajectory, pe_traj: Trajectory) -> Trajectory:
    """Ut = (v_eps - v, eps (w_eps - w)) sample by sample."""
    if nse_traj.kind != "scaled" or pe_traj.kind != "hydrostatic":
        raise ValueError("expected a scaled NSE trajectory and a hydrostatic PE trajectory")
    if nse_traj.grid != pe_traj.grid:
        raise ValueError("trajectories live on different grids")
    if len(nse_traj) != len(pe_traj) or not np.allclose(nse_traj.times, pe_traj.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled at different times")
    eps = float(nse_traj.epsilon)
    ref = np.array(pe_traj.coeffs)
    ref[:, 2] *= eps
    diff = nse_traj.coeffs - ref
    grid = nse_traj.grid
    worst = max(div_eps_sup(c, grid, eps) for c in diff)
    if worst > INVARIANT_TOL:
        raise InvariantError(f"difference violates div_eps = 0 ({worst:.3e})")
    meta = {"source": "direct", "div_eps_max": worst}
    return Trajectory(grid, "difference", nse_traj.times, diff, nse_traj.dt, eps, meta)


class PicardDivergenceError(RuntimeError):
    def __init__(self, message: str, factor: float, history: list[float]):
        super().__init__(message)
        self.factor = factor
        self.history = history


@dataclass(frozen=True)
class PicardResult:
    trajectory: Trajectory
    update_norms: list[float]
    contraction_factors: list[float]
    converged: bool
    iterations: int
    log_slope: float | None = None
    segments: int = 1
    meta: dict = field(default_factory=dict)


def _duhamel(g: np.ndarray, base: np.ndarray | None, e_step: np.ndarray, dt: float) -> np.ndarray:
    """
    Trapezoid Duhamel integral I_n = int_0^{t_n} e^{(t_n - s) Delta} g(s) ds on a
    uniform grid, via I_{n+1} = E (I_n + dt/2 g_n) + dt/2 g_{n+1}; ``base`` is added.
    """
    out = np.empty_like(g)
    acc = np.zeros_like(g[0])
    out[0] = acc
    for n in range(len(g) - 1):
        acc = e_step * (acc + 0.5 * dt * g[n]) + 0.5 * dt * g[n + 1]
        out[n + 1] = acc
    if base is not None:
        out += base
    return out


def solve_difference_picard(
    pe_traj: Trajectory,
    eps: float,
    T: float | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    segments: int = 1,
    include_quadratic: bool = True,
    forcing: np.ndarray | None = None,
) -> PicardResult:
    """
    Fixed point of the mild difference system

        Ut(t) = int_0^t e^{(t-s) Delta} P_eps [ -(U.grad Ut + u.grad Ut + U.grad ut) + (0, 0, eps F~) ] ds

    with U = (Ut', Ut3/eps), u = (v, w) and ut = (v, eps w) read from the PE
    trajectory. The update norm is the sup over stored times of the grid
    sup norm. ``forcing`` optionally replaces F~ by given grid values (nt, *dims).
    """
    eps = _check_eps(eps)
    if pe_traj.kind != "hydrostatic":
        raise ValueError("Picard solver needs a hydrostatic PE trajectory")
    grid = pe_traj.grid
    dt = pe_traj.dt
    nt = len(pe_traj) if T is None else step_count(T, dt) + 1
    if nt > len(pe_traj):
        raise ValueError("T exceeds the PE trajectory horizon")
    if segments < 1 or (nt - 1) % segments != 0:
        raise ValueError("segments must divide the number of time steps")

    # frozen PE inputs
    pc = pe_traj.coeffs[:nt]
    u_phys = np.stack([grid.ifft(c) for c in pc])
    utc = np.array(pc)
    utc[:, 2] *= eps
    grad_ut = np.stack([[grid.ifft(c * derivative_symbol(grid, a)) for a in range(3)] for c in utc])
    fvec = np.zeros((nt, 3, *grid.dims), dtype=np.complex128)
    for n in range(nt):
        if forcing is None:
            ft = compute_F_tilde_coeffs(pc[n, :2], pc[n, 2], grid)
        else:
            ft = grid.fft(forcing[n]) * grid.dealias_mask
        fvec[n, 2] = eps * ft
    fvec = np.stack([project_eps_array(f, grid, eps) for f in fvec])
    e_step = heat_symbol(grid, dt)

    def tendency(Uc: np.ndarray, n: int) -> np.ndarray:
        Ut = grid.ifft(Uc)
        U = _velocity_from_scaled(Ut, eps)
        gU = [grid.ifft(Uc * derivative_symbol(grid, a)) for a in range(3)]
        prod = sum(u_phys[n, a] * gU[a] for a in range(3))
        prod += sum(U[a] * grad_ut[n, a] for a in range(3))
        if include_quadratic:
            prod += sum(U[a] * gU[a] for a in range(3))
        nl = grid.fft(prod) * grid.dealias_mask
        return fvec[n] - project_eps_array(nl, grid, eps)

    seg_len = (nt - 1) // segments
    result = np.zeros((nt, 3, *grid.dims), dtype=np.complex128)
    history: list[float] = []
    converged_all = True
    total_iter = 0
    for sgi in range(segments):
        a, b = sgi * seg_len, (sgi + 1) * seg_len + 1
        base = None
        if sgi > 0:
            start = result[a]
            base = np.stack([heat_symbol(grid, j * dt) * start for j in range(b - a)])
        cur = np.zeros((b - a, 3, *grid.dims), dtype=np.complex128) if base is None else base.copy()
        growth = 0
        converged = False
        seg_hist: list[float] = []
        for it in range(1, max_iter + 1):
            g = np.stack([tendency(cur[j], a + j) for j in range(b - a)])
            new = _duhamel(g, base, e_step, dt)
            upd = max(float(np.max(np.abs(grid.ifft(new[j] - cur[j])))) for j in range(b - a))
            seg_hist.append(upd)
            cur = new
            total_iter += 1
            if len(seg_hist) > 1 and upd > seg_hist[-2]:
                growth += 1
                if growth >= 3:
                    factor = upd / seg_hist[-2]
                    raise PicardDivergenceError(
                        f"Picard iteration not contracting at eps={eps} (factor {factor:.3g})",
                        factor, history + seg_hist)
            else:
                growth = 0
            if upd < tol:
                converged = True
                break
        history.extend(seg_hist)
        converged_all = converged_all and converged
        result[a:b] = cur

    factors = [history[i + 1] / history[i] for i in range(len(history) - 1) if history[i] > 0]
    pos = [h for h in history if h > 0]
    slope = float(np.polyfit(np.arange(len(pos)), np.log(pos), 1)[0]) if len(pos) >= 3 else None
    times = pe_traj.times[:nt]
    worst = max(div_eps_sup(c, grid, eps) for c in result)
    meta = {"source": "picard", "iterations": total_iter, "segments": segments, "div_eps_max": worst,
            "converged": converged_all}
    traj = Trajectory(grid, "difference", times, result, dt, eps, meta)
    return PicardResult(traj, history, factors, converged_all, total_iter, slope, segments, meta)


@dataclass(frozen=True)
class NormReport:
    """Fujita-Kato functionals of a difference trajectory."""

    epsilon: float
    q: float
    sup_V: float
    sup_tgradV: float
    sup_eW: float
    sup_tgradeW: float
    sup_W: float
    sup_tgradW: float

    @property
    def total(self) -> float:
        return self.sup_V + self.sup_tgradV + self.sup_eW + self.sup_tgradeW

    def as_dict(self) -> dict:
        return {
            "eps": self.epsilon, "q": self.q,
            "sup_V": self.sup_V, "sup_tgradV": self.sup_tgradV,
            "sup_eW": self.sup_eW, "sup_tgradeW": self.sup_tgradeW,
            "total": self.total, "sup_W": self.sup_W, "sup_tgradW": self.sup_tgradW,
        }


def fujita_kato_report(diff_traj: Trajectory, q: float = 1.0) -> NormReport:
    """
    sup ||V|| + sup t^(1/2) ||grad V|| + sup ||eps W|| + sup t^(1/2) ||eps grad W||
    in L^inf_H L^q; vector and tensor norms use the pointwise Euclidean magnitude.
    """
    if len(diff_traj) == 0:
        raise ValueError("empty trajectory")
    grid = diff_traj.grid
    eps = float(diff_traj.epsilon) if diff_traj.epsilon is not None else 1.0
    terms = np.zeros((len(diff_traj), 4))
    for i, (t, c) in enumerate(zip(diff_traj.times, diff_traj.coeffs)):
        vals = grid.ifft(c)
        grad = gradient_array(c, grid)  # (3 directions, 3 components, ...)
        w = np.sqrt(t)
        terms[i] = (
            linf_h_lq(vals[:2], grid, q),
            w * linf_h_lq(grad[:, :2], grid, q),
            linf_h_lq(vals[2], grid, q),
            w * linf_h_lq(grad[:, 2], grid, q),
        )
    s = terms.max(axis=0)
    return NormReport(eps, q, float(s[0]), float(s[1]), float(s[2]), float(s[3]),
                      float(s[2] / eps), float(s[3] / eps))
