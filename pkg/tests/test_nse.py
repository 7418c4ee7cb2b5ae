import numpy as np
import pytest

from hydrolab.nse import (
    PicardDivergenceError,
    difference_direct,
    fujita_kato_report,
    solve_difference_picard,
    solve_scaled_nse,
)
from hydrolab.pe import default_initial_v, reconstruct_w, solve_pe
from hydrolab.semigroups import projection_matrix
from hydrolab.spectral import PhysicalField, make_grid
from hydrolab.trajectory import Trajectory


def full_u0(grid):
    v0 = default_initial_v(grid)
    return PhysicalField(grid, np.concatenate([v0.values, reconstruct_w(v0).values[None]]))


def leray_nse_reference(u0, T, dt):
    """Plain 3D Navier-Stokes on [-pi, pi)^3 with numpy FFTs, same exponential midpoint rule."""
    n = u0.shape[1]
    k = np.fft.fftfreq(n, 1.0 / n)
    K = np.stack(np.meshgrid(k, k, k, indexing="ij"))
    k2 = np.sum(K**2, axis=0)
    keep = np.all(np.abs(K) <= n // 3, axis=0)
    nyq = np.any(np.abs(K) == n // 2, axis=0)
    dk = [np.where(np.abs(K[a]) == n // 2, 0.0, 1j * K[a]) for a in range(3)]
    inv = np.where(k2 == 0, 0.0, 1.0 / np.where(k2 == 0, 1, k2))

    def leray(c):
        dot = sum(K[a] * c[a] for a in range(3)) * inv
        return np.where(nyq, 0.0, np.stack([c[i] - K[i] * dot for i in range(3)]))

    def rhs(c):
        u = np.fft.ifftn(c, axes=(1, 2, 3)).real
        adv = sum(u[a] * np.fft.ifftn(c * dk[a], axes=(1, 2, 3)).real for a in range(3))
        return -leray(np.fft.fftn(adv, axes=(1, 2, 3)) * keep)

    c = np.where(nyq, 0.0, np.fft.fftn(u0, axes=(1, 2, 3)) * keep)
    e = np.exp(-0.5 * dt * k2)
    for _ in range(int(round(T / dt))):
        mid = e * (c + 0.5 * dt * rhs(c))
        c = e * (e * c + dt * rhs(mid))
    return np.fft.ifftn(c, axes=(1, 2, 3)).real


@pytest.fixture(scope="module")
def pe16():
    g = make_grid(16, 16)
    return solve_pe(default_initial_v(g), 0.1, 0.005)


class TestScaledNSE:
    def test_zero(self, grid16):
        tr = solve_scaled_nse(PhysicalField(grid16, np.zeros((3, *grid16.dims))), 0.3, 0.05, 0.01)
        assert np.max(np.abs(tr.coeffs)) == 0

    def test_eps_range(self, grid16):
        with pytest.raises(ValueError, match="epsilon must lie"):
            solve_scaled_nse(full_u0(grid16), 1.5, 0.1, 0.01)

    def test_divergent_data_rejected(self, grid16):
        x1, _, _ = grid16.mesh()
        u = np.stack([np.sin(x1), 0 * x1, 0 * x1])
        with pytest.raises(ValueError, match="not divergence free"):
            solve_scaled_nse(PhysicalField(grid16, u), 0.5, 0.1, 0.01)

    def test_linear_mode_decay(self, grid16):
        _, _, x3 = grid16.mesh()
        z = 0 * x3
        u0 = np.stack([np.sin(x3), z, z])
        tr = solve_scaled_nse(PhysicalField(grid16, u0), 1.0, 0.4, 0.02)
        assert np.max(np.abs(tr.values(len(tr) - 1)[0] - np.exp(-0.4) * np.sin(x3))) < 1e-13

    def test_matches_independent_leray_solver(self, grid16):
        u0 = full_u0(grid16)
        tr = solve_scaled_nse(u0, 1.0, 0.2, 0.01)
        ref = leray_nse_reference(np.asarray(u0.values), 0.2, 0.01)
        assert np.max(np.abs(tr.values(len(tr) - 1) - ref)) < 1e-10

    def test_self_convergence_order(self, grid16):
        u0 = full_u0(grid16)
        finals = [solve_scaled_nse(u0, 0.3, 0.2, dt).coeffs[-1] for dt in (0.02, 0.01, 0.005)]
        e1 = np.max(np.abs(grid16.ifft(finals[0] - finals[1])))
        e2 = np.max(np.abs(grid16.ifft(finals[1] - finals[2])))
        assert np.log2(e1 / e2) >= 1.8

    def test_div_eps_preserved(self, grid16):
        tr = solve_scaled_nse(full_u0(grid16), 0.1, 0.1, 0.01)
        assert tr.meta["div_eps_max"] < 1e-11
        assert tr.kind == "scaled" and tr.epsilon == 0.1


class TestDifferenceDirect:
    def test_identical_gives_zero(self, grid16):
        z = np.zeros((3, 3, *grid16.dims))
        a = Trajectory(grid16, "scaled", np.arange(3) * 0.1, z, 0.1, 0.5)
        b = Trajectory(grid16, "hydrostatic", np.arange(3) * 0.1, z, 0.1)
        assert np.max(np.abs(difference_direct(a, b).coeffs)) == 0

    def test_starts_at_zero(self, grid16, pe16):
        nse = solve_scaled_nse(full_u0(grid16), 1.0, 0.1, 0.005)
        d = difference_direct(nse, pe16)
        assert np.max(np.abs(d.coeffs[0])) < 1e-15
        assert np.max(np.abs(d.coeffs[-1])) > 1e-4

    def test_mismatch_rejected(self, grid16, pe16):
        nse = solve_scaled_nse(full_u0(grid16), 1.0, 0.1, 0.01)
        with pytest.raises(ValueError, match="different times"):
            difference_direct(nse, pe16)
        with pytest.raises(ValueError, match="expected a scaled"):
            difference_direct(pe16, pe16)


class TestPicard:
    def zero_pe(self, grid, T=0.5, dt=0.01):
        return solve_pe(PhysicalField(grid, np.zeros((2, *grid.dims))), T, dt)

    def test_trivial_fixed_point(self, grid16):
        pe = self.zero_pe(grid16, 0.1, 0.05)
        res = solve_difference_picard(pe, 0.5, forcing=np.zeros((len(pe), *grid16.dims)))
        assert res.iterations == 1 and res.converged
        assert np.max(np.abs(res.trajectory.coeffs)) == 0

    def test_closed_form_duhamel(self, grid16):
        eps = 0.5
        x1, _, x3 = grid16.mesh()
        errs = []
        for dt in (0.02, 0.01):
            pe = self.zero_pe(grid16, 0.5, dt)
            f = np.broadcast_to(np.cos(x1 + x3), (len(pe), *grid16.dims))
            res = solve_difference_picard(pe, eps, forcing=np.array(f), include_quadratic=False)
            # int_0^t e^{-2(t-s)} ds P_eps (0, 0, eps) cos(x1 + x3)
            col = projection_matrix((1, 0, 1), eps) @ np.array([0, 0, eps])
            t = pe.times[-1]
            exact = col[:, None, None, None] * (1 - np.exp(-2 * t)) / 2 * np.cos(x1 + x3)
            errs.append(np.max(np.abs(res.trajectory.values(len(pe) - 1) - exact)))
        assert errs[1] < 1e-4
        assert np.log2(errs[0] / errs[1]) > 1.9

    def test_agrees_with_direct(self, grid16, pe16):
        eps = 0.5
        nse = solve_scaled_nse(full_u0(grid16), eps, 0.1, 0.005)
        direct = fujita_kato_report(difference_direct(nse, pe16)).total
        res = solve_difference_picard(pe16, eps)
        picard = fujita_kato_report(res.trajectory).total
        assert res.converged
        assert abs(picard - direct) / direct <= 0.05
        assert res.trajectory.meta["div_eps_max"] < 1e-11

    def test_geometric_convergence(self, pe16):
        res = solve_difference_picard(pe16, 0.2)
        assert res.log_slope is not None and res.log_slope < 0
        assert all(f < 1 for f in res.contraction_factors)

    def test_segments_match_single(self, pe16):
        a = solve_difference_picard(pe16, 0.2).trajectory.coeffs
        b = solve_difference_picard(pe16, 0.2, segments=2).trajectory.coeffs
        assert np.max(np.abs(a - b)) < 1e-9

    def test_segments_must_divide(self, pe16):
        with pytest.raises(ValueError, match="segments must divide"):
            solve_difference_picard(pe16, 0.2, segments=3)

    def test_needs_hydrostatic(self, grid16):
        tr = Trajectory(grid16, "scaled", np.arange(3) * 0.1, np.zeros((3, 3, *grid16.dims)), 0.1, 0.5)
        with pytest.raises(ValueError, match="hydrostatic"):
            solve_difference_picard(tr, 0.5)

    def test_divergence_reported(self, grid16):
        pe = self.zero_pe(grid16, 0.5, 0.05)
        x1, _, x3 = grid16.mesh()
        f = np.broadcast_to(4e4 * np.sin(x1) * np.cos(x3), (len(pe), *grid16.dims))
        with pytest.raises(PicardDivergenceError, match="not contracting") as info:
            solve_difference_picard(pe, 1.0, forcing=np.array(f), max_iter=30)
        assert info.value.factor > 1


class TestFujitaKato:
    def test_zero(self, grid16):
        tr = Trajectory(grid16, "difference", np.arange(3) * 0.1, np.zeros((3, 3, *grid16.dims)), 0.1, 0.5)
        assert fujita_kato_report(tr).total == 0

    def test_homogeneous(self, grid16, pe16):
        d = solve_difference_picard(pe16, 0.3).trajectory
        a, b = fujita_kato_report(d), fujita_kato_report(d.scaled_by(3.0))
        assert b.total == pytest.approx(3 * a.total, rel=1e-12)

    def test_single_mode_weights(self, grid16):
        times = np.linspace(0, 1, 11)
        x1, _, _ = grid16.mesh()
        c = np.zeros((11, 3, *grid16.dims), dtype=complex)
        for i, t in enumerate(times):
            c[i, 0] = grid16.fft(np.exp(-t) * np.cos(x1))
            c[i, 2] = grid16.fft(0.1 * np.exp(-t) * np.cos(x1))
        rep = fujita_kato_report(Trajectory(grid16, "difference", times, c, 0.1, 0.1))
        w = max(np.sqrt(t) * np.exp(-t) for t in times)
        assert rep.sup_V == pytest.approx(2 * np.pi, rel=1e-12)
        assert rep.sup_tgradV == pytest.approx(2 * np.pi * w, rel=1e-12)
        assert rep.sup_eW == pytest.approx(0.2 * np.pi, rel=1e-12)
        assert rep.sup_W == pytest.approx(2 * np.pi, rel=1e-12)
        assert rep.as_dict()["total"] == pytest.approx(rep.total)
