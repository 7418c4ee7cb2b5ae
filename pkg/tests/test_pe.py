import numpy as np
import pytest

from hydrolab.pe import (
    check_w_equation,
    compute_F,
    compute_F_tilde,
    default_initial_v,
    hydrostatic_project,
    pe_rhs,
    reconstruct_w,
    solve_pe,
    step_count,
)
from hydrolab.spectral import PhysicalField, derivative_symbol, make_grid, random_band_limited
from hydrolab.trajectory import HydroState, Trajectory


def admissible_v(grid, rng):
    return hydrostatic_project(PhysicalField(grid, random_band_limited(grid, rng, 2)))


def state_of(v: PhysicalField) -> HydroState:
    return HydroState(v.grid, v.values, reconstruct_w(v).values, 0.0)


class TestReconstructW:
    def test_single_mode(self, grid16):
        x1, _, x3 = grid16.mesh()
        z = np.zeros(grid16.dims)
        w = reconstruct_w(PhysicalField(grid16, np.stack([np.sin(x1) * np.cos(x3), z]))).values
        assert np.max(np.abs(w + np.cos(x1) * np.sin(x3))) < 1e-13

    def test_barotropic_div_free_gives_zero(self, grid16):
        x1, x2, _ = grid16.mesh()
        v = np.stack([np.sin(x2), np.sin(x1)])
        assert np.max(np.abs(reconstruct_w(PhysicalField(grid16, v)).values)) < 1e-14

    def test_divergence_free(self, grid16, rng):
        v = admissible_v(grid16, rng)
        w = reconstruct_w(v).values
        vc = grid16.fft(v.values)
        div = vc[0] * derivative_symbol(grid16, 0) + vc[1] * derivative_symbol(grid16, 1)
        div = div + grid16.fft(w) * derivative_symbol(grid16, 2)
        assert np.max(np.abs(grid16.ifft(div))) < 1e-11
        assert np.max(np.abs(w[:, :, 0])) < 1e-13

    def test_defect_reported(self, grid16):
        x1, _, _ = grid16.mesh()
        v = np.stack([np.sin(x1), np.zeros(grid16.dims)])
        with pytest.raises(ValueError, match="div_H of the vertical mean is 1.000e\\+00"):
            reconstruct_w(PhysicalField(grid16, v))


class TestHydrostaticProject:
    def test_admissible_unchanged(self, grid16, rng):
        v = admissible_v(grid16, rng)
        assert np.max(np.abs(hydrostatic_project(v).values - v.values)) < 1e-13

    def test_barotropic_gradient_removed(self, grid16):
        x1, x2, _ = grid16.mesh()
        # grad_H of phi = sin x1 cos 2 x2
        t = np.stack([np.cos(x1) * np.cos(2 * x2), -2 * np.sin(x1) * np.sin(2 * x2)])
        assert np.max(np.abs(hydrostatic_project(PhysicalField(grid16, t)).values)) < 1e-13

    def test_random_passes_check(self, grid16, rng):
        out = hydrostatic_project(PhysicalField(grid16, random_band_limited(grid16, rng, 2)))
        reconstruct_w(out, tol=1e-12)


class TestRhs:
    def test_zero(self, grid16):
        z = np.zeros(grid16.dims)
        s = HydroState(grid16, np.stack([z, z]), z, 0.0)
        assert np.max(np.abs(pe_rhs(s).values)) == 0

    def test_constant(self, grid16):
        o = np.ones(grid16.dims)
        s = HydroState(grid16, np.stack([o, 2 * o]), 0 * o, 0.0)
        assert np.max(np.abs(pe_rhs(s).values)) < 1e-14

    def test_fine_grid_product_oracle(self, grid16):
        # analytic v, w and derivatives sampled on a 2x finer grid, product transformed there
        def fields(g):
            x1, x2, x3 = g.mesh()
            s1, c1, s2, c2, s3, c3 = np.sin(x1), np.cos(x1), np.sin(x2), np.cos(x2), np.sin(x3), np.cos(x3)
            v = np.stack([s1 * c3, -c1 * s2 * c3])
            w = -(c1 - c1 * c2) * s3
            d1v = np.stack([c1 * c3, s1 * s2 * c3])
            d2v = np.stack([0 * x1, -c1 * c2 * c3])
            d3v = np.stack([-s1 * s3, c1 * s2 * s3])
            return v, w, v[0] * d1v + v[1] * d2v + w * d3v

        fine = make_grid(32, 32)
        _, _, nfine = fields(fine)
        cf = fine.fft(nfine)
        # coarse wavenumbers read off the fine spectrum (fine index of k is k mod 32)
        idx = [np.mod(grid16.k(a).ravel(), 32).astype(int) for a in range(3)]
        coarse = cf[(slice(None), *np.ix_(*idx))]
        oracle = -hydrostatic_project(PhysicalField(grid16, grid16.ifft(coarse))).values
        v, w, _ = fields(grid16)
        got = pe_rhs(HydroState(grid16, v, w, 0.0)).values
        assert np.max(np.abs(got - oracle)) < 1e-13


class TestSolvePE:
    def test_zero(self, grid16):
        tr = solve_pe(PhysicalField(grid16, np.zeros((2, *grid16.dims))), 0.1, 0.05)
        assert np.max(np.abs(tr.coeffs)) == 0
        assert tr.kind == "hydrostatic" and len(tr) == 3

    def test_heat_decay_of_shear_mode(self, grid16):
        _, x2, _ = grid16.mesh()
        v0 = np.stack([0.7 * np.sin(x2), np.zeros(grid16.dims)])
        tr = solve_pe(PhysicalField(grid16, v0), 0.5, 0.05)
        final = tr.values(len(tr) - 1)
        assert np.max(np.abs(final[0] - np.exp(-0.5) * v0[0])) < 1e-13
        assert np.max(np.abs(final[2])) < 1e-14

    def test_self_convergence_order(self, grid16):
        v0 = default_initial_v(grid16)
        finals = [solve_pe(v0, 0.2, dt).coeffs[-1] for dt in (0.02, 0.01, 0.005)]
        e1 = np.max(np.abs(grid16.ifft(finals[0] - finals[1])))
        e2 = np.max(np.abs(grid16.ifft(finals[1] - finals[2])))
        assert np.log2(e1 / e2) >= 1.8

    def test_invariants_energy_and_mean(self, grid16, rng):
        v0 = default_initial_v(grid16).values + 0.3  # add a constant mean flow
        tr = solve_pe(PhysicalField(grid16, v0), 0.3, 0.01)
        assert max(tr.meta["invariants_max"].values()) < 1e-8
        energy = [np.sum(np.abs(c[:2]) ** 2) for c in tr.coeffs]
        assert all(b <= a * (1 + 1e-8) for a, b in zip(energy, energy[1:]))
        drift = np.max(np.abs(tr.coeffs[:, :2, 0, 0, 0] - tr.coeffs[0, :2, 0, 0, 0]))
        assert drift <= 1e-10 * 0.3

    def test_rejects_inadmissible(self, grid16):
        x1, _, _ = grid16.mesh()
        with pytest.raises(ValueError, match="div_H vbar"):
            solve_pe(PhysicalField(grid16, np.stack([np.sin(x1), 0 * x1])), 0.1, 0.05)

    def test_step_count(self):
        assert step_count(0.5, 2.5e-3) == 200
        with pytest.raises(ValueError, match="does not divide"):
            step_count(0.5, 0.3)
        with pytest.raises(ValueError, match="dt must be"):
            step_count(0.5, 0.0)


class TestForcing:
    def test_zero(self, grid16):
        z = np.zeros(grid16.dims)
        s = HydroState(grid16, np.stack([z, z]), z, 0.0)
        assert np.max(np.abs(compute_F(s).values)) == 0
        assert np.max(np.abs(compute_F_tilde(s).values)) == 0

    def test_x3_independent(self, grid16):
        x1, x2, _ = grid16.mesh()
        v = PhysicalField(grid16, np.stack([np.sin(x2) * np.cos(x1), -np.cos(x2) * np.sin(x1)]))
        s = state_of(v)
        assert np.max(np.abs(compute_F(s).values)) < 1e-13
        for form in ("definition", "no_d3"):
            assert np.max(np.abs(compute_F_tilde(s, form).values)) < 1e-13

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_two_forms_agree(self, grid16, seed):
        s = state_of(admissible_v(grid16, np.random.default_rng(seed)))
        a = compute_F_tilde(s, "definition").values
        b = compute_F_tilde(s, "no_d3").values
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))

    def test_unknown_form(self, grid16, rng):
        with pytest.raises(ValueError, match="form must be"):
            compute_F_tilde(state_of(admissible_v(grid16, rng)), "other")


class TestWResidual:
    def test_zero(self, grid16):
        tr = solve_pe(PhysicalField(grid16, np.zeros((2, *grid16.dims))), 0.1, 0.025)
        assert check_w_equation(tr).max_residual == 0

    def test_x3_independent(self, grid16):
        _, x2, _ = grid16.mesh()
        tr = solve_pe(PhysicalField(grid16, np.stack([np.sin(x2), 0 * x2])), 0.1, 0.025)
        assert check_w_equation(tr).max_residual < 1e-14

    def test_second_order_shrink(self, grid16):
        v0 = default_initial_v(grid16)
        r1 = check_w_equation(solve_pe(v0, 0.2, 0.02)).max_residual
        r2 = check_w_equation(solve_pe(v0, 0.2, 0.01)).max_residual
        assert r1 / r2 >= 3.5

    def test_needs_three_samples(self, grid16):
        tr = solve_pe(default_initial_v(grid16), 0.05, 0.05)
        with pytest.raises(ValueError, match="at least 3"):
            check_w_equation(tr)

    def test_needs_hydrostatic(self, grid16):
        tr = Trajectory(grid16, "scaled", np.arange(3) * 0.1, np.zeros((3, 3, *grid16.dims)), 0.1, 0.5)
        with pytest.raises(ValueError, match="hydrostatic"):
            check_w_equation(tr)
