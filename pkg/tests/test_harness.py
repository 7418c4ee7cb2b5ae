import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hydrolab import estimates as est
from hydrolab import harness
from hydrolab.harness import (
    SWEEP_COLUMNS,
    RunConfig,
    SweepError,
    fit_rate,
    load_config,
    parse_config_text,
    rate_svg,
    read_sweep_csv,
    run_certify,
    run_diff_sweep,
    run_simulate_nse,
    run_simulate_pe,
    run_w_residual,
)
from hydrolab.trajectory import load_trajectory

SMALL = dict(n_h=16, n_v=16, T=0.1, dt=0.01, solver="direct")


def small_cfg(tmp_path, **kw):
    return RunConfig(**{**SMALL, "out": str(tmp_path), **kw})


class TestFitRate:
    def test_linear(self):
        slope, _, r2 = fit_rate([(e, 3 * e) for e in (0.4, 0.2, 0.1, 0.05)])
        assert slope == pytest.approx(1.0, abs=1e-12) and r2 == pytest.approx(1.0, abs=1e-12)

    def test_quadratic(self):
        slope, intercept, _ = fit_rate([(e, 2 * e**2) for e in (0.4, 0.2, 0.1)])
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(2), abs=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            fit_rate([(0.1, 0.0), (0.2, 1.0)])

    def test_needs_two(self):
        with pytest.raises(ValueError, match="at least two"):
            fit_rate([(0.1, 1.0)])


class TestConfig:
    def test_parse(self):
        vals = parse_config_text("# comment\ngrid = 16x8\neps = 0.4, 0.2\nT = 0.2  # horizon\nsuite = P2.1,INTERP\n")
        assert vals == {"n_h": 16, "n_v": 8, "eps": (0.4, 0.2), "T": 0.2, "suite": ("P2.1", "INTERP")}

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown key 'colour'"):
            parse_config_text("colour = red")

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config_text("T = 1\nnonsense")

    def test_file_and_overrides(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("grid = 16\ndt = 0.01\nT = 0.1\nseed = 3\n")
        cfg = load_config(p, seed=5, q=None)
        assert (cfg.n_h, cfg.n_v, cfg.seed, cfg.q) == (16, 16, 5, 1.0)

    def test_checkpoint_key_sets_preset(self):
        assert parse_config_text("checkpoint = a.npz")["preset"] == "checkpoint"

    @pytest.mark.parametrize("kw,msg", [
        ({"eps": (0.1, 0.2)}, "strictly decreasing"),
        ({"eps": (1.5,)}, "lie in"),
        ({"dt": 0.03}, "does not divide"),
        ({"mode": "plot"}, "mode must be"),
        ({"q": 0.5}, "q must be"),
        ({"preset": "checkpoint"}, "needs a checkpoint"),
    ])
    def test_invalid(self, kw, msg):
        with pytest.raises(ValueError, match=msg):
            RunConfig(**{**SMALL, **kw})

    def test_defaults_are_desk_profile(self):
        cfg = RunConfig()
        assert (cfg.n_h, cfg.n_v, cfg.T, cfg.dt, cfg.q) == (24, 24, 0.5, 2.5e-3, 1.0)
        assert cfg.eps == (0.4, 0.2, 0.1, 0.05, 0.025)


class TestDiffSweep:
    def test_outputs(self, tmp_path):
        rep = run_diff_sweep(small_cfg(tmp_path, eps=(0.4, 0.2, 0.1)))
        assert [r["eps"] for r in rep.rows] == [0.1, 0.2, 0.4]
        assert rep.slope is not None and np.isfinite(rep.slope)
        rows = read_sweep_csv(tmp_path / "sweep.csv")
        assert rows == rep.rows
        assert (tmp_path / "sweep.csv").read_text().splitlines()[0] == ",".join(SWEEP_COLUMNS)
        body = json.loads((tmp_path / "sweep.json").read_text())
        assert "generated_at" in body["header"] and body["fit"]["slope"] == rep.slope
        ET.fromstring((tmp_path / "rate.svg").read_text())
        assert load_trajectory(tmp_path / "checkpoints" / "pe.npz").kind == "hydrostatic"

    def test_single_eps(self, tmp_path):
        rep = run_diff_sweep(small_cfg(tmp_path, eps=(0.3,)))
        assert rep.slope is None and len(rep.rows) == 1
        assert json.loads((tmp_path / "sweep.json").read_text())["fit"]["slope"] is None

    def test_zero_data(self, tmp_path):
        rep = run_diff_sweep(small_cfg(tmp_path, eps=(0.4, 0.2), preset="zero", solver="both"))
        assert all(r["total"] == 0 for r in rep.rows)
        assert rep.slope is None

    def test_bit_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_diff_sweep(small_cfg(a, eps=(0.4, 0.2)))
        run_diff_sweep(small_cfg(b, eps=(0.4, 0.2), jobs=2))
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
        assert (a / "rate.svg").read_bytes() == (b / "rate.svg").read_bytes()
        ja = (a / "sweep.json").read_text().splitlines()
        jb = (b / "sweep.json").read_text().splitlines()
        assert ja[1].startswith('  "header"') and ja[2:] == jb[2:]

    def test_both_solvers_agree(self, tmp_path):
        rep = run_diff_sweep(small_cfg(tmp_path, eps=(0.5,), solver="both"))
        row = rep.per_eps[0]
        assert row["picard_converged"] and row["relative_gap"] < 0.05
        assert rep.metadata["eps0_lower_estimate"] == 0.5

    def test_checkpoint_preset(self, tmp_path):
        run_diff_sweep(small_cfg(tmp_path / "first", eps=(0.4,)))
        ck = tmp_path / "first" / "checkpoints" / "pe.npz"
        rep = run_diff_sweep(small_cfg(tmp_path / "second", eps=(0.4,), preset="checkpoint", checkpoint=str(ck)))
        assert rep.rows[0]["total"] > 0

    def test_failure_annotated_and_partial(self, tmp_path, monkeypatch):
        real = harness.solve_scaled_nse

        def flaky(u0, eps, *a, **k):
            if eps == 0.2:
                raise RuntimeError("boom")
            return real(u0, eps, *a, **k)

        monkeypatch.setattr(harness, "solve_scaled_nse", flaky)
        with pytest.raises(SweepError, match="eps=0.2: RuntimeError: boom") as info:
            run_diff_sweep(small_cfg(tmp_path, eps=(0.4, 0.2)))
        assert [r["eps"] for r in info.value.report.rows] == [0.4]
        assert [r["eps"] for r in read_sweep_csv(tmp_path / "sweep.csv")] == [0.4]

    def test_eps0_bisection_reported(self, tmp_path):
        rep = run_diff_sweep(small_cfg(tmp_path, eps=(0.5,), solver="both", bisect_steps=1))
        bis = rep.metadata["eps0_bisection"]
        assert bis["contracting"] >= 0.5


class TestSvg:
    def test_empty(self):
        ET.fromstring(rate_svg([], None))

    def test_points_and_line(self):
        pairs = [(0.4, 0.1), (0.1, 0.02)]
        svg = rate_svg(pairs, fit_rate(pairs))
        root = ET.fromstring(svg)
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f"{ns}circle")) == 2 and len(root.findall(f"{ns}line")) == 1


class TestCertify:
    def test_prop22_suite(self, tmp_path):
        res = run_certify(small_cfg(tmp_path, suite=("P2.2-1", "P2.2-2", "P2.2-3", "P2.2-4")))
        assert len(res) == 4 and all(c.verdict for c in res.values())
        assert sorted(p.name for p in (tmp_path / "certificates").glob("*.json")) == [
            "P2.2-1.json", "P2.2-2.json", "P2.2-3.json", "P2.2-4.json"]
        lines = (tmp_path / "certificates" / "certificates.csv").read_text().splitlines()
        assert lines[0] == ",".join(harness.CERT_COLUMNS) and len(lines) == 1 + 4 * 144

    def test_interp_both_modes(self, tmp_path):
        res = run_certify(small_cfg(tmp_path, suite=("INTERP",)))
        assert not res["INTERP-paper"].verdict and res["INTERP-corrected"].verdict

    def test_empty_suite(self, tmp_path):
        assert run_certify(small_cfg(tmp_path, suite=())) == {}
        assert list((tmp_path / "certificates").glob("*.json")) == []

    def test_failure_does_not_abort(self, tmp_path, monkeypatch):
        def broken(**kw):
            raise RuntimeError("no")

        monkeypatch.setattr(est, "certify_smoothing", broken)
        res = run_certify(small_cfg(tmp_path, suite=("P2.1", "P2.2-1")))
        assert not res["P2.1"].verdict and "RuntimeError" in res["P2.1"].details["error"]
        assert res["P2.2-1"].verdict

    def test_unknown_id(self, tmp_path):
        with pytest.raises(ValueError, match="unknown certificate id"):
            run_certify(small_cfg(tmp_path, suite=("P9.9",)))

    def test_deterministic(self, tmp_path):
        for d in ("a", "b"):
            run_certify(small_cfg(tmp_path / d, suite=("P2.3",), seed=4))
        a = (tmp_path / "a" / "certificates" / "P2.3.json").read_text().splitlines()
        b = (tmp_path / "b" / "certificates" / "P2.3.json").read_text().splitlines()
        assert a[2:] == b[2:]


class TestSimulations:
    def test_simulate_pe(self, tmp_path):
        body = run_simulate_pe(small_cfg(tmp_path))
        assert body["samples"] == 11
        assert load_trajectory(tmp_path / body["checkpoint"]).kind == "hydrostatic"

    def test_simulate_nse(self, tmp_path):
        body = run_simulate_nse(small_cfg(tmp_path, eps=(0.5, 0.1)))
        assert [r["eps"] for r in body["runs"]] == [0.5, 0.1]
        tr = load_trajectory(tmp_path / body["runs"][1]["checkpoint"])
        assert tr.kind == "scaled" and tr.epsilon == 0.1

    def test_w_residual(self, tmp_path):
        body = run_w_residual(small_cfg(tmp_path, T=0.2, dt=0.02))
        assert body["passes_3_5x"] and body["max_ratio"] >= 3.5
