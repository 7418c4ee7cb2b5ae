"""
Batch front-end: run configuration, eps-sweeps of the hydrostatic error,
log-log rate fitting, certificate campaigns and report emission.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import estimates as est
from .nse import (
    PicardDivergenceError,
    difference_direct,
    fujita_kato_report,
    solve_difference_picard,
    solve_scaled_nse,
)
from .pe import check_w_equation, default_initial_v, reconstruct_w, solve_pe
from .spectral import Grid, PhysicalField, make_grid
from .trajectory import Trajectory, load_trajectory, save_trajectory

log = logging.getLogger(__name__)

MODES = ("simulate-pe", "simulate-nse", "diff-sweep", "certify", "w-residual")
SWEEP_COLUMNS = ("eps", "sup_V", "sup_tgradV", "sup_eW", "sup_tgradeW", "total")
CERT_COLUMNS = ("certificate", "inequality_id", "verdict", "point", "params", "ratio")


@dataclass(frozen=True)
class RunConfig:
    """Run parameters; see README for the key=value file format."""

    n_h: int = 24
    n_v: int = 24
    T: float = 0.5
    dt: float = 2.5e-3
    q: float = 1.0
    eps: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05, 0.025)
    preset: str = "default"
    checkpoint: str | None = None
    seed: int = 0
    out: str = "out"
    mode: str = "diff-sweep"
    jobs: int = 1
    solver: str = "both"
    segments: int = 1
    suite: tuple[str, ...] | None = None
    save: str = "pe"
    bisect_steps: int = 0

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if any(not 0 < e <= 1 for e in eps):
            raise ValueError("eps values must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be strictly decreasing")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.solver not in ("both", "direct", "picard"):
            raise ValueError("solver must be both, direct or picard")
        if self.preset not in ("default", "zero", "checkpoint"):
            raise ValueError("preset must be default, zero or checkpoint")
        if self.preset == "checkpoint" and not self.checkpoint:
            raise ValueError("preset=checkpoint needs a checkpoint path")
        if self.save not in ("none", "pe", "all"):
            raise ValueError("save must be none, pe or all")
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 4 * np.finfo(float).eps * max(self.T, 1.0) * n:
            raise ValueError(f"dt={self.dt!r} does not divide T={self.T!r}")
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def grid(self) -> Grid:
        return make_grid(self.n_h, self.n_v)


def _parse_grid(text: str) -> tuple[int, int]:
    parts = text.lower().replace("^3", "").split("x")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    if len(parts) == 3 and parts[0] == parts[1]:
        return int(parts[0]), int(parts[2])
    raise ValueError(f"cannot parse grid {text!r}")


def _parse_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


CONFIG_KEYS = {
    "grid": lambda v: dict(zip(("n_h", "n_v"), _parse_grid(v))),
    "n_h": lambda v: {"n_h": int(v)},
    "n_v": lambda v: {"n_v": int(v)},
    "T": lambda v: {"T": float(v)},
    "dt": lambda v: {"dt": float(v)},
    "q": lambda v: {"q": float(v)},
    "eps": lambda v: {"eps": tuple(float(x) for x in _parse_list(v))},
    "preset": lambda v: {"preset": v},
    "checkpoint": lambda v: {"checkpoint": v, "preset": "checkpoint"},
    "seed": lambda v: {"seed": int(v)},
    "out": lambda v: {"out": v},
    "mode": lambda v: {"mode": v},
    "jobs": lambda v: {"jobs": int(v)},
    "solver": lambda v: {"solver": v},
    "segments": lambda v: {"segments": int(v)},
    "suite": lambda v: {"suite": _parse_list(v)},
    "save": lambda v: {"save": v},
    "bisect_steps": lambda v: {"bisect_steps": int(v)},
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values.update(CONFIG_KEYS[key](val))
    return values


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# fitting and emission

def fit_rate(pairs) -> tuple[float, float, float]:
    """Least squares of log(value) on log(eps): (slope, intercept, r^2)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (eps, value) pairs")
    eps = np.array([p[0] for p in pairs], dtype=float)
    val = np.array([p[1] for p in pairs], dtype=float)
    if np.any(eps <= 0) or np.any(val <= 0):
        raise ValueError("eps and values must be positive")
    x, y = np.log(eps), np.log(val)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def dumps_with_header(body: dict, header: dict) -> str:
    """JSON text whose run-dependent fields all sit on the second line."""
    inner = json.dumps(body, indent=2)
    head = json.dumps(header, sort_keys=True)
    if inner == "{}":
        return "{\n  \"header\": " + head + "\n}\n"
    return "{\n  \"header\": " + head + ",\n" + inner[2:] + "\n"


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if not isinstance(r[c], float) else repr(r[c]) for c in columns])
    path.write_text(buf.getvalue())


def read_sweep_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != SWEEP_COLUMNS:
        raise ValueError("unexpected sweep.csv columns")
    return [{k: float(v) for k, v in r.items()} for r in rows]


def rate_svg(pairs, fit: tuple[float, float, float] | None, title: str = "hydrostatic error vs eps") -> str:
    """Static log-log plot with data points and the fitted line."""
    W, H, L, R, TOP, BOT = 480, 360, 70, 20, 30, 50
    pairs = [(e, v) for e, v in pairs if e > 0 and v > 0]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>']
    if not pairs:
        lines.append(f'<text x="{W / 2:.1f}" y="{H / 2:.1f}" text-anchor="middle">no positive data</text>')
        return "\n".join(lines + ["</svg>"]) + "\n"
    lx = [math.log10(e) for e, _ in pairs]
    ly = [math.log10(v) for _, v in pairs]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x: float) -> float:
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def py(y: float) -> float:
        return H - BOT - (y - y0) / (y1 - y0) * (H - TOP - BOT)

    lines.append(f'<rect x="{L}" y="{TOP}" width="{W - L - R}" height="{H - TOP - BOT}" fill="none" stroke="black"/>')
    for d in range(x0, x1 + 1):
        lines.append(f'<text x="{px(d):.1f}" y="{H - BOT + 16}" text-anchor="middle" font-size="11">1e{d}</text>')
    for d in range(y0, y1 + 1):
        lines.append(f'<text x="{L - 6}" y="{py(d) + 4:.1f}" text-anchor="end" font-size="11">1e{d}</text>')
    lines.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12">eps</text>')
    lines.append(f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {H / 2:.1f})">Fujita-Kato total</text>')
    if fit is not None:
        slope, intercept, r2 = fit
        xa, xb = min(lx), max(lx)
        ya = (slope * xa * math.log(10) + intercept) / math.log(10)
        yb = (slope * xb * math.log(10) + intercept) / math.log(10)
        lines.append(f'<line x1="{px(xa):.2f}" y1="{py(ya):.2f}" x2="{px(xb):.2f}" y2="{py(yb):.2f}" '
                     f'stroke="steelblue" stroke-width="1.5"/>')
        lines.append(f'<text x="{L + 8}" y="{TOP + 16}" font-size="11">slope {slope:.3f}, r2 {r2:.4f}</text>')
    for x, y in zip(lx, ly):
        lines.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3.5" fill="crimson"/>')
    return "\n".join(lines + ["</svg>"]) + "\n"


# ---------------------------------------------------------------------------
# simulations

def initial_velocity(cfg: RunConfig) -> PhysicalField:
    if cfg.preset == "checkpoint":
        traj = load_trajectory(cfg.checkpoint)
        if traj.kind != "hydrostatic":
            raise ValueError("initial-data checkpoint must be a hydrostatic trajectory")
        vals = traj.values(len(traj) - 1)
        return PhysicalField(traj.grid, vals[:2])
    grid = cfg.grid
    if cfg.preset == "zero":
        return PhysicalField(grid, np.zeros((2, *grid.dims)))
    return default_initial_v(grid)


def full_initial_velocity(v0: PhysicalField) -> PhysicalField:
    w0 = reconstruct_w(v0)
    return PhysicalField(v0.grid, np.concatenate([v0.values, w0.values[None]]))


@dataclass
class EpsResult:
    eps: float
    direct: dict | None = None
    picard: dict | None = None
    picard_iterations: int | None = None
    picard_converged: bool | None = None
    picard_contraction: list[float] = field(default_factory=list)
    picard_log_slope: float | None = None
    relative_gap: float | None = None
    error: str | None = None
    seconds: float = 0.0


def _sweep_job(args) -> EpsResult:
    pe_path, eps, cfg_dict = args
    cfg = RunConfig(**cfg_dict)
    pe = load_trajectory(pe_path)
    return sweep_one(pe, eps, cfg)


def sweep_one(pe: Trajectory, eps: float, cfg: RunConfig) -> EpsResult:
    res = EpsResult(eps)
    start = time.perf_counter()
    try:
        if cfg.solver in ("both", "direct"):
            u0 = full_initial_velocity(PhysicalField(pe.grid, pe.values(0)[:2]))
            nse = solve_scaled_nse(u0, eps, cfg.T, cfg.dt, store_every=int(round(pe.dt / cfg.dt)))
            if cfg.save == "all":
                save_trajectory(nse, Path(cfg.out) / "checkpoints" / f"nse_eps{eps!r}.npz")
            res.direct = fujita_kato_report(difference_direct(nse, pe), cfg.q).as_dict()
        if cfg.solver in ("both", "picard"):
            # Picard failure is fatal only when it is the sole solver
            try:
                pr = solve_difference_picard(pe, eps, segments=cfg.segments)
                res.picard = fujita_kato_report(pr.trajectory, cfg.q).as_dict()
                res.picard_iterations = pr.iterations
                res.picard_converged = pr.converged
                res.picard_contraction = pr.contraction_factors
                res.picard_log_slope = pr.log_slope
            except PicardDivergenceError as exc:
                res.picard_converged = False
                res.picard_contraction = [exc.factor]
                if cfg.solver == "picard":
                    raise
        if res.direct and res.picard and res.direct["total"] > 0:
            res.relative_gap = abs(res.picard["total"] - res.direct["total"]) / res.direct["total"]
    except Exception as exc:  # annotated and re-raised by the caller after partial output
        res.error = f"eps={eps!r}: {type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - start
    return res


def picard_contracts(pe: Trajectory, eps: float, segments: int = 1) -> bool:
    try:
        return solve_difference_picard(pe, eps, segments=segments).converged
    except PicardDivergenceError:
        return False


def bisect_eps0(pe: Trajectory, lo: float, hi: float = 1.0, steps: int = 4, segments: int = 1) -> tuple[float, float | None]:
    """
    Bracket the largest eps at which Picard contracts, starting from a known
    contracting ``lo``. Returns (largest contracting, smallest failing or None).
    """
    if picard_contracts(pe, hi, segments):
        return hi, None
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if picard_contracts(pe, mid, segments):
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass(frozen=True)
class SweepReport:
    rows: list[dict]
    slope: float | None
    intercept: float | None
    r2: float | None
    per_eps: list[dict]
    metadata: dict

    def body(self) -> dict:
        return {"rows": self.rows, "fit": {"slope": self.slope, "intercept": self.intercept, "r2": self.r2},
                "per_eps": self.per_eps, "metadata": self.metadata}


class SweepError(RuntimeError):
    def __init__(self, message: str, report: SweepReport):
        super().__init__(message)
        self.report = report


def run_diff_sweep(cfg: RunConfig, write: bool = True) -> SweepReport:
    """Solve the PE once, then the difference system for each eps; fit the rate."""
    start = time.perf_counter()
    out = Path(cfg.out)
    if write:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    v0 = initial_velocity(cfg)
    pe = solve_pe(v0, cfg.T, cfg.dt)
    pe_path = out / "checkpoints" / "pe.npz"
    if write and cfg.save in ("pe", "all") or cfg.jobs > 1:
        pe_path.parent.mkdir(parents=True, exist_ok=True)
        save_trajectory(pe, pe_path)
    if cfg.jobs > 1 and len(cfg.eps) > 1:
        cfg_dict = {k: v for k, v in asdict(cfg).items()}
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_job, [(str(pe_path), e, cfg_dict) for e in cfg.eps]))
    else:
        results = [sweep_one(pe, e, cfg) for e in cfg.eps]
    results.sort(key=lambda r: r.eps)

    primary = "direct" if cfg.solver in ("both", "direct") else "picard"
    rows = []
    for r in results:
        rep = getattr(r, primary)
        if rep is not None:
            rows.append({c: rep[c] for c in SWEEP_COLUMNS})
    pairs = [(r["eps"], r["total"]) for r in rows if r["total"] > 0]
    fit = fit_rate(pairs) if len(pairs) >= 2 else None
    contracting = [r.eps for r in results if r.picard_converged]
    meta = {
        "grid": [cfg.n_h, cfg.n_h, cfg.n_v], "T": cfg.T, "dt": cfg.dt, "q": cfg.q, "preset": cfg.preset,
        "solver": cfg.solver, "primary": primary, "segments": cfg.segments, "seed": cfg.seed,
        "pe_invariants_max": pe.meta.get("invariants_max"),
        "eps0_lower_estimate": max(contracting) if contracting else None,
    }
    if cfg.bisect_steps > 0 and contracting:
        lo, hi = bisect_eps0(pe, max(contracting), 1.0, cfg.bisect_steps, cfg.segments)
        meta["eps0_bisection"] = {"contracting": lo, "failing": hi, "steps": cfg.bisect_steps}
    per_eps = [{k: v for k, v in asdict(r).items() if k != "seconds"} for r in results]
    report = SweepReport(rows, *(fit if fit else (None, None, None)), per_eps, meta)
    if write:
        header = {"generated_at": _timestamp(), "wall_seconds": round(time.perf_counter() - start, 3)}
        write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
        (out / "sweep.json").write_text(dumps_with_header(report.body(), header))
        (out / "rate.svg").write_text(rate_svg([(r["eps"], r["total"]) for r in rows], fit))
    errors = [r.error for r in results if r.error]
    if errors:
        raise SweepError("; ".join(errors), report)
    return report


def run_simulate_pe(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    pe = solve_pe(initial_velocity(cfg), cfg.T, cfg.dt)
    save_trajectory(pe, out / "checkpoints" / "pe.npz")
    from .aniso import AnisoNormSpec, trajectory_functionals

    tf = trajectory_functionals(pe, AnisoNormSpec(q=cfg.q))
    body = {"kind": "hydrostatic", "grid": list(pe.grid.dims), "T": cfg.T, "dt": cfg.dt, "samples": len(pe),
            "invariants_max": pe.meta["invariants_max"], "Y_T": tf.y_value, "X": tf.x_value,
            "checkpoint": "checkpoints/pe.npz"}
    (out / "simulate_pe.json").write_text(dumps_with_header(body, {"generated_at": _timestamp()}))
    return body


def run_simulate_nse(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    u0 = full_initial_velocity(initial_velocity(cfg))
    runs = []
    for eps in cfg.eps:
        traj = solve_scaled_nse(u0, eps, cfg.T, cfg.dt)
        name = f"checkpoints/nse_eps{eps!r}.npz"
        save_trajectory(traj, out / name)
        runs.append({"eps": eps, "samples": len(traj), "div_eps_max": traj.meta["div_eps_max"], "checkpoint": name})
    body = {"kind": "scaled", "grid": [cfg.n_h, cfg.n_h, cfg.n_v], "T": cfg.T, "dt": cfg.dt, "runs": runs}
    (out / "simulate_nse.json").write_text(dumps_with_header(body, {"generated_at": _timestamp()}))
    return body


def run_w_residual(cfg: RunConfig) -> dict:
    """Residual of the w-equation along PE runs at dt and dt/2."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    v0 = initial_velocity(cfg)
    reports = []
    for dt in (cfg.dt, cfg.dt / 2):
        rep = check_w_equation(solve_pe(v0, cfg.T, dt))
        reports.append({"dt": dt, "max_residual": rep.max_residual, "l2_residual": rep.l2_residual})
    ratio = reports[0]["max_residual"] / reports[1]["max_residual"] if reports[1]["max_residual"] > 0 else None
    body = {"grid": [cfg.n_h, cfg.n_h, cfg.n_v], "T": cfg.T, "runs": reports, "max_ratio": ratio,
            "passes_3_5x": bool(ratio is not None and ratio >= 3.5)}
    (out / "w_residual.json").write_text(dumps_with_header(body, {"generated_at": _timestamp()}))
    return body


# ---------------------------------------------------------------------------
# certificate campaigns

def _certificate_jobs(ids, cfg: RunConfig):
    pe_cache: dict = {}

    def pe_traj():
        if "pe" not in pe_cache:
            pe_cache["pe"] = est.reference_pe_trajectory()
        return pe_cache["pe"]

    for cid in ids:
        if cid.startswith("P2.2-"):
            k = int(cid.split("-")[1])
            yield cid, lambda k=k: est.certify_integral_inequality(k)
        elif cid == "P2.1":
            yield cid, lambda: est.certify_smoothing(seed=cfg.seed)
        elif cid == "P2.3":
            yield cid, lambda: est.certify_composite(seed=cfg.seed, q=cfg.q)
        elif cid == "P2.3-REMARK":
            yield cid, est.certify_nonuniform_remark
        elif cid == "P3.1":
            yield cid, lambda: est.certify_sup_bound(1000, q=cfg.q, seed=cfg.seed)
        elif cid == "P3.2":
            yield cid, lambda: est.certify_nonlinear_bound("P3.2", seed=cfg.seed, q=cfg.q)
        elif cid == "P3.4":
            for w in ("P3.4a", "P3.4b"):
                yield w, lambda w=w: est.certify_nonlinear_bound(w, seed=cfg.seed, q=cfg.q)
        elif cid == "P3.6":
            for w in ("P3.6-10", "P3.6-15"):
                for a in (0, 1):
                    yield f"{w}-a{a}", lambda w=w, a=a: est.certify_forcing_bound(w, a, pe_traj=pe_traj(), q=cfg.q)
        elif cid == "P3.7":
            for a in (0, 1):
                yield f"P3.7-a{a}", lambda a=a: est.certify_forcing_bound("P3.7", a, pe_traj=pe_traj(), q=cfg.q)
        elif cid == "INTERP":
            for m in ("paper", "corrected"):
                yield f"INTERP-{m}", lambda m=m: est.certify_interpolation(exponent_mode=m, seed=cfg.seed, q=cfg.q)
        else:
            raise ValueError(f"unknown certificate id {cid!r}")


def run_certify(cfg: RunConfig, write: bool = True) -> dict[str, est.EstimateCertificate]:
    """Run the selected suite; one failing certificate does not stop the others."""
    ids = est.CERTIFICATE_IDS if cfg.suite is None else cfg.suite
    for cid in ids:
        if cid not in est.CERTIFICATE_IDS:
            raise ValueError(f"unknown certificate id {cid!r}")
    results: dict[str, est.EstimateCertificate] = {}
    for name, job in _certificate_jobs(ids, cfg):
        try:
            results[name] = job()
        except Exception as exc:
            log.warning("certificate %s failed: %s", name, exc)
            cid = next(c for c in est.CERTIFICATE_IDS[::-1] if name.startswith(c))
            results[name] = est.EstimateCertificate(cid, {}, float("nan"), False, [], cfg.seed,
                                                    {"error": f"{type(exc).__name__}: {exc}"})
    if write:
        cdir = Path(cfg.out) / "certificates"
        cdir.mkdir(parents=True, exist_ok=True)
        rows = []
        for name, cert in results.items():
            rec = cert.to_record()
            (cdir / f"{name}.json").write_text(dumps_with_header(rec, {"generated_at": _timestamp()}))
            for i, pt in enumerate(cert.points):
                ratio = next((pt[k] for k in ("ratio", "value", "constant") if k in pt), float("nan"))
                params = {k: v for k, v in pt.items() if k not in ("ratio", "value", "constant")}
                rows.append({"certificate": name, "inequality_id": cert.inequality_id,
                             "verdict": rec["verdict"], "point": i, "params": json.dumps(params, sort_keys=True),
                             "ratio": float(ratio)})
        write_csv(cdir / "certificates.csv", CERT_COLUMNS, rows)
    return results


def config_with(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
