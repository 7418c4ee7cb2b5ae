"""Command line entry point (``hydrolab`` / ``python3 -m hydrolab``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .harness import (
    SweepError,
    load_config,
    run_certify,
    run_diff_sweep,
    run_simulate_nse,
    run_simulate_pe,
    run_w_residual,
    _parse_grid,
    _parse_list,
)

COMMANDS = {
    "simulate-pe": "integrate the hydrostatic system and write a checkpoint",
    "simulate-nse": "integrate the scaled Navier-Stokes system for each eps",
    "diff-sweep": "eps-sweep of the Fujita-Kato norm of the difference, with rate fit",
    "certify": "numerical certificates for the linear and bilinear estimates",
    "w-residual": "residual of the w-equation at dt and dt/2",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrolab", description="Hydrostatic limit experiments on the 3-torus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="worker processes for the eps loop")
        p.add_argument("--seed", type=int, help="seed for randomized certificates")
        p.add_argument("--eps", type=lambda s: tuple(float(x) for x in _parse_list(s)),
                       help="comma separated, strictly decreasing eps values")
        p.add_argument("--grid", type=_parse_grid, help="N (cubic) or NHxNV")
        p.add_argument("--dt", type=float, help="time step")
        p.add_argument("--T", type=float, help="final time")
        p.add_argument("--q", type=float, help="vertical Lebesgue exponent")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "certify":
            p.add_argument("--suite", type=_parse_list, help="comma separated certificate ids")
        if name in ("diff-sweep",):
            p.add_argument("--solver", choices=("both", "direct", "picard"))
            p.add_argument("--segments", type=int, help="Picard time segments")
    return parser


def _config(args: argparse.Namespace):
    grid = args.grid or (None, None)
    overrides = dict(out=args.out, jobs=args.jobs, seed=args.seed, eps=args.eps, n_h=grid[0], n_v=grid[1],
                     dt=args.dt, T=args.T, q=args.q, mode=args.command,
                     suite=getattr(args, "suite", None), solver=getattr(args, "solver", None),
                     segments=getattr(args, "segments", None))
    return load_config(args.config, **overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
    except (ValueError, OSError) as exc:
        print(f"hydrolab: configuration error: {exc}", file=sys.stderr)
        return 2

    if args.command == "diff-sweep":
        try:
            report = run_diff_sweep(cfg)
        except SweepError as exc:
            print(f"hydrolab: sweep aborted: {exc} (partial results in {cfg.out})", file=sys.stderr)
            return 1
        for r in report.rows:
            print(f"eps={r['eps']:<10g} total={r['total']:.6e}")
        if report.slope is not None:
            print(f"slope={report.slope:.4f} r2={report.r2:.5f}")
        return 0
    if args.command == "certify":
        results = run_certify(cfg)
        for name, cert in results.items():
            print(f"{name:<18} {'pass' if cert.verdict else 'FAIL'} sup_ratio={cert.sup_ratio:.6g}")
        return 0
    runner = {"simulate-pe": run_simulate_pe, "simulate-nse": run_simulate_nse, "w-residual": run_w_residual}
    body = runner[args.command](cfg)
    print(json.dumps(body, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
