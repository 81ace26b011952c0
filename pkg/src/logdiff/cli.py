"""Command-line entry point.

Subcommands::

    logdiff profile   --n 3 --beta 1 --lambda 1 --rmax 1e6 --out psi.csv
    logdiff simulate  --config sim.json --out run/
    logdiff verify    --kind theorem1_decay [--set dt=1e-4 ...]
    logdiff suite     [--quick] [--jobs 4]
    logdiff plotdata  --run run/ --what rescaled|decay --out tidy.csv

Exit status is 0 when every assertion passes, 1 when one fails or an
experiment errors, and 2 on usage errors.  Output directories resolve as
``--out``, then ``$LOGDIFF_OUT_DIR``, then the config file, then
``./logdiff_out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, pde
from .pde.grid import RadialGrid, State
from .profiles import ProfileError, ProfileParams, cached_profile, save_profile_csv, solve_profile

log = logging.getLogger("logdiff")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_base(arg: str | None, config_value: str | None = None) -> str:
    return arg or os.environ.get(harness.OUT_ENV) or config_value or harness.DEFAULT_OUT


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(pairs: list[str]) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_profile(args) -> int:
    alpha = 2 * args.beta if args.alpha is None else args.alpha
    try:
        params = ProfileParams(args.n, alpha, args.beta, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    t0 = time.perf_counter()
    try:
        prof = solve_profile(params, args.rmax, args.tol)
    except ProfileError as exc:
        print(f"profile solve failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else Path(_out_base(None)) / "profile.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_profile_csv(prof, out)
    print(f"wrote {out}: {prof.radii.size} nodes, psi(0)={prof.values[0]:.12g}, "
          f"r_max={prof.r_max:g}, {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def _sim_config(args) -> tuple[pde.SimConfig, str | None]:
    cfg_out = None
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
        cfg_out = d.pop("output_dir", None)
    else:
        d = {
            "n": 3, "beta": 1.0, "R_dom": 100.0, "t_end": 1.0,
            "initial": {"kind": "profile", "lam": 1.0},
            "bc": {"kind": "exact_self_similar", "lam": 1.0},
        }
    for key, attr in (("n", "n"), ("beta", "beta"), ("R_dom", "R_dom"), ("t_end", "t_end"),
                      ("dt", "dt"), ("inner_h", "inner_h"),
                      ("nodes_per_decade", "nodes_per_decade"), ("scheme", "scheme")):
        value = getattr(args, attr)
        if value is not None:
            d[key] = value
    if args.snapshots:
        d["snapshot_times"] = [float(t) for t in args.snapshots.split(",")]
    d.update(_overrides(args.set))
    try:
        return pde.SimConfig.from_dict(d), cfg_out
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid simulation config: {exc}") from exc


def cmd_simulate(args) -> int:
    cfg, cfg_out = _sim_config(args)
    out = Path(_out_base(args.out, cfg_out))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        traj = pde.run(cfg)
    except (pde.SimulationError, ProfileError, ValueError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.perf_counter() - t0
    harness.write_csv(out / "snapshots.csv", ["t", "r", "u"], harness.snapshot_rows(traj))
    meta = {
        "schema": harness.SCHEMA, "config": cfg.to_dict(), "boundary": traj.bc.to_dict(),
        "nodes": traj.grid.size, "snapshot_times": list(traj.times), "steps": list(traj.steps),
        "runtime_s": elapsed,
    }
    (out / "metadata.json").write_text(json.dumps(harness._plain(meta), indent=2) + "\n")
    if traj.bc.kind == "pinned_initial":
        print("note: outer Dirichlet value pinned to the initial datum", file=sys.stderr)
    print(f"wrote {out}/snapshots.csv and metadata.json: {len(traj.steps)} steps, "
          f"{traj.grid.size} nodes, {elapsed:.2f} s")
    return EXIT_OK


def _experiment_config(args) -> harness.ExperimentConfig:
    if args.config:
        base = harness.ExperimentConfig.load(args.config)
        kind, params = base.kind, dict(base.params)
        seed, out_dir, name = base.seed, base.output_dir, base.name
        if args.kind and args.kind != kind:
            raise UsageError(f"--kind {args.kind} conflicts with config kind {kind}")
    elif args.kind:
        kind, params, seed, out_dir, name = args.kind, {}, 0, None, None
    else:
        raise UsageError("verify needs --kind or --config")
    for key in ("n", "beta"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    params.update(_overrides(args.set))
    if args.seed is not None:
        seed = args.seed
    try:
        return harness.ExperimentConfig(kind, params, out_dir, seed, name)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _report_line(rep: harness.ExperimentReport) -> None:
    print(rep.summary())


def cmd_verify(args) -> int:
    cfg = _experiment_config(args)
    out = _out_base(args.out, cfg.output_dir)
    try:
        rep = harness.run_experiment(cfg, out)
    except harness.ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _report_line(rep)
    print(f"report: {cfg.out_dir(out) / 'report.json'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_suite(args) -> int:
    out = _out_base(args.out)
    t0 = time.perf_counter()
    try:
        reports = harness.run_suite(quick=args.quick, jobs=args.jobs, out_dir=out)
    except harness.ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for rep in reports:
        _report_line(rep)
    n_pass = sum(r.passed for r in reports)
    summary = {
        "schema": harness.SCHEMA, "quick": args.quick, "wall_s": time.perf_counter() - t0,
        "experiments": [{"kind": r.kind, "passed": r.passed, "runtime_s": r.runtime_s,
                         "files": r.files} for r in reports],
    }
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "suite.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"suite: {n_pass}/{len(reports)} experiments passed in {summary['wall_s']:.1f} s")
    return EXIT_OK if n_pass == len(reports) else EXIT_FAIL


def load_run(run_dir) -> pde.Trajectory:
    """Rebuild a trajectory from the files written by ``simulate``."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "metadata.json").read_text())
    cfg = pde.SimConfig.from_dict(meta["config"])
    data = np.loadtxt(run_dir / "snapshots.csv", delimiter=",", skiprows=1, ndmin=2)
    times = np.unique(data[:, 0])
    first = data[data[:, 0] == times[0]]
    grid = RadialGrid(first[:, 1], cfg.n, cfg.inner_h, cfg.nodes_per_decade)
    snaps = tuple(State(grid, float(t), data[data[:, 0] == t][:, 2]) for t in times)
    return pde.Trajectory(snaps, tuple(meta["steps"]), cfg, cfg.boundary(snaps[0]))


def cmd_plotdata(args) -> int:
    try:
        traj = load_run(args.run)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read run directory {args.run}: {exc}") from exc
    cfg = traj.config
    out = Path(args.out) if args.out else Path(args.run) / f"plot_{args.what}.csv"
    if args.what == "decay":
        if cfg.bc["kind"] != "exact_self_similar":
            raise UsageError("decay data need a run with exact_self_similar boundary data")
        harness.emit_decay_table(traj, cfg.bc.get("lam", 1.0), cfg.beta, cfg.n, out)
    else:
        lam = cfg.bc.get("lam") if cfg.bc["kind"] == "exact_self_similar" else None
        prof = cached_profile(cfg.n, cfg.beta, lam, cfg.R_dom) if lam is not None else None

        def rows():
            for s in traj.snapshots:
                y, ut = pde.rescaled_nodes(s, cfg.beta)
                psi = prof(y) if prof is not None else np.full_like(y, math.nan)
                yield from zip([s.t] * y.size, s.r, s.u, y, ut, psi)

        harness.write_csv(out, ["t", "r", "u", "y", "u_tilde", "psi"], rows())
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logdiff", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="solve a radial profile and export it as CSV")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=None, help="default 2*beta")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--rmax", type=float, default=1e6)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("simulate", help="run one simulation")
    sp.add_argument("--config", help="SimConfig JSON file")
    sp.add_argument("--n", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--R-dom", dest="R_dom", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--inner-h", dest="inner_h", type=float)
    sp.add_argument("--nodes-per-decade", dest="nodes_per_decade", type=int)
    sp.add_argument("--scheme", choices=("be", "bdf2"))
    sp.add_argument("--snapshots", help="comma-separated snapshot times")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a config field (value parsed as JSON)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run one verification experiment")
    sp.add_argument("--kind", choices=harness.KINDS)
    sp.add_argument("--config", help="ExperimentConfig JSON file")
    sp.add_argument("--n", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("suite", help="run every experiment kind")
    sp.add_argument("--quick", action="store_true", help="skip refinement runs")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_suite)

    sp = sub.add_parser("plotdata", help="tidy CSV from a simulate run")
    sp.add_argument("--run", required=True, help="directory written by simulate")
    sp.add_argument("--what", choices=("rescaled", "decay"), default="rescaled")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plotdata)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"logdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
