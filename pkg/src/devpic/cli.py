"""Command-line front end: single runs and sweep harnesses.

Configuration may come from an INI file ([run] section) overridden by
flags; flags win. Every run writes a manifest with the fully resolved
configuration next to its data files. Wall times in the outputs exclude
all I/O.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .driver import Scenario, simulate
from .harness import convergence_dt, convergence_neff, efficiency

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    if isinstance(x, float):
        return FLOAT_FMT % x
    return str(x)


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", choices=["vp-bgk", "vpl"])
    p.add_argument("--method", choices=["hdp", "pic-dsmc"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--A", type=float)
    p.add_argument("--nx", type=int)
    p.add_argument("--dt-factor", type=float)
    p.add_argument("--neff", type=float)
    p.add_argument("--neff-c", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps-v-factor", type=float)
    p.add_argument("--scheme", choices=["explicit", "implicit"])
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--enforce-moments", action="store_true", default=None)
    p.add_argument("--resample-cadence", type=int)
    p.add_argument("--config", type=Path, help="INI file with a [run] section")
    p.add_argument("--out", type=Path, default=Path("out"))


_KEYMAP = {
    "system": "system", "method": "method", "alpha": "alpha", "mu": "mu", "A": "A",
    "nx": "n_x", "dt_factor": "dt_factor", "neff": "n_eff", "neff_c": "n_eff_c",
    "K": "K", "beta": "beta", "gamma": "gamma", "eps_v_factor": "eps_v_factor",
    "scheme": "scheme", "t_end": "t_end", "seed": "seed",
    "enforce_moments": "enforce_moments", "resample_cadence": "resample_cadence",
}
_TYPES = {"n_x": int, "K": int, "seed": int, "resample_cadence": int,
          "system": str, "method": str, "scheme": str, "enforce_moments": bool}


def build_scenario(args: argparse.Namespace, require_core: bool = True) -> Scenario:
    values: dict = {}
    if args.config is not None:
        cfg = configparser.ConfigParser()
        if not cfg.read(args.config):
            raise SystemExit(f"error: cannot read config file {args.config}")
        for key, raw in cfg["run"].items():
            if key not in _KEYMAP:
                raise SystemExit(f"error: unknown config key {key!r}")
            field = _KEYMAP[key]
            typ = _TYPES.get(field, float)
            values[field] = cfg["run"].getboolean(key) if typ is bool else typ(raw)
    for key, field in _KEYMAP.items():
        v = getattr(args, key, None)
        if v is not None:
            values[field] = v
    for name in ("system", "method"):
        if name in values:
            values[name] = values[name].replace("-", "_")
    if require_core and ("system" not in values or "method" not in values):
        raise SystemExit("error: --system and --method are required (flag or config file)")
    try:
        return Scenario(**values)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"error: invalid configuration: {exc}")


def write_manifest(out: Path, scenario: Scenario, extra: dict | None = None) -> None:
    doc = {
        "devpic_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "scenario": asdict(scenario),
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_energy_series(out: Path, rows) -> None:
    with open(out / "energy_series.csv", "w") as f:
        f.write("step,t,E_norm_sq,N_p,N_n,N_c,wall_s\n")
        for step, t, e2, n_p, n_n, n_c, wall in rows:
            f.write(f"{step},{_fmt(t)},{_fmt(e2)},{n_p},{n_n},{n_c},{_fmt(wall)}\n")


def write_snapshot(out: Path, tag, snap, grid_dx: float) -> None:
    edges = snap["edges"]
    dv = edges[1] - edges[0]
    area = grid_dx * dv
    with open(out / f"snapshot_{tag}.csv", "w") as f:
        f.write("x_bin,v1_bin,M_value,fd_pos,fd_neg,f_total\n")
        nx, nv = snap["f"].shape
        for i in range(nx):
            for j in range(nv):
                vals = (snap["M"][i, j] / area, snap["fd_pos"][i, j] / area,
                        snap["fd_neg"][i, j] / area, snap["f"][i, j] / area)
                f.write(f"{i},{j}," + ",".join(_fmt(v) for v in vals) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = build_scenario(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    snap_times = []
    if args.snapshot_times:
        snap_times = [float(t) for t in args.snapshot_times.split(",")]
    state, snaps = simulate(scenario, snapshot_times=snap_times, progress=args.progress)
    write_energy_series(out, state.energy_rows)
    for t, snap in snaps.items():
        write_snapshot(out, f"{t:g}", snap, state.grid.dx)
    write_manifest(out, scenario, {"snapshot_times": snap_times})
    print(f"run complete: {state.step} steps, wall {state.wall:.2f} s, "
          f"counts (N_p, N_n, N_c) = {state.counts()}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    base = build_scenario(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    kind = args.kind
    if kind == "convergence_neff":
        rows, slope = convergence_neff(base, neff_unit=args.neff_unit)
        footer = [("fitted_slope", slope)]
    elif kind == "convergence_dt":
        rows, slope = convergence_dt(base, replicates=args.replicates)
        footer = [("fitted_slope", slope)]
    elif kind == "efficiency":
        rows, advantage = efficiency(base, neff_unit=args.neff_unit)
        footer = [(f"cpu_advantage_alpha_{a:g}", v) for a, v in advantage.items()]
    else:  # pragma: no cover - argparse restricts choices
        raise SystemExit(f"error: unknown sweep kind {kind}")

    cols = sorted({c for r in rows for c in r})
    ordered = [c for c in ("method", "alpha", "param", "error", "wall_s") if c in cols]
    with open(out / f"sweep_{kind}.csv", "w") as f:
        f.write(",".join(ordered) + "\n")
        for r in rows:
            f.write(",".join(_fmt(r[c]) for c in ordered) + "\n")
        for name, val in footer:
            f.write(f"{name},{_fmt(val)}\n")
    write_manifest(out, base, {"sweep_kind": kind,
                               "footer": {k: v for k, v in footer}})
    for name, val in footer:
        print(f"{name} = {val:.4g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="devpic",
                                     description="hybrid deviational-particle plasma solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its data files")
    _scenario_flags(p_run)
    p_run.add_argument("--snapshot-times", type=str, default="",
                       help="comma-separated times for phase-space snapshots")
    p_run.add_argument("--progress", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter ladder and fit its slope")
    _scenario_flags(p_sweep)
    p_sweep.add_argument("--kind", required=True,
                         choices=["convergence_neff", "convergence_dt", "efficiency"])
    p_sweep.add_argument("--neff-unit", type=float, default=2e-5,
                         help="ladder unit for n_eff-based sweeps")
    p_sweep.add_argument("--replicates", type=int, default=4,
                         help="seed replicates averaged per dt-ladder point")
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
