"""Command-line front end: ``capbarrier simulate|verify|study``.

Exit codes: 0 success, 1 a check failed or the solver aborted, 2 invalid
configuration or usage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .acceptance import run_acceptance
from .analysis import StudyTable, mesh_study, sola_study, summary_line, write_csv
from .config import load_scenario
from .errors import CapBarrierError, ConfigError, StepFailure
from .solver import Simulator

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args):
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _out_dir(args, cfg):
    out = Path(args.out or cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    cfg = _load(args)
    out = _out_dir(args, cfg)
    sim = Simulator(cfg.mesh(), panels=cfg.panels, tol=cfg.tol)
    try:
        traj = sim.run(cfg.initial_data(), cfg.dt, cfg.T, cfg.outputs)
    except StepFailure as exc:
        print(f"solver aborted at t={exc.time}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    traj.write_states(out / f"{cfg.name}_trajectory.csv")
    traj.write_interfaces(out / f"{cfg.name}_interfaces.csv")
    print(f"wrote {len(traj.times)} states and {len(traj.interfaces)} interface records to {out}")
    return EXIT_OK


def cmd_verify(args):
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(summary_line("config", False, str(exc)))
        return EXIT_CONFIG
    results = run_acceptance(seed=cfg.seed, jobs=args.jobs)
    for r in results:
        print(r.line())
    if args.out:
        out = _out_dir(args, cfg)
        write_csv(out / "acceptance.csv", ["criterion", "name", "passed", "detail", "seconds"],
                  [(r.number, r.name, r.passed, r.detail, r.seconds) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_study(args):
    cfg = _load(args)
    out = _out_dir(args, cfg)
    kind = cfg.study.get("kind", "sola")
    if kind == "sola":
        if len(cfg.n_list) < 2:
            table = StudyTable([cfg.n_list[0]], [None])
            table.write(out / f"{cfg.name}_study.csv")
            print(f"single level n={cfg.n_list[0]}: nothing to compare")
            return EXIT_OK
        rep = sola_study(cfg.layout(), cfg.cells(), cfg.initial_data(), cfg.n_list, cfg.dt,
                         cfg.T, cfg.outputs, cfg.panels, args.jobs, cfg.K)
        table = rep.table()
        for (lvl, d, ratio), d0 in zip(table.rows(), rep.initial_distances):
            print(f"n={lvl}: distance {d:.6e} (initial {d0:.6e}) ratio {ratio}")
    else:
        table = mesh_study(cfg.layout(), cfg.cells(), cfg.initial_data(), cfg.dt, cfg.T,
                           levels=cfg.study.get("levels", 3), panels=cfg.panels, jobs=args.jobs)
        for lvl, d, ratio in table.rows():
            print(f"cells={lvl}: distance {d} ratio {ratio}")
    table.write(out / f"{cfg.name}_study.csv")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="capbarrier",
                                description="Layered capillary-barrier flow simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
            ("simulate", cmd_simulate, "run a scenario and write CSV trajectories"),
            ("verify", cmd_verify, "run the acceptance checks"),
            ("study", cmd_study, "regularization or mesh convergence table")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", default="overlap",
                       help="scenario file or preset name (default: overlap)")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="seed for random checks")
        s.add_argument("--jobs", type=int, default=1, help="worker processes")
        s.set_defaults(func=fn)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapBarrierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
