"""Command line entry point.

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import checks
from .config import ConfigError, StudyConfig, load_config
from .energy import discrete_energy
from .fileio import CheckpointError, SnapshotError, export_text, read_snapshot, write_convergence_csv
from .harness import run_spatial_study, run_temporal_study, summary
from .simulation import run_simulation, solve_config
from .solver import SolverError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if isinstance(cfg, StudyConfig):
        raise ConfigError("this is a study configuration; use the converge subcommand")
    result = run_simulation(cfg, resume_from=args.resume, output_dir=args.output_dir)
    last = result.records[-1]
    print(f"reached level {last.level} (t = {last.time:.6g}); E = {last.E:.12g}, "
          f"modified E = {last.E_mod:.12g}")
    if result.guards.flags:
        print("step-size guards violated: " + ", ".join(sorted(result.guards.flags)))
    if result.dissipation_failures:
        print(f"modified energy increased at {len(result.dissipation_failures)} levels")
    if result.bound_failures:
        print(f"L-infinity bound monitor fired at {len(result.bound_failures)} levels")
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = load_config(args.config)
    if not isinstance(cfg, StudyConfig):
        raise ConfigError("a study configuration needs 'study = temporal' or 'study = spatial'")
    solver = solve_config(cfg)
    if cfg.study == "temporal":
        rows = run_temporal_study(cfg.Ns, cfg.M, cfg.T, cfg.g, cfg.eps, solver, cfg.sign_mode)
    else:
        rows = run_spatial_study(cfg.Ms, cfg.steps, cfg.T, cfg.g, cfg.eps, solver, cfg.sign_mode)
    print(summary(rows))
    out = args.output_dir or cfg.output_dir
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_convergence_csv(Path(out) / "convergence.csv", rows)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = checks.run_all()
    print(checks.format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_energy(args) -> int:
    print("file,level,time,E")
    for path in args.snapshots:
        field, head = read_snapshot(path)
        print(f"{path},{head.level},{head.time!r},{discrete_energy(field, head.g, head.eps)!r}")
    return EXIT_OK


def _cmd_export(args) -> int:
    field, head = read_snapshot(args.snapshot)
    export_text(args.output, field, head)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shbdf3", description="BDF3 finite-difference Swift-Hohenberg solver")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a simulation from a config file")
    s.add_argument("config")
    s.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint file")
    s.add_argument("--output-dir", help="override output_dir from the config")
    s.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("converge", help="run a temporal or spatial convergence study")
    c.add_argument("config")
    c.add_argument("--output-dir", help="write convergence.csv here")
    c.set_defaults(func=_cmd_converge)

    v = sub.add_parser("verify", help="kernel and operator self-checks")
    v.set_defaults(func=_cmd_verify)

    e = sub.add_parser("energy", help="recompute the discrete energy of snapshots")
    e.add_argument("snapshots", nargs="+")
    e.set_defaults(func=_cmd_energy)

    x = sub.add_parser("export", help="write a snapshot as a plain-text table")
    x.add_argument("snapshot")
    x.add_argument("output")
    x.set_defaults(func=_cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, SnapshotError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
