"""Command-line entry point: ``aniso-qft <modes|spectrum|tensor|verify> --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .kinetics import ModeBatch, evolve_suv, evolve_suv_batch
from .stress_tensor import assemble_series
from .tables import MODES_COLUMNS, SPECTRUM_COLUMNS, TENSOR_COLUMNS, Table

log = logging.getLogger("aniso_qft")


def cmd_modes(config: RunConfig) -> Table:
    if config.mode is None:
        raise ConfigError("modes: configure a single mode with mode.k / mode.theta / mode.phi")
    traj = evolve_suv(config.model, config.mode, config.mass, config.eta0, config.eta1,
                      config.tol_ode, config.output_times)
    table = Table(MODES_COLUMNS)
    for row in zip(traj.eta, traj.S, traj.U, traj.V, traj.Theta, traj.constraint_residual):
        table.add(*row)
    return table


def cmd_spectrum(config: RunConfig, workers: int = 1) -> Table:
    sp = config.spectrum
    k = np.geomspace(sp.k_min, sp.k_max, sp.n_k)
    if sp.angular_grid:
        x, _ = config.grid.polar()
        phi, _ = config.grid.azimuthal()
        K, TH, PH = (a.ravel() for a in np.meshgrid(k, np.arccos(x), phi, indexing="ij"))
    else:
        K, TH, PH = k, np.full(k.size, sp.theta), np.full(k.size, sp.phi)
    batch = ModeBatch.from_angles(K, TH, PH)
    st = evolve_suv_batch(config.model, batch, config.mass, config.eta0, [config.eta1],
                          config.tol_ode, workers=workers)
    table = Table(SPECTRUM_COLUMNS)
    for row in zip(K, TH, PH, st.S[-1], st.U[-1], st.V[-1]):
        table.add(*row)
    return table


def cmd_tensor(config: RunConfig, workers: int = 1) -> Table:
    results = assemble_series(config.model, config.mass, config.output_times, config.eta0, config.grid,
                              config.tol_quad, tol_ode=config.tol_ode, tii_variant=config.tii_variant,
                              max_refinements=config.max_refine, workers=workers)
    table = Table(TENSOR_COLUMNS)
    for r in results:
        if not r.converged and config.max_refine > 0:
            log.warning("quadrature not converged at eta=%s after %d refinements", r.eta, r.refinements)
        table.add(r.eta, r.T00, *r.Tii, r.trace, r.tail_estimate, int(r.converged))
    return table


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, newline="\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aniso-qft",
                                     description="Particle creation of a scalar field in Bianchi-I backgrounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [("modes", "S, U, V trajectory of one mode"),
                           ("spectrum", "final S, U, V over a k grid"),
                           ("tensor", "energy-momentum tensor time series"),
                           ("verify", "run the invariant and oracle checks")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=name != "verify", help="configuration document")
        p.add_argument("--output", help="output file (default: stdout or output.path)")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
        p.add_argument("--workers", type=int, default=1, help="processes for the mode grid")
        if name == "verify":
            p.add_argument("--only", action="append", metavar="CHECK",
                           help="run only this check (repeatable)")
            p.add_argument("--inject", choices=("flip-dv",), help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config) if args.config else None
    except (ConfigError, OSError) as exc:
        print(f"aniso-qft: {exc}", file=sys.stderr)
        return 2
    out = args.output or (config.output_path if config else None)
    fmt = args.format or (config.output_format if config and args.config else None)

    if args.command == "verify":
        from .verify import cmd_verify
        try:
            report = cmd_verify(config, workers=args.workers, inject=args.inject, only=args.only)
        except ValueError as exc:
            print(f"aniso-qft: {exc}", file=sys.stderr)
            return 2
        if (fmt or "json") == "json":
            text = json.dumps(report, indent=1) + "\n"
        else:
            text = report_table(report).to_csv()
        _emit(text, out)
        return 0 if report["passed"] else 1

    try:
        if args.command == "modes":
            table = cmd_modes(config)
        elif args.command == "spectrum":
            table = cmd_spectrum(config, args.workers)
        else:
            table = cmd_tensor(config, args.workers)
    except ConfigError as exc:
        print(f"aniso-qft: {exc}", file=sys.stderr)
        return 2
    _emit(table.render(fmt or "csv"), out)
    return 0


def report_table(report) -> Table:
    table = Table(("check", "passed", "gating", "measured", "threshold"))
    for c in report["checks"]:
        table.add(c["name"], int(c["passed"]), int(c["gating"]), c["measured"], c["threshold"])
    return table


if __name__ == "__main__":
    sys.exit(main())
