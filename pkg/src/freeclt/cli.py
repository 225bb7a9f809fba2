"""Command-line entry point ``freeclt``.

    freeclt density|rates|check|entropy|fisher [--config PATH] [--out DIR] [--strict]

Outputs land in ``--out`` (default: the config's ``out_dir``): per-n
density tables ``density_n<k>.csv``, ``rates.csv`` and ``summary.json``.
Exit code 0 means every hard check passed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .checks import D_nonincreasing, run_checks
from .edgeworth import ExpansionError
from .functionals import relative_entropy, relative_fisher
from .measures import MeasureError
from .rates import (DENSITY_COLUMNS, RATE_COLUMNS, ConfigError, ExperimentConfig,
                    compute_rate_table, density_table, map_over_n, power_grid_density,
                    write_csv, write_json)
from .subordination import SolverError

log = logging.getLogger("freeclt")

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _rows(table):
    keys = list(table)
    return [{k: table[k][i] for k in keys} for i in range(len(table[keys[0]]))]


def cmd_density(config, out, strict=False):
    mu = config.build_measure()
    summary = {"command": "density", "config": config.to_dict(), "tables": []}
    status = EXIT_OK
    for n in config.n_list:
        try:
            table = density_table(mu, n, config)
        except SolverError as exc:
            summary["tables"].append({"n": n, "error": str(exc)})
            status = EXIT_SOLVER
            break
        path = os.path.join(out, f"density_n{n}.csv")
        write_csv(path, DENSITY_COLUMNS, _rows(table))
        summary["tables"].append({"n": n, "file": os.path.basename(path),
                                  "flagged": int(np.sum(table["flagged"])),
                                  "max_weighted_residual": float(np.max(table["weighted_residual"]))})
    write_json(os.path.join(out, "summary.json"), summary)
    return status


def cmd_rates(config, out, strict=False):
    table = compute_rate_table(config)
    write_csv(os.path.join(out, "rates.csv"), RATE_COLUMNS, table.rows)
    gated = [f for f in table.fits if f["quantity"] in ("D", "Phi_rel", "L1")]
    low_r2 = any(f.get("low_r2") for f in gated)
    D_pairs = [(r["D"], r["D_err"]) for r in table.rows]
    summary = {"command": "rates", "config": config.to_dict(), "m3": table.m3,
               "fits": table.fits, "limits": table.limits(), "low_r2_warning": low_r2,
               "D_nonincreasing": D_nonincreasing(D_pairs)}
    write_json(os.path.join(out, "summary.json"), summary)
    ok = all(f["ok"] for f in gated) and not (strict and low_r2)
    return EXIT_OK if ok else EXIT_FAILED_CHECK


def cmd_check(config, out, strict=False):
    results = run_checks(config)
    hard_fail = [r.name for r in results if r.hard and not r.ok]
    summary = {"command": "check", "config": config.to_dict(),
               "results": [r.as_dict() for r in results], "failed": hard_fail,
               "passed": not hard_fail}
    write_json(os.path.join(out, "summary.json"), summary)
    for r in results:
        mark = "PASS" if r.ok else ("FAIL" if r.hard else "NOTE")
        print(f"{mark} {r.name} {r.detail}".rstrip())
    if strict and any(not r.ok for r in results):
        return EXIT_FAILED_CHECK
    return EXIT_OK if not hard_fail else EXIT_FAILED_CHECK


def _functional_command(name, func, scale):
    def run(config, out, strict=False):
        mu = config.build_measure()

        def row(n):
            dens, _ = power_grid_density(mu, n, config)
            rep = func(dens)
            return {"n": n, "value": rep.value, "rescaled": scale(n) * rep.value,
                    "estimated_abs_error": rep.estimated_abs_error}

        rows = map_over_n(row, config.n_list)
        write_csv(os.path.join(out, f"{name}.csv"),
                  ["n", "value", "rescaled", "estimated_abs_error"], rows)
        ok = all(r["value"] >= -r["estimated_abs_error"] for r in rows)
        write_json(os.path.join(out, "summary.json"),
                   {"command": name, "config": config.to_dict(), "rows": rows,
                    "nonnegative": ok})
        return EXIT_OK if ok else EXIT_FAILED_CHECK
    return run


COMMANDS = {
    "density": cmd_density,
    "rates": cmd_rates,
    "check": cmd_check,
    "entropy": _functional_command("entropy", relative_entropy, lambda n: n),
    "fisher": _functional_command("fisher", relative_fisher, lambda n: n),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="freeclt", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="experiment config (JSON); defaults are used if omitted")
    parser.add_argument("--out", help="output directory (default: config out_dir)")
    parser.add_argument("--strict", action="store_true",
                        help="treat warnings (low r^2, diagnostics) as failures")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    except (OSError, ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or config.out_dir
    os.makedirs(out, exist_ok=True)
    try:
        return COMMANDS[args.command](config, out, strict=args.strict)
    except (ConfigError, MeasureError, ExpansionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
