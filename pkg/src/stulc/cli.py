"""Command-line entry point.

Exit status: 0 success, 2 configuration error, 3 numeric failure,
4 validation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .numerics import NumericError
from .pipeline import run_ber_sweep, run_outage_sweep, run_power_map, validate_interface
from .scenario import ConfigError, Scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4

log = logging.getLogger("stulc")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario TOML file (flat dotted keys)")
    common.add_argument("--seed", type=int, help="run seed (overrides sim.seed)")
    common.add_argument("--photons", type=int, help="photon count (overrides sim.photons)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for CSV/JSON outputs")
    common.add_argument("--debug-traces", action="store_true", help="also write per-photon traces")

    p = argparse.ArgumentParser(prog="stulc", description="Satellite-to-underwater laser link simulator.")
    p.add_argument("--version", action="version", version=f"stulc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("power-map", parents=[common], help="received power over a receiver lattice")
    sub.add_parser("ber-sweep", parents=[common], help="mean BER against transmit power or zenith angle")
    sub.add_parser("outage-sweep", parents=[common], help="outage probability against SNR threshold")
    sub.add_parser("validate-interface", parents=[common], help="closed-form vs brute-force refraction checks")
    sub.add_parser("print-defaults", parents=[common], help="print the scenario as TOML")
    return p


def _scenario(args) -> Scenario:
    s = Scenario.load(args.config) if args.config else Scenario()
    over = {}
    if args.seed is not None:
        over["sim.seed"] = args.seed
    if args.photons is not None:
        over["sim.photons"] = args.photons
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return s.with_values(over) if over else s


def _report(files):
    for f in files:
        print(f)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        s = _scenario(args)
        if args.command == "print-defaults":
            sys.stdout.write(s.to_toml())
            return EXIT_OK
        if args.command == "power-map":
            pm = run_power_map(s, args.out_dir, threads=args.threads, debug_traces=args.debug_traces)
            _report(pm.files)
        elif args.command == "ber-sweep":
            _report(run_ber_sweep(s, args.out_dir, threads=args.threads).files)
        elif args.command == "outage-sweep":
            _report(run_outage_sweep(s, args.out_dir, threads=args.threads).files)
        elif args.command == "validate-interface":
            rep = validate_interface(s, args.out_dir)
            _report(rep.files)
            if not rep.passed:
                bad = [c for c in rep.cases if not c["passed"]]
                log.error("interface validation failed for %d case(s)", len(bad))
                return EXIT_VALIDATION
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid parameter: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
