"""Command-line entry point: ``raresim <subcommand> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import EXPERIMENTS, ExperimentConfig, default_config, load_config
from .exceptions import ConfigError, NotFoundError, RareSimError, ValidationError
from .plotting import write_svg

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the copy on
    # the subparser must not overwrite values given before it
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=d(None), help="TOML experiment config")
    common.add_argument("--seed", type=int, default=d(None), help="base seed (u64), overrides the config")
    common.add_argument("--out", type=Path, default=d(Path(".")), help="output directory")
    common.add_argument("--format", choices=("csv", "csv+svg"), default=d("csv"))
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="raresim", description="Rydberg atomic receiver simulations",
                parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[_common(True)], help=f"run the {name} experiment")
    return p


def _write_eit(cfg, out: Path, svg: bool):
    res = ex.run_eit_spectrum(cfg)
    res.trace.to_csv(out / "eit_spectrum.csv")
    if svg:
        write_svg(out / "eit_spectrum.svg",
                  [("transmission", res.trace.detunings_hz / 1e6, res.trace.transmission)],
                  xlabel="probe detuning (MHz)", ylabel="transmission")
    if res.splitting_hz is not None:
        return f"splitting {res.splitting_hz / 1e6:.4f} MHz"
    return "no splitting resolved"


def _write_sensitivity(cfg, out: Path, svg: bool):
    res = ex.run_sensitivity_figure(cfg)
    res.table.to_csv(out / "sensitivity.csv")
    res.registry.to_csv(out / "registry.csv")
    if svg:
        t = res.table
        write_svg(out / "sensitivity.svg",
                  [("SQL", t.frequency, t.sql), ("half-wave dipole", t.frequency, t.halfwave),
                   ("fixed dipole", t.frequency, t.fixed)],
                  xlabel="frequency (Hz)", ylabel="V/m/sqrt(Hz)", logx=True, logy=True)
    return f"{len(res.table)} frequencies"


def _write_link(cfg, out: Path, svg: bool):
    res = ex.run_link(cfg)
    res.to_csv(out / "link.csv")
    if svg:
        write_svg(out / "link.svg", [("simulated", res.snr_db, res.ser),
                                     ("theory", res.snr_db, res.ser_theory)],
                  xlabel="Es/N0 (dB)", ylabel="SER", logy=True)
    return f"SER at {res.snr_db[-1]:g} dB: {res.ser[-1]:.3g}"


def _write_mimo(cfg, out: Path, svg: bool):
    res = ex.run_mimo(cfg)
    ex.write_csv(out / "gs.csv", ("trial", "nmse_db", "converged", "iterations"),
                 zip(range(res.nmse_db.size), res.nmse_db, res.converged, res.iterations))
    ex.write_csv(out / "simo.csv", ("branches", "snr_measured_db", "snr_mrc_db"),
                 zip(res.branches, res.simo_snr_db, res.simo_theory_db))
    if svg:
        write_svg(out / "simo.svg", [("measured", res.branches, res.simo_snr_db),
                                     ("K x single", res.branches, res.simo_theory_db)],
                  xlabel="receivers K", ylabel="post-combining SNR (dB)")
    return f"median GS NMSE {np.median(res.nmse_db):.1f} dB"


def _write_multiband(cfg, out: Path, svg: bool):
    res = ex.run_multiband(cfg)
    res.to_csv(out / "multiband.csv")
    if svg:
        write_svg(out / "multiband.svg", [("BER", res.band_hz, res.ber)],
                  xlabel="band (Hz)", ylabel="BER", logx=True)
    return f"{res.band_hz.size} bands, max BER {res.ber.max():.3g}"


def _write_msac(cfg, out: Path, svg: bool):
    res = ex.run_msac(cfg)
    res.to_csv(out / "msac.csv")
    if svg:
        write_svg(out / "msac_se.svg", [("RARE", res.ptx_dbm, res.se_rare),
                                        ("CR1", res.ptx_dbm, res.se_cr1)],
                  xlabel="transmit power (dBm)", ylabel="SE (bps/Hz)")
        write_svg(out / "msac_nmse.svg", [("RARE", res.ptx_dbm, res.nmse_rare_db),
                                          ("CR2", res.ptx_dbm, res.nmse_cr2_db)],
                  xlabel="transmit power (dBm)", ylabel="NMSE (dB)")
    return f"SE gap {res.se_gap:.3f} bps/Hz, NMSE gap {res.nmse_gap:.2f} dB"


def _write_vibration(cfg, out: Path, svg: bool):
    res = ex.run_vibration_sensing(cfg)
    every = max(int(res.times.size / (cfg.target.duration_s * 1e3)), 1)  # ~1 kS/s
    res.to_csv(out / "vibration.csv", every=every)
    if svg:
        sl = slice(None, None, every)
        write_svg(out / "vibration.svg", [("target", res.times[sl], res.displacement[sl]),
                                          ("estimate", res.times[sl], res.estimate[sl])],
                  xlabel="time (s)", ylabel="displacement (m)")
    return f"NMSE {res.nmse_db:.2f} dB"


RUNNERS = {
    "eit-spectrum": _write_eit,
    "sensitivity": _write_sensitivity,
    "link": _write_link,
    "mimo": _write_mimo,
    "multiband": _write_multiband,
    "msac": _write_msac,
    "vibration": _write_vibration,
}


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config, args.command) if args.config else default_config(args.command)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        cfg.check_registry()
    except (ConfigError, NotFoundError, ValidationError, OSError) as exc:
        print(f"raresim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        summary = RUNNERS[args.command](cfg, args.out, args.format == "csv+svg")
    except ConfigError as exc:
        print(f"raresim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RareSimError, ArithmeticError, ValueError, OSError) as exc:
        print(f"raresim: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{args.command}: {summary}")
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
