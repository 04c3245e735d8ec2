"""Command-line driver: ``simulate``, ``reconstruct``, ``wigner``, ``report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import io as fio
from .compare import compare
from .config import FULL_EVENTS, PRESETS, ConfigError, TomographyConfig
from .experiment import simulate
from .tomography import ReconstructionError, reconstruct
from .wigner import GridSpec, wigner_from_density

log = logging.getLogger("penningtomo")

OUT_ENV = "PENNINGTOMO_OUT"

DESK_TOLERANCES = {"rho11_max": 0.05, "rho22_max": 0.05, "imag_rho12_max": 1e-2}
FULL_TOLERANCES = {"rho11_max": 0.02, "rho22_max": 0.02, "imag_rho12_max": 1e-3}
EXACT_TOLERANCES = {
    "rho11_max": 1e-7, "rho22_max": 1e-7, "rho12_max": 1e-7,
    "c1_rel": 1e-7, "c2_rel": 1e-7, "theta_rel": 1e-7,
}


def default_tolerances(cfg: TomographyConfig) -> dict:
    if cfg.tolerances:
        return dict(cfg.tolerances)
    if cfg.exact_mode:
        return dict(EXACT_TOLERANCES)
    return dict(FULL_TOLERANCES if cfg.events >= FULL_EVENTS else DESK_TOLERANCES)


def _out_dir(args, fallback) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(fallback)


def load_config(args) -> TomographyConfig:
    if getattr(args, "config", None):
        cfg = TomographyConfig.load(args.config)
    elif getattr(args, "preset", None):
        cfg = PRESETS[args.preset]()
    else:
        raise ConfigError("config", "give --config <path> or --preset")
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "exact", False):
        changes["exact_mode"] = True
    if getattr(args, "paper_scale", False):
        changes["events"] = FULL_EVENTS
    return replace(cfg, **changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args, cfg.out_dir)
    t0 = time.perf_counter()
    records = simulate(cfg, replicate=args.replicate, workers=args.workers)
    fio.write_records(out, records, cfg, replicate=args.replicate)
    log.info("wrote %d phase and %d pulse records to %s in %.2fs", cfg.phases, len(cfg.spin_pulses), out,
             time.perf_counter() - t0)
    return 0


def cmd_reconstruct(args) -> int:
    cfg, records = fio.read_records(args.records)
    report = reconstruct(records, cfg)
    out = Path(args.out) if args.out else Path(args.records) / "report.json"
    fio.atomic_write(out, fio.report_to_json(report, cfg))
    log.info("wrote %s", out)
    return 0


def cmd_wigner(args) -> int:
    report, _ = fio.report_from_json(Path(args.report).read_text())
    spec = GridSpec(args.xmin, args.xmax, args.ymin, args.ymax, args.nx, args.ny)
    grids = [
        wigner_from_density(report.rho11, spec, "W11"),
        wigner_from_density(report.rho22, spec, "W22"),
        wigner_from_density(report.rho12, spec, "W12"),
    ]
    out = _out_dir(args, Path(args.report).parent / "wigner")
    fio.write_wigner(out, grids)
    log.info("wrote Wigner blocks to %s", out)
    return 0


def cmd_report(args) -> int:
    t0 = time.perf_counter()
    report, embedded = fio.report_from_json(Path(args.report).read_text())
    if args.config:
        cfg = TomographyConfig.load(args.config)
    elif embedded is not None:
        cfg = TomographyConfig.from_dict(embedded)
    else:
        raise ConfigError("config", "report carries no config; pass --config")
    result = compare(report, cfg, runtime_s=time.perf_counter() - t0)
    ok = result.check(default_tolerances(cfg))
    doc = result.to_dict()
    # wall time goes to the log so report artifacts stay byte-reproducible
    log.info("comparison took %.4fs", doc.pop("runtime_s"))
    text = json.dumps(fio._jsonable(doc), indent=2, sort_keys=True) + "\n"
    if args.out:
        fio.atomic_write(args.out, text)
    sys.stdout.write(text)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="penningtomo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate phase-swept and spin-pulse records")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON config file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in reference state")
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or config out_dir)")
    s.add_argument("--seed", type=int)
    s.add_argument("--exact", action="store_true", help="write analytic probabilities instead of counts")
    s.add_argument("--paper-scale", action="store_true", help=f"full scale: {FULL_EVENTS} events per phase")
    s.add_argument("--replicate", type=int, default=0)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="invert a record set into a report JSON")
    r.add_argument("records", help="record directory written by 'simulate'")
    r.add_argument("--out", help="report path (default: <records>/report.json)")
    r.set_defaults(func=cmd_reconstruct)

    w = sub.add_parser("wigner", help="Wigner-function matrix on a grid")
    w.add_argument("report")
    w.add_argument("--out")
    w.add_argument("--xmin", type=float, default=-4.0)
    w.add_argument("--xmax", type=float, default=4.0)
    w.add_argument("--ymin", type=float, default=-4.0)
    w.add_argument("--ymax", type=float, default=4.0)
    w.add_argument("--nx", type=int, default=81)
    w.add_argument("--ny", type=int, default=81)
    w.set_defaults(func=cmd_wigner)

    c = sub.add_parser("report", help="compare a report with the true state; nonzero exit on failure")
    c.add_argument("report")
    c.add_argument("--config", help="config with the true state (default: the one embedded in the report)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, fio.RecordSetError, ReconstructionError, ValueError, OSError) as exc:
        log.error("%s", exc)
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
