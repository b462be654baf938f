"""Command-line front end.

Subcommands pick the run mode; everything else comes from the YAML
config, with flags overriding individual fields.  Overrides are applied
to the parsed config mapping before validation so the stored provenance
hash always reflects what actually ran.
"""

import argparse
import logging
import os
import sys

import yaml

from .errors import MacPrecodeError
from .harness import MODES, config_from_dict, run_sweep, table_counts

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macprecode",
        description="Precoder design for finite-alphabet multiple access channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "optimize": "optimize precoders over the SNR grid",
        "evaluate": "evaluate stored (or baseline) precoders over the grid",
        "oracle": "Monte Carlo exact mutual information of the baseline",
        "count": "print precoder-search alphabet sizes",
        "sweep": "optimize plus oracle at every SNR point",
    }
    for mode in MODES:
        p = sub.add_parser(mode, help=helps[mode])
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument(
            "--snr-db",
            help="comma-separated SNR grid in dB (overrides config)",
        )
        p.add_argument("--starts", type=int, help="number of optimizer starts")
        p.add_argument("--mc-objective", type=int, help="pool size per iteration")
        p.add_argument("--mc-report", type=int, help="pool size for final reports")
        p.add_argument("--threads", type=int, help="parallel starts (or env MACPRECODE_THREADS)")
        p.add_argument("--precoders", help="precoder JSON for evaluate/oracle modes")
        p.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _apply_overrides(data: dict, args: argparse.Namespace) -> dict:
    data = dict(data)
    data["mode"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
        data.setdefault("optimizer", {})
        data["optimizer"] = dict(data["optimizer"])
        data["optimizer"]["seed"] = args.seed
    if args.snr_db is not None:
        try:
            data["snr_db"] = [float(s) for s in args.snr_db.split(",") if s.strip()]
        except ValueError:
            raise SystemExit(f"--snr-db: not a comma-separated number list: {args.snr_db!r}")
    if args.out is not None:
        data["output"] = dict(data.get("output", {}))
        data["output"]["dir"] = args.out
    if args.precoders is not None:
        data["precoders"] = args.precoders
    opt_overrides = {
        "n_starts": args.starts,
        "mc_objective": args.mc_objective,
        "mc_report": args.mc_report,
        "threads": _threads(args),
    }
    opt_overrides = {k: v for k, v in opt_overrides.items() if v is not None}
    if opt_overrides:
        data["optimizer"] = {**dict(data.get("optimizer", {})), **opt_overrides}
    return data


def _threads(args: argparse.Namespace) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MACPRECODE_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            log.warning("ignoring non-integer MACPRECODE_THREADS=%r", env)
    return None


def _print_row(row):
    def show(v, width=10):
        return " " * width if v is None else f"{v:{width}.4f}"

    print(
        f"snr {row.snr_db:+6.1f} dB | opt {show(row.wsr_opt_bits)} | "
        f"np {show(row.wsr_np_bits)} | mc {show(row.mc_exact_bits)} "
        f"| {row.seconds:7.1f}s",
        flush=True,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: cannot load config {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        config = config_from_dict(_apply_overrides(data, args), source=args.config)
        if config.mode == "count":
            counts = table_counts(config)
            print(f"constellation orders: {counts['orders']}, {counts['n_tx']} antennas")
            print(f"statistical search space:    {counts['statistical']}")
            print(f"instantaneous search space:  {counts['instantaneous']}")
            return 0
        rows = run_sweep(config, progress=_print_row)
    except MacPrecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if rows and all(
        r.wsr_opt_bits is None and r.wsr_np_bits is None and r.mc_exact_bits is None
        for r in rows
    ):
        print("error: every grid point failed, see messages above", file=sys.stderr)
        return 1
    if config.mode in ("optimize", "sweep") and rows:
        bad = [r.snr_db for r in rows if not r.converged]
        if bad:
            print(f"warning: non-converged points at {bad} dB", file=sys.stderr)
    print(f"wrote {os.path.join(config.out_dir, config.csv_name)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
