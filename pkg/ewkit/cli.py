from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ewkit.config import CONFIG_KEYS, build_config, load_config_file
from ewkit.core import run_experiment, sweep
from ewkit.errors import ConfigError, EwkitError
from ewkit.models import AlgorithmId
from ewkit.suites import SUITES, run_suite

EXIT_OK = 0
EXIT_VIOLATION = 1
_KEY_FLAGS = tuple(k for k in CONFIG_KEYS if k not in ("seed", "out"))


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="Path to a `key = value` experiment file.")
    p.add_argument("--algo", choices=[a.value for a in AlgorithmId], help="Algorithm id (overrides the file).")
    p.add_argument("--seed", type=int, help="Base seed (overrides the file).")
    p.add_argument("--out", help="Output folder. Default: a new folder under the per-user cache.")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any config key (repeatable), e.g. --set T=500 --set flavor=lazy.",
    )
    keys = p.add_argument_group("config keys", "Every config key as a flag; these override the file and --set.")
    for key in _KEY_FLAGS:
        names = dict.fromkeys([f"--{key.replace('_', '-')}", f"--{key}"])
        keys.add_argument(*names, dest=key, metavar="VALUE", default=None)


def _collect_values(args: argparse.Namespace) -> dict[str, object]:
    values: dict[str, object] = {}
    if args.config:
        values.update(load_config_file(Path(args.config).expanduser().resolve()))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key.replace("-", "_")] = value
    for key in _KEY_FLAGS:
        if getattr(args, key) is not None:
            if key == "algorithm":
                values.pop("algo", None)
            values[key] = getattr(args, key)
    if args.algo:
        values.pop("algo", None)
        values["algorithm"] = args.algo
    if args.seed is not None:
        values["seed"] = args.seed
    if args.out:
        values["out"] = Path(args.out).expanduser().resolve()
    return values


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="ewkit",
        description="ewkit: run online-learning algorithms as exponential weights and check their regret bounds.",
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Run one experiment and write ledger.csv, regret.svg and summary.txt.")
    _add_run_options(run_p)

    verify_p = sub.add_parser("verify", help="Run the built-in verification suites.")
    verify_p.add_argument("--suite", choices=["all", *SUITES], default="all")
    verify_p.add_argument("--full", action="store_true", help="Use the full seed counts and horizons (slow).")

    sweep_p = sub.add_parser("sweep", help="Re-run an experiment over several values of one key.")
    _add_run_options(sweep_p)
    sweep_p.add_argument("--param", required=True, help="Config key to vary, e.g. eta or T.")
    sweep_p.add_argument("--values", required=True, help="Comma-separated values.")

    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    def status(msg: str) -> None:
        print(msg, flush=True)

    try:
        if args.command == "verify":
            reports = run_suite(args.suite, full=args.full, on_status=status)
            failed = [c.name for r in reports for c in r.checks if not c.passed]
            if failed:
                status(f"{len(failed)} checks failed: {', '.join(failed)}")
                return EXIT_VIOLATION
            status("All checks passed.")
            return EXIT_OK

        values = _collect_values(args)
        if args.command == "run":
            result = run_experiment(build_config(values), on_status=status)
            return EXIT_VIOLATION if result.violated else EXIT_OK

        sweep_values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not sweep_values:
            status("No sweep values given.")
            return 2
        base_out = values.pop("out", None)
        results = sweep(values, args.param, sweep_values, base_out, on_status=status)
        return EXIT_VIOLATION if any(r.violated for r in results) else EXIT_OK

    except EwkitError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"Fatal error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
