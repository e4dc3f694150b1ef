"""Command-line driver: ``dronemob <kind> --config FILE --seed N --out DIR``.

Exit status is 0 on success, 1 when the configuration is invalid and 2
when a numerical routine misses its tolerance.
"""

import argparse
from dataclasses import replace
import sys

from .config import KINDS, load_config
from .errors import ConfigError, NumericalError, ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def build_parser():
    from .experiments import columns_help

    parser = argparse.ArgumentParser(
        prog="dronemob",
        description="Run an analytic / Monte Carlo experiment and write <kind>.csv plus a <kind>.json sidecar.",
        epilog=columns_help()
        + "\n\nThe thread count of realization-parallel loops is read from DRONEMOB_THREADS (default 1); "
        "results do not depend on it.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("kind", choices=KINDS, help="experiment to run")
    parser.add_argument("--config", required=True, help="YAML experiment document")
    parser.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed; overrides the document's seed")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind)
        if cfg.kind != args.kind:
            raise ConfigError(f"kind: document says {cfg.kind!r} but {args.kind!r} was requested")
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed: must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        from .experiments import run_experiment, write_outputs

        table = run_experiment(cfg)
        csv_path, json_path = write_outputs(table, args.out)
    except (ConfigError, ParameterError) as exc:
        print(f"dronemob: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        extra = f" (residual {exc.residual:.3g})" if exc.residual is not None else ""
        print(f"dronemob: numerical failure: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(csv_path)
    print(json_path)
    if cfg.kind == "validate-all":
        failed = table.meta.get("failed_criteria", [])
        print("all checks passed" if not failed else f"failed criteria: {failed}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
