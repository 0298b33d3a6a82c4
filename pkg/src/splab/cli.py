"""Command-line front end: ``splab <kind> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from .config import EXPERIMENT_KINDS, ConfigError, ExperimentConfig
from .runner import EXIT_CONFIG, EXIT_OK, run

NL_PRESETS = {
    "pure_power": None,
    "f1": {"kind": "power_sum", "powers": [2.5, 3.0, 3.5]},
    "f2": {"kind": "power_difference", "powers": [3.0, 2.5]},
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", help="YAML experiment file")
        sp.add_argument("--out", help="output directory (overrides config 'output')")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--p", type=float)
        sp.add_argument("--c", type=float)
        sp.add_argument("--omega", type=float)
        sp.add_argument("--nonlinearity", choices=sorted(NL_PRESETS),
                        help="preset nonlinearity (overrides the config block)")
    sp = sub.add_parser("plots", help="emit SVG figures from a results directory")
    sp.add_argument("results")
    sp.add_argument("--out", help="figure directory (default RESULTS/plots)")
    return ap


def _build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    data["kind"] = args.command
    if args.nonlinearity is not None:
        block = NL_PRESETS[args.nonlinearity]
        data["nonlinearity"] = block
        if block is not None:
            data["p"] = max(block["powers"])
    for key in ("seed", "threads", "p", "c", "omega"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.out is not None:
        data["output"] = args.out
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plots":
        from .plots import emit_plots
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            paths = emit_plots(args.results, args.out)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        for p in paths:
            print(p)
        return EXIT_OK
    try:
        cfg = _build_config(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run(cfg)
    print(json.dumps({"status": result.status, "out": str(result.out_dir)}))
    return result.status


if __name__ == "__main__":
    sys.exit(main())
