"""Command-line entry point: ``carpetguard <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import orchestrator as orch
from .evaluation import format_value
from .exceptions import CarpetGuardError
from .fabric_sim import ATTACK_INTENSITIES


def _add_common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--representation", choices=("json", "nlr"))
    p.add_argument("--classifier", choices=("oracle", "remote"))
    p.add_argument("--dataset", dest="dataset_path")
    p.add_argument("--index-dir", dest="index_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carpetguard", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-dataset", help="simulate scenarios and write a labelled dataset")
    _add_common(p)
    p.add_argument("--records", dest="target_records", type=int)
    p.add_argument("--mode", dest="dataset_mode", choices=("mixed", "benign"))

    p = sub.add_parser("build-index", help="split the dataset and build per-class indices")
    _add_common(p)

    p = sub.add_parser("evaluate", help="classify the test split and write a metrics report")
    _add_common(p)
    p.add_argument("--report", dest="report_path")

    p = sub.add_parser("run-sim", help="run the monitoring/mitigation loop against the simulator")
    _add_common(p)
    p.add_argument("--intensity", type=float,
                   help=f"aggregate attack pps, 0 for attack-free (reference rates: {ATTACK_INTENSITIES})")
    p.add_argument("--duration", dest="sim_duration_s", type=float)
    p.add_argument("--attack-start", dest="attack_start_s", type=float)
    p.add_argument("--attack-end", dest="attack_end_s", type=float)
    p.add_argument("--no-mitigation", dest="mitigation", action="store_false", default=None)
    p.add_argument("--realtime", dest="realtime_factor", type=float,
                   help="speed-up factor mapping logical to wall time")
    p.add_argument("--run-log", dest="run_log_path")

    p = sub.add_parser("report", help="compare run logs across operating conditions")
    p.add_argument("logs", nargs="+", metavar="CONDITION=PATH")
    return parser


_NON_CONFIG = {"command", "verbose", "config", "logs"}


def _config(args) -> orch.RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    return orch.load_config(args.config, **overrides)


def _print_kv(mapping):
    for key, value in mapping.items():
        print(f"{key} = {format_value(value)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            paths = {}
            for item in args.logs:
                condition, sep, path = item.partition("=")
                if not sep:
                    raise ValueError(f"expected CONDITION=PATH, got {item!r}")
                paths[condition] = path
            _print_kv(orch.cmd_report(paths))
            return 0
        cfg = _config(args)
        if args.command == "generate-dataset":
            summary = orch.cmd_generate_dataset(cfg)
            print(json.dumps(summary, indent=2))
        elif args.command == "build-index":
            manifest = orch.cmd_build_index(cfg)
            _print_kv({"index_dir": cfg.index_dir, "fingerprint": manifest["fingerprint"],
                       "benign": manifest["class_counts"]["0"], "attack": manifest["class_counts"]["1"],
                       "test": manifest["test_count"]})
        elif args.command == "evaluate":
            report = orch.cmd_evaluate(cfg)
            print(open(cfg.report_path).read(), end="")
            if report.n_unclassified:
                print(f"# {report.n_unclassified} windows unclassified", file=sys.stderr)
        elif args.command == "run-sim":
            result = orch.cmd_run_sim(cfg)
            _print_kv({"run_log": cfg.run_log_path, "windows": len({r["timestamp"] for r in result.rows}),
                       "install_drop": len(result.installs), "remove_drop": len(result.removals)})
    except (OSError, ValueError, CarpetGuardError) as exc:
        print(f"carpetguard: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
