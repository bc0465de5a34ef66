"""``fbhebb`` command line: run, probe, matrix, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional


from . import acceptance, harness
from .config import ConfigError, RunConfig, default_out_root, load_or_default
from .core import NoFeedbackPathway, load_snapshot, probe_prediction, probe_regeneration
from .metrics import ACTIVITY_THRESHOLD, selectivity
from .protocols import PAIRS, ProtocolError, make_sample

log = logging.getLogger("fbhebb")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI-style run config; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--arch", choices=["2ff2fb", "3ff3fb", "2ff"])
    p.add_argument("--variant", choices=["full", "no-decay", "no-cov", "no-sup"])
    p.add_argument("--regime", choices=["sequential", "interleaved"])
    p.add_argument("--epochs", type=int, help="epochs per phase (default 10)")
    p.add_argument("--injection", choices=["input", "preactivation"])
    p.add_argument("--granularity", choices=["sample", "epoch-mean"])
    p.add_argument("--feedback-target", dest="feedback_target", choices=["drive", "activity"])
    p.add_argument("--snapshots", choices=["none", "phases", "all"])
    p.add_argument("--out", type=Path, help="output directory (default: $FBHEBB_OUT or ./runs)")


def _config_from(args: argparse.Namespace) -> RunConfig:
    base = load_or_default(args.config)
    keys = ("seed", "arch", "variant", "regime", "epochs", "injection", "granularity", "feedback_target", "snapshots")
    return base.with_overrides(**{k: getattr(args, k, None) for k in keys})


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from(args)
    out = args.out or default_out_root() / config.run_name
    try:
        result = harness.run(config)
    except ProtocolError as exc:
        print(f"error: run failed at {exc}", file=sys.stderr)
        return EXIT_FAIL
    harness.write_artifacts(result, out)
    print(f"run {config.run_name} -> {out}")
    print(harness.format_run_report(result.summary))
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    net = load_snapshot(args.snapshot)
    pair = PAIRS[args.pair]
    x, t = make_sample(pair)
    try:
        if args.probe == "predict":
            vec, targets = probe_prediction(net, x), pair.target_sites
        else:
            vec, targets = probe_regeneration(net, t), {pair.input_site}
    except NoFeedbackPathway as exc:
        print(json.dumps({"probe": args.probe, "pair": args.pair, "status": "unsupported", "error": str(exc)}))
        print(f"error: regeneration unsupported: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sel = selectivity(vec, targets, ACTIVITY_THRESHOLD)
    print("site  " + " ".join(f"{s:>6d}" for s in range(1, 11)))
    print("value " + " ".join(f"{v:6.3f}" for v in vec))
    print(json.dumps({
        "probe": args.probe,
        "pair": args.pair,
        "status": "ok",
        "values": vec.tolist(),
        "target_sites": sorted(targets),
        "selective": sel.is_selective,
        "margin": sel.margin,
    }))
    return EXIT_OK


def cmd_matrix(args: argparse.Namespace) -> int:
    base = _config_from(args)
    seeds = harness.parse_seeds(args.seeds)
    out = args.out or default_out_root() / args.name
    report = harness.run_matrix(args.name, seeds, out, base=base, workers=args.workers)
    print(harness.format_grid(report))
    print(f"grid report -> {out / f'grid_{args.name}.json'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    seeds = harness.parse_seeds(args.seeds)
    try:
        results = acceptance.evaluate(args.run_dirs, seeds)
    except acceptance.NoArtifacts as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = acceptance.format_report(results)
    print(text)
    if args.json:
        args.json.write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    if args.strict and not all(r.passed for r in results):
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbhebb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one network and write its artifacts")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("probe", help="probe a saved network snapshot")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--probe", choices=["predict", "regenerate"], default="predict")
    p.add_argument("--pair", choices=sorted(PAIRS), default="A")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("matrix", help="run a built-in experiment grid")
    p.add_argument("name", choices=["controls", "ablations", "acceptance"])
    p.add_argument("--seeds", default="1-5")
    p.add_argument("--workers", type=int, default=1)
    _add_run_flags(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("report", help="evaluate the acceptance criteria over run artifacts")
    p.add_argument("run_dirs", type=Path, nargs="+")
    p.add_argument("--seeds", default="1-5")
    p.add_argument("--json", type=Path, help="also write the report as JSON")
    p.add_argument("--strict", action="store_true", help="exit 1 if any criterion fails")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
