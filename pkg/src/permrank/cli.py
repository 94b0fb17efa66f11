"""Command-line entry points: analyze, simulate, cardinality."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .config import AnalysisConfig, run_analyze
from .errors import ConfigError, DataError, DegenerateAnalysisError
from .npc import COMBINER_KINDS, Combiner
from .perm_engine import DEFAULT_EXHAUSTIVE_CAP, cardinality
from .report import dumps, render_text, validate_report
from .simulate import SimulationScenario, run_simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permrank",
        description="Rank multivariate populations with directional "
                    "permutation tests and nonparametric combination.")
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="rank the populations of a dataset")
    an.add_argument("--data", required=True, help="delimiter-separated table")
    an.add_argument("--config", required=True, help="dataset config (YAML/JSON)")
    an.add_argument("--alpha", type=float, default=0.05)
    an.add_argument("--B", type=int, default=2000, help="replication count")
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--strategy", choices=("pip", "npip", "exhaustive"),
                    default="pip")
    an.add_argument("--combiner", choices=COMBINER_KINDS, default="fisher")
    an.add_argument("--adjust", choices=("none", "holm", "shaffer"),
                    default="holm")
    an.add_argument("--workers", type=int, default=1)
    an.add_argument("--output", choices=("text", "structured"),
                    default="text")
    an.add_argument("--expand-frequencies", metavar="COLUMN", default=None,
                    help="treat COLUMN as a row-replication count")
    an.add_argument("--exhaustive-cap", type=int,
                    default=DEFAULT_EXHAUSTIVE_CAP)
    an.add_argument("--out", default=None, help="write the report here")

    sim = sub.add_parser("simulate", help="Monte Carlo validation harness")
    sim.add_argument("--scenario", required=True,
                     help="scenario document (YAML/JSON)")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--output", choices=("text", "structured"),
                     default="structured")
    sim.add_argument("--out", default=None)

    card = sub.add_parser("cardinality",
                          help="size of a permutation strategy's orbit")
    card.add_argument("--strategy", required=True,
                      choices=("pip", "npip", "pcsp", "pusp"))
    card.add_argument("--sizes", required=True,
                      help="comma-separated group sizes, e.g. 4,4")
    card.add_argument("--pair", default=None,
                      help="pair of group positions for pip, e.g. 0,1")
    return parser


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _cmd_analyze(args) -> int:
    cfg = AnalysisConfig(
        data=args.data, config=args.config, alpha=args.alpha, B=args.B,
        seed=args.seed, strategy=args.strategy,
        combiner=Combiner(kind=args.combiner), adjust=args.adjust,
        workers=args.workers, output=args.output,
        expand_frequencies=args.expand_frequencies,
        exhaustive_cap=args.exhaustive_cap)
    report = run_analyze(cfg)
    validate_report(report)
    _emit(dumps(report) if cfg.output == "structured" else render_text(report),
          args.out)
    return EXIT_OK


def _simulation_text(summary: dict) -> str:
    lines = ["permrank simulation summary", "=" * 27]
    scn = summary["scenario"]
    lines.append(f"scenario: C={scn['C']}, p={scn['p']}, R={scn['R']}, "
                 f"B={scn['B']}, alpha={scn['alpha']}, "
                 f"distribution={scn['distribution']}")
    lines.append("expected ranking: " + ", ".join(
        f"{k}={v}" for k, v in sorted(summary["expected_ranking"].items())))
    for key in ("reject_any_rate", "all_tied_rate", "correct_ranking_rate"):
        lines.append(f"{key}: {summary[key]:.6g}")
    lines.append("rank accuracy: " + ", ".join(
        f"{k}={v:.6g}" for k, v in sorted(summary["rank_accuracy"].items())))
    return "\n".join(lines) + "\n"


def _cmd_simulate(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a mapping")
    scn = SimulationScenario.from_mapping(doc)
    summary = run_simulate(scn, workers=args.workers)
    if args.output == "structured":
        _emit(json.dumps(summary, sort_keys=True, indent=2), args.out)
    else:
        _emit(_simulation_text(summary), args.out)
    return EXIT_OK


def _cmd_cardinality(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    pair = None
    if args.pair is not None:
        parts = [int(x) for x in args.pair.split(",")]
        if len(parts) != 2:
            raise ConfigError("--pair needs two comma-separated positions")
        pair = (parts[0], parts[1])
    if args.strategy == "pip" and pair is None:
        pair = (0, 1)
    print(cardinality(args.strategy, sizes, pair=pair))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_cardinality(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateAnalysisError as exc:
        print(f"degenerate analysis: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
