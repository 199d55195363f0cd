"""Command-line entry point: ``eqlm train | compare | tuning-loss``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import runner
from .agents import ConfigError
from .linalg import LinalgError

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_IO = 4
EXIT_NUMERICAL = 5


def _add_train(sub):
    p = sub.add_parser("train", help="run a seeded multi-run training campaign")
    p.add_argument("--config", required=True,
                   help="flat JSON config file, or a bundled name: qnet, eqlm, heuristic-only")
    p.add_argument("--runs", type=int, help="number of runs (overrides n_runs)")
    p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    p.add_argument("--episodes", type=int, help="episodes per run (overrides n_ep)")
    p.add_argument("--out", help="output directory (overrides out)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--no-plot", action="store_true", help="skip the learning-curve figure")


def _add_compare(sub):
    p = sub.add_parser("compare", help="t-test two campaign directories")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out", help="also write report.json, comparison.csv and a figure here")


def _add_tuning(sub):
    p = sub.add_parser("tuning-loss", help="upper 95%% CI of -AUC over seeded runs")
    p.add_argument("--config", required=True)
    p.add_argument("--runs", type=int, default=8)
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqlm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)
    _add_compare(sub)
    _add_tuning(sub)
    return parser


def _resolve(args) -> runner.ExperimentConfig:
    config = runner.load_config(args.config)
    changes = {}
    if getattr(args, "runs", None) is not None and args.command == "train":
        changes["n_runs"] = args.runs
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.episodes is not None:
        changes["n_ep"] = args.episodes
    if getattr(args, "out", None) is not None:
        changes["out"] = args.out
    return config.replace(**changes) if changes else config


def cmd_train(args) -> int:
    config = _resolve(args)
    if not config.out:
        raise ConfigError("out", "no output directory given (use --out)")
    artifact = runner.run_campaign(config, jobs=args.jobs)
    out = runner.write_artifact(artifact, config.out, plot=not args.no_plot)
    s = artifact.summary
    if s:
        fm = s["final_mean"]
        print(f"{config.agent}: {config.n_runs} runs, final-{s['final_window']} mean "
              f"{fm['mean']:.1f}, auc mean {s['auc']['mean']:.0f} -> {out}")
    return 0


def cmd_compare(args) -> int:
    a = runner.load_artifact(args.a)
    b = runner.load_artifact(args.b)
    report = runner.compare(a, b, labels=(Path(args.a).name or "a", Path(args.b).name or "b"))
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n")
        la, lb = report["labels"]
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "label", "mean", "ci_low", "ci_high", "std", "n_runs", "t", "p", "verdict"])
            for name, m in report["metrics"].items():
                for label in (la, lb):
                    r = m[label]
                    w.writerow([name, label, r["mean"], r["ci_low"], r["ci_high"], r["std"],
                                r["n_runs"], m["t"], m["p"], m["verdict"]])
        from .plotting import learning_curve_figure
        learning_curve_figure({la: a.curves, lb: b.curves}, out / "learning_curves.png")
    return 0


def cmd_tuning_loss(args) -> int:
    config = _resolve(args)
    print(repr(runner.tuning_loss(config, n_runs=args.runs, jobs=args.jobs)))
    return 0


COMMANDS = {"train": cmd_train, "compare": cmd_compare, "tuning-loss": cmd_tuning_loss}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except runner.InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LinalgError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
