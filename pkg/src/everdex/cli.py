"""Command-line surface: gen, run, eval, zs, dict-build, report.

Every failure path exits nonzero with a single machine-parseable line on
stderr of the form ``<category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import MODES, SynthConfig, load_config_file
from .dictionary import STRATEGIES
from .errors import ConfigError, EverdexError
from .io import format_report, read_report_json, verify_report_consistency, write_report_json
from .runner import (
    build_bank_from_file,
    run_eval,
    run_generate,
    run_training,
    run_zs,
    save_bank,
)
from .synthdata import format_summary


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="everdex",
        description="Continual script-aware embedding retrieval: data generation, "
        "staged training, evaluation, and dictionary construction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate the synthetic benchmark dataset")
    p_gen.add_argument("--config", help="synthetic data config (JSON)")
    p_gen.add_argument("--seed", type=int, help="override the config seed")
    p_gen.add_argument("--out", required=True, help="output dataset directory")

    p_run = sub.add_parser("run", help="execute the staged continual protocol")
    p_run.add_argument("--config", required=True, help="run config (JSON)")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--mode", choices=MODES, help="override the run mode")
    p_run.add_argument("--out", help="output directory (reports + checkpoints)")

    p_eval = sub.add_parser("eval", help="recompute a checkpoint's accuracy row")
    p_eval.add_argument("checkpoint", help="stage checkpoint archive")
    p_eval.add_argument("data", help="dataset directory (manifest + embeddings)")
    p_eval.add_argument("--out", help="write the result as JSON here")

    p_zs = sub.add_parser("zs", help="zero-shot text-dictionary matching")
    p_zs.add_argument("checkpoint", help="stage checkpoint archive")
    p_zs.add_argument("data", help="dataset directory (manifest + embeddings)")
    p_zs.add_argument("--out", help="write the result as JSON here")

    p_dict = sub.add_parser("dict-build", help="build a prototype bank from an embeddings file")
    p_dict.add_argument("embeddings", help="embeddings JSONL file with labeled images")
    p_dict.add_argument("--mode", choices=STRATEGIES, default="auto", help="prototype strategy")
    p_dict.add_argument("--seed", type=int, default=0)
    p_dict.add_argument("--out", help="write the bank archive here (npz)")

    p_rep = sub.add_parser("report", help="validate and pretty-print a metrics report")
    p_rep.add_argument("report", help="report JSON file")

    return parser


def _cmd_gen(args) -> int:
    config = load_config_file(args.config, "synth") if args.config else SynthConfig()
    if args.seed is not None:
        config.seed = args.seed
    config.validate()
    summary = run_generate(config, args.out)
    print(format_summary(summary))
    print(f"dataset written to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = load_config_file(args.config, "run")
    if args.seed is not None:
        config.seed = args.seed
    if args.mode is not None:
        config.mode = args.mode
    config.validate()
    out_dir = args.out or config.out_dir
    if not out_dir:
        raise ConfigError("run needs an output directory (--out or config out_dir)")
    report, checkpoints = run_training(config, out_dir)
    print(format_report(report))
    print(f"report and {len(checkpoints)} checkpoints written to {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    result = run_eval(args.checkpoint, args.data)
    print(
        f"stage {result['checkpoint_stage']} scripts: " + " ".join(result["scripts"])
    )
    print("top1:  " + " ".join(f"{v:6.4f}" for v in result["top1"]))
    print("top10: " + " ".join(f"{v:6.4f}" for v in result["top10"]))
    print(f"aa@1={result['aa']['top1']:.4f} aa@10={result['aa']['top10']:.4f}")
    if args.out:
        write_report_json(args.out, result)
    return 0


def _cmd_zs(args) -> int:
    result = run_zs(args.checkpoint, args.data)
    print(
        f"zero-shot over {result['queries']} queries, {result['candidates']} candidates: "
        f"ZS@1={result['zs1']:.4f} ZS@20={result['zs20']:.4f}"
    )
    if args.out:
        write_report_json(args.out, result)
    return 0


def _cmd_dict_build(args) -> int:
    bank, summary = build_bank_from_file(args.embeddings, strategy=args.mode, seed=args.seed)
    print(json.dumps(summary, indent=2))
    if args.out:
        save_bank(args.out, bank)
        print(f"bank written to {args.out}")
    return 0


def _cmd_report(args) -> int:
    report = read_report_json(args.report)
    verify_report_consistency(report)
    print(format_report(report))
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "run": _cmd_run,
    "eval": _cmd_eval,
    "zs": _cmd_zs,
    "dict-build": _cmd_dict_build,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EverdexError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
