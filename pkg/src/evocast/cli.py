"""Command-line entry points.

Every failure path prints exactly one line to stderr of the form
``error: <code>: <message>`` and exits nonzero; success exits 0.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config, parse_ablation
from .errors import ConfigError, EvocastError
from .training import (
    evaluate_run,
    export_embeddings,
    load_run,
    predict_run,
    run_synth,
    train,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evocast", description="Temporal event-graph relation forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    p_train.add_argument("--config", required=True, help="path to a key = value config file")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument(
        "--ablation", default=None, help="comma-separated ablation flags overriding the config"
    )

    p_eval = sub.add_parser("evaluate", help="rank every query of a held-out split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", required=True, choices=["valid", "test"])
    p_eval.add_argument("--filter", required=True, choices=["raw", "time"], dest="filter_mode")
    p_eval.add_argument("--out", default=None, help="optional report file destination")

    p_pred = sub.add_parser("predict", help="top-k relations for one (subject, object, time)")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--subject", required=True)
    p_pred.add_argument("--object", required=True)
    p_pred.add_argument("--time", required=True, type=int)
    p_pred.add_argument("--topk", required=True, type=int)

    p_exp = sub.add_parser("export-embeddings", help="dump entity vectors at a trained timestamp")
    p_exp.add_argument("--checkpoint", required=True)
    p_exp.add_argument("--time", required=True, type=int)
    p_exp.add_argument("--out", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p_synth.add_argument("--spec", required=True, help="path to a key = value synthetic spec")
    p_synth.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.ablation is not None:
        cfg.ablation = parse_ablation(args.ablation)
    path, _history = train(cfg)
    print(f"checkpoint={path}")
    return 0


def _cmd_evaluate(args) -> int:
    run = load_run(args.checkpoint)
    report = evaluate_run(run, args.split, args.filter_mode, args.out)
    print(report.header())
    return 0


def _cmd_predict(args) -> int:
    run = load_run(args.checkpoint)
    ranked = predict_run(run, args.subject, args.object, args.time, args.topk)
    for rank, (name, prob) in enumerate(ranked, start=1):
        print(f"{rank}\t{name}\t{prob:.6f}")
    return 0


def _cmd_export(args) -> int:
    run = load_run(args.checkpoint)
    n = export_embeddings(run, args.time, args.out)
    print(f"exported={n}\tpath={args.out}")
    return 0


def _cmd_synth(args) -> int:
    paths = run_synth(args.spec, args.out)
    for name in ("train", "valid", "test", "planted"):
        print(f"{name}={paths[name]}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "export-embeddings": _cmd_export,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except EvocastError as exc:
        print(exc.one_line(), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
