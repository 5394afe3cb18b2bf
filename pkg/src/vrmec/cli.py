"""Command line entry point: ``vrmec <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import harness
from .config import ConfigError, ExperimentConfig, load_config, override


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
    p.add_argument("--algorithm", choices=["cdqn", "ddqn", "cac", "dac", "nearest"])
    p.add_argument("--scheme", choices=["mec-no-migration", "mec-migration", "vr-device"])
    p.add_argument("--prediction", type=_bool, metavar="BOOL")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key by dotted path, e.g. agent.episodes=10")


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        cfg = override(cfg, key.strip(), yaml.safe_load(raw))
    if args.seed is not None:
        cfg = override(cfg, "seed", args.seed)
    if args.algorithm:
        cfg = override(cfg, "agent.algorithm", args.algorithm)
    if args.scheme:
        cfg = override(cfg, "scheme", args.scheme)
    if args.prediction is not None:
        cfg = override(cfg, "prediction", args.prediction)
    return cfg


def cmd_train_predictor(args) -> int:
    cfg = resolve_config(args)
    if cfg.predictor.kind != "gru":
        raise ConfigError("train-predictor needs predictor.kind = gru")
    args.out.mkdir(parents=True, exist_ok=True)
    run = harness.make_predictor(cfg)
    run.curve.write_csv(args.out / "predictor_curve.csv")
    harness.save_predictor(run.predictor, args.out)
    print(f"held-out accuracy {run.accuracy:.4f}; wrote {args.out}")
    return 0


def cmd_train_agent(args) -> int:
    cfg = resolve_config(args)
    res = harness.run_experiment(cfg, args.out)
    window = cfg.harness.final_window
    print(f"{cfg.agent.algorithm}: mean reward of last {min(window, len(res.metrics))} "
          f"episodes {res.final_reward(window):.4f}; wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    res = harness.evaluate(cfg, args.out, checkpoint_dir=args.checkpoints,
                           episodes=args.episodes)
    print(f"{cfg.agent.algorithm}: mean episode reward "
          f"{res.final_reward(len(res.metrics)):.4f}; wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    values = [yaml.safe_load(v) for v in args.values.split(",") if v.strip()]
    rows = harness.run_sweep(cfg, args.axis, values, args.out)
    for row in rows:
        print(",".join(row))
    return 0


def cmd_report(args) -> int:
    rows = harness.compare_report(args.metrics, window=args.window)
    text = harness.format_report(rows)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vrmec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-predictor", help="train the GRU FoV predictor")
    _common(p, "runs/predictor")
    p.set_defaults(func=cmd_train_predictor)

    p = sub.add_parser("train-agent", help="train one controller and log metrics")
    _common(p, "runs/agent")
    p.set_defaults(func=cmd_train_agent)

    p = sub.add_parser("evaluate", help="greedy rollouts without learning")
    _common(p, "runs/eval")
    p.add_argument("--checkpoints", type=Path, help="directory written by train-agent")
    p.add_argument("--episodes", type=int, help="number of evaluation episodes")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="one experiment per value of a config key")
    _common(p, "runs/sweep")
    p.add_argument("--axis", required=True, help="dotted config key, e.g. rendering.uplink_latency")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="rank algorithms by mean final reward")
    p.add_argument("metrics", nargs="+", type=Path, help="metrics.csv files or run directories")
    p.add_argument("--window", type=int, default=50, help="final episodes averaged per run")
    p.add_argument("--out", type=Path, help="also write report.csv here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
