"""Command-line entry point: ``vla-rewards {score,reward,train-toy,report}``.

Configuration files are JSON objects with optional sections ``reward``,
``grpo``, ``eval`` and ``train``. Keys inside a section are the field names
of the matching config class; ``reward.alaf`` holds the ALAF weights::

    {"reward": {"w_task": 0.9, "w_format": 0.1, "alaf": {"lambda_theta": 10}},
     "grpo": {"clip_eps": 0.2, "kl_beta": 0.04},
     "eval": {"penalty_distance": 300}}

Exit codes: 0 success, 1 bad input records, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import sys

from .frechet import AlafConfig
from .grpo import GrpoConfig
from .harness import (
    EvalConfig,
    SchemaViolation,
    build_report,
    format_report,
    load_records,
    load_scores,
    score_records,
    write_scores,
)
from .response_format import KINDS
from .rewards import RewardConfig, composite_reward
from . import toy_trainer

EXIT_OK, EXIT_SCHEMA, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    iterations: int = 200
    group_size: int = toy_trainer.DEFAULT_GROUP_SIZE
    lr: float = toy_trainer.DEFAULT_LR
    inner_steps: int = toy_trainer.DEFAULT_INNER_STEPS
    max_grad_norm: float | None = toy_trainer.DEFAULT_MAX_GRAD_NORM
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.group_size < 2 or self.inner_steps < 1:
            raise ValueError("need iterations >= 0, group_size >= 2 and inner_steps >= 1")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr!r}")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ValueError(f"max_grad_norm must be > 0, got {self.max_grad_norm!r}")


SECTIONS = ("reward", "grpo", "eval", "train")


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | None) -> dict:
    """Read a config file into ``{"reward": RewardConfig, "grpo": ..., "eval": ..., "train": ...}``."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    reward = dict(raw.get("reward", {}))
    if "alaf" in reward:
        reward["alaf"] = _build(AlafConfig, reward["alaf"], "reward.alaf")
    return {
        "reward": _build(RewardConfig, reward, "reward"),
        "grpo": _build(GrpoConfig, raw.get("grpo", {}), "grpo"),
        "eval": _build(EvalConfig, raw.get("eval", {}), "eval"),
        "train": _build(TrainConfig, raw.get("train", {}), "train"),
    }


def _override(cfg, **changes):
    changes = {k: v for k, v in changes.items() if v is not None}
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="\n")


def cmd_score(args, cfg) -> int:
    ecfg = _override(cfg["eval"], resample_k=args.resample_k, tau=args.tau, penalty_distance=args.penalty_distance)
    scores = score_records(load_records(args.input, args.kind), ecfg)
    write_scores(scores, args.out)
    sys.stdout.write(format_report(build_report(scores, ecfg.tau), "table"))
    return EXIT_OK


def cmd_reward(args, cfg) -> int:
    records = sorted(load_records(args.input, args.kind), key=lambda r: r.id)
    with _open_out(args.out) as fh:
        for rec in records:
            r = composite_reward(rec.pred_raw, rec.gt, rec.kind, cfg["reward"])
            fh.write(json.dumps({"id": rec.id, "reward": r}) + "\n")
    return EXIT_OK


def cmd_train_toy(args, cfg) -> int:
    tcfg = _override(cfg["train"], iterations=args.iters, group_size=args.group_size, seed=args.seed, lr=args.lr)
    gcfg = _override(cfg["grpo"], clip_eps=args.clip_eps, kl_beta=args.kl_beta)
    tasks = toy_trainer.default_tasks()
    policy = toy_trainer.SoftmaxPolicy.uniform(len(tasks))
    ref = policy.copy()
    try:
        log = toy_trainer.train(
            tasks, policy, gcfg, cfg["reward"], tcfg.iterations, tcfg.seed,
            group_size=tcfg.group_size, lr=tcfg.lr, inner_steps=tcfg.inner_steps,
            max_grad_norm=tcfg.max_grad_norm,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with _open_out(args.out) as fh:
        fh.write(log.to_csv())
    summary = log.summary()
    summary["max_state_tv_to_ref"] = float(toy_trainer.total_variation(policy, ref).max())
    summary["config"] = {"train": dataclasses.asdict(tcfg), "grpo": dataclasses.asdict(gcfg)}
    # stdout carries the summary record unless the log itself went there
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    tau = cfg["eval"].tau if args.tau is None else args.tau
    rows = build_report(load_scores(args.scores), _override(cfg["eval"], tau=tau).tau)
    with _open_out(args.out) as fh:
        fh.write(format_report(rows, args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vla-rewards", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", help="score prediction records and write per-record scores")
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--config")
    s.add_argument("--resample-k", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--penalty-distance", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    r = sub.add_parser("reward", help="print the composite reward of each record")
    r.add_argument("--kind", choices=KINDS, required=True)
    r.add_argument("--input", required=True)
    r.add_argument("--config")
    r.add_argument("--out", help="output file (default stdout)")
    r.set_defaults(func=cmd_reward)

    t = sub.add_parser("train-toy", help="run the toy GRPO trainer and write its log as CSV")
    t.add_argument("--iters", type=int)
    t.add_argument("--group-size", type=int)
    t.add_argument("--clip-eps", type=float)
    t.add_argument("--kl-beta", type=float)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--config")
    t.add_argument("--out", help="CSV log file (default stdout)")
    t.set_defaults(func=cmd_train_toy)

    o = sub.add_parser("report", help="aggregate a scores file into a report")
    o.add_argument("--scores", required=True)
    o.add_argument("--format", choices=("table", "delimited"), default="table")
    o.add_argument("--tau", type=float)
    o.add_argument("--config")
    o.add_argument("--out", help="output file (default stdout)")
    o.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaViolation as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
