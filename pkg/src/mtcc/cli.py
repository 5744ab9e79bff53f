"""Command-line entry point: ``mtcc <subcommand> [options]``.

Every training subcommand writes ``checkpoint.json``, ``curve.csv`` and
``manifest.json`` into ``--out-dir``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from .a2c import TrainConfig, train_single
from .checkpoint import load_checkpoint, save_checkpoint
from .distill import DistillConfig, train_distill, train_distill_multitask
from .envs import SIX_VARIANTS, VARIANT_NAMES
from .evaluation import format_reports, write_curve
from .nn import NonFiniteError
from .trainers import evaluate_matrix, train_vanilla_multitask, transfer_and_finetune


class ConfigError(ValueError):
    pass


def read_config_file(path) -> dict:
    """Flat ``key: value`` file (YAML syntax)."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise ConfigError(f"{path}: expected a flat mapping of key: value pairs")
    return data


def build_config(cls, args, extra: dict | None = None):
    values = read_config_file(args.config) if args.config else {}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys for {cls.__name__}: {', '.join(sorted(unknown))}")
    if args.seed is not None:
        values["seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        values["total_env_steps"] = args.steps
    if getattr(args, "eval_deterministic", False):
        values["eval_deterministic"] = True
    values.update(extra or {})
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _env_list(text: str | None, default) -> list[str]:
    names = list(default) if not text else [s.strip() for s in text.split(",") if s.strip()]
    for n in names:
        if n not in VARIANT_NAMES:
            raise ConfigError(f"unknown environment {n!r}; valid names: {', '.join(VARIANT_NAMES)}")
    return names


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "package": pkg}


def _write_outputs(args, ckpt, rows, config, started: float, extra_manifest=None):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out / "checkpoint.json")
    write_curve(rows, out / "curve.csv")
    manifest = {
        "subcommand": args.command,
        "argv": args.argv,
        "config": dataclasses.asdict(config),
        "seed": config.seed,
        "versions": _versions(),
        "elapsed_s": time.perf_counter() - started,
    }
    manifest.update(extra_manifest or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out / 'checkpoint.json'}, {out / 'curve.csv'}, {out / 'manifest.json'}")


def _clock(args):
    return time.perf_counter if args.record_wall_clock else None


def cmd_envs(args) -> int:
    for name in VARIANT_NAMES:
        print(name)
    return 0


def cmd_train(args) -> int:
    config = build_config(TrainConfig, args)
    env = _env_list(args.env, ["Base"])[0]
    started = time.perf_counter()
    ckpt, rows = train_single(env, config, _clock(args))
    _write_outputs(args, ckpt, rows, config, started, {"env": env})
    return 0


def cmd_multitask(args) -> int:
    config = build_config(TrainConfig, args)
    envs = _env_list(args.envs, SIX_VARIANTS)
    started = time.perf_counter()
    ckpt, rows = train_vanilla_multitask(envs, config, args.steps_per_visit, _clock(args))
    _write_outputs(args, ckpt, rows, config, started, {"envs": envs})
    return 0


def cmd_distill(args) -> int:
    config = build_config(DistillConfig, args)
    teachers = [load_checkpoint(p) for p in args.teachers]
    started = time.perf_counter()
    if args.multitask:
        envs = _env_list(args.envs, SIX_VARIANTS)
        ckpt, rows = train_distill_multitask(envs, teachers, config, _clock(args))
        config = config.replace(p_student=1.0)
    else:
        if len(teachers) != 1:
            raise ConfigError("single-environment distillation takes exactly one teacher")
        envs = _env_list(args.envs, teachers[0].env_names or ["Base"])[:1]
        ckpt, rows = train_distill(envs[0], teachers[0], config, _clock(args))
    _write_outputs(args, ckpt, rows, config, started,
                   {"envs": envs, "teachers": [str(p) for p in args.teachers]})
    return 0


def cmd_finetune(args) -> int:
    config = build_config(TrainConfig, args)
    source = load_checkpoint(args.source)
    env = _env_list(args.env, [])[0] if args.env else None
    if env is None:
        raise ConfigError("finetune needs --env (the target environment)")
    started = time.perf_counter()
    ckpt, rows = transfer_and_finetune(source, env, config, args.full_network, _clock(args))
    _write_outputs(args, ckpt, rows, config, started, {"source": str(args.source), "env": env})
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    envs = _env_list(args.envs, ckpt.env_names or ["Base"])
    seed = 0 if args.seed is None else args.seed
    reports = evaluate_matrix(ckpt, envs, args.n_rollouts, seed, args.eval_deterministic)
    print(format_reports(reports))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = [dataclasses.asdict(r) for r in reports]
        (out / "eval.json").write_text(json.dumps(payload, indent=1) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtcc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default: str | None = "runs/latest"):
        p.add_argument("--config", help="flat key: value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", default=out_default)
        p.add_argument("--eval-deterministic", action="store_true",
                       help="evaluate with the mean action instead of sampling")

    def training(p):
        common(p)
        p.add_argument("--steps", type=int, help="environment steps (per environment)")
        p.add_argument("--record-wall-clock", action="store_true",
                       help="write real timings to curve.csv (breaks byte-reproducibility)")

    p = sub.add_parser("envs", help="list environment variants")
    p.set_defaults(func=cmd_envs)

    p = sub.add_parser("train", help="single-environment A2C")
    training(p)
    p.add_argument("--env", default="Base")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("multitask", help="vanilla multi-task A2C")
    training(p)
    p.add_argument("--envs", help="comma-separated variant names (default: the six variants)")
    p.add_argument("--steps-per-visit", type=int)
    p.set_defaults(func=cmd_multitask)

    p = sub.add_parser("distill", help="distil teacher checkpoint(s) into a student")
    training(p)
    p.add_argument("--teachers", nargs="+", required=True, help="teacher checkpoint paths")
    p.add_argument("--envs", help="comma-separated variant names, one per teacher")
    p.add_argument("--multitask", action="store_true", help="one student head per teacher")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("finetune", help="transfer a checkpoint to a new environment")
    training(p)
    p.add_argument("--source", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--full-network", action="store_true", help="train every layer")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint over 20 sampled rollouts per env")
    common(p, out_default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--envs")
    p.add_argument("--n-rollouts", type=int, default=20)
    p.set_defaults(func=cmd_eval)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    try:
        return args.func(args)
    except (ValueError, NonFiniteError, KeyError, FileNotFoundError) as e:
        print(f"mtcc {args.command}: error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
