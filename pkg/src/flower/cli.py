"""Command-line entry points.

Subcommands: distort, train, sample, evaluate, toy, sweep. Exit codes:
0 on success, 1 when a run fails, 2 for configuration errors. The
FLOWER_OUT_ROOT environment variable prefixes relative output paths.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .runner import RunFailure, run, sample_from_checkpoint, sweep

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _resolve_out(path_like) -> Path:
    path = Path(path_like)
    if path.is_absolute():
        return path
    root = os.environ.get("FLOWER_OUT_ROOT", ".")
    return Path(root) / path


_TOY_TASK_NAMES = ("toy-fm", "toy-score", "toy-flower-fm", "toy-flower-score",
                   "toy-flower-fm-timeadaptive")


def _load(args, default_task: str | None = None) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if args.config is not None:
        config = load_config(args.config, overrides)
    else:
        config = ExperimentConfig(**overrides).validate()
    if default_task == "toy":
        # train/sample/toy accept any toy-* task from the config
        if config.task not in _TOY_TASK_NAMES:
            raise ConfigError(
                f"this subcommand needs a toy-* task, config says {config.task!r}"
            )
    elif default_task is not None:
        # the file-pipeline subcommands pin their own task name
        config.task = default_task
        config.validate()
    return config


def _out_dir(args, config: ExperimentConfig) -> Path:
    return _resolve_out(args.out if args.out else config.out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flower",
        description="Gaussian-guidance restoration experiments, distortion "
                    "synthesis, and objective evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=False):
        p.add_argument("--config", required=config_required, default=None,
                       help="experiment config file (key=value sections or JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")

    p_distort = sub.add_parser("distort", help="apply the distortion pipeline to a WAV folder")
    p_distort.add_argument("--in", dest="in_dir", required=True, help="clean WAV directory")
    p_distort.add_argument("--noise", dest="noise_dir", required=True, help="noise WAV directory")
    add_common(p_distort)

    p_train = sub.add_parser("train", help="train the configured toy model and checkpoint it")
    add_common(p_train, config_required=True)

    p_sample = sub.add_parser("sample", help="restore the seeded eval split from a checkpoint")
    p_sample.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    add_common(p_sample, config_required=True)

    p_eval = sub.add_parser("evaluate", help="LSD/SI-SDR report over matched WAV pairs")
    p_eval.add_argument("--ref", dest="ref_dir", required=True, help="reference WAV directory")
    p_eval.add_argument("--est", dest="est_dir", required=True, help="estimate WAV directory")
    add_common(p_eval)

    p_toy = sub.add_parser("toy", help="run the configured toy benchmark end to end")
    add_common(p_toy, config_required=True)

    p_sweep = sub.add_parser("sweep", help="repeat a run over a grid of one numeric field")
    p_sweep.add_argument("--param", required=True, help="config field to sweep (e.g. sampler_steps)")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    add_common(p_sweep, config_required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE


def _dispatch(args) -> int:
    if args.command == "distort":
        config = _load(args, default_task="distort")
        record = run(config, _out_dir(args, config),
                     io_paths={"in_dir": args.in_dir, "noise_dir": args.noise_dir})
    elif args.command == "evaluate":
        config = _load(args, default_task="evaluate")
        out = args.out if args.out else "report.csv"
        out = _resolve_out(out)
        if out.suffix == ".csv":
            io_paths = {"ref_dir": args.ref_dir, "est_dir": args.est_dir,
                        "report_path": out}
            record = run(config, out.parent, io_paths=io_paths)
        else:
            record = run(config, out, io_paths={"ref_dir": args.ref_dir,
                                                "est_dir": args.est_dir})
    elif args.command == "train":
        config = _load(args, default_task="toy")
        record = run(config, _out_dir(args, config), checkpoint=True)
    elif args.command == "sample":
        config = _load(args, default_task="toy")
        record = sample_from_checkpoint(config, args.checkpoint, _out_dir(args, config))
    elif args.command == "toy":
        config = _load(args, default_task="toy")
        record = run(config, _out_dir(args, config))
    elif args.command == "sweep":
        config = _load(args)
        values = [part.strip() for part in args.values.split(",") if part.strip()]
        if not values:
            raise ConfigError("--values must list at least one value")
        records = sweep(config, args.param, values, _out_dir(args, config))
        n_failed = sum(1 for r in records if r.status != "ok")
        print(f"sweep finished: {len(records) - n_failed}/{len(records)} runs ok")
        return EXIT_RUN_FAILURE if n_failed == len(records) else EXIT_OK
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {args.command!r}")
    print(f"{record.task}: {record.status}; metrics: {record.metrics}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
