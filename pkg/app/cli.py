# app/cli.py
"""Command-line surface: train, ars, eval, sweep, pca, serve."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from app.config import settings
from app.errors import GoGePoError
from app.logging_setup import configure_logging
from app.runconfig import parse_config

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2

__all__ = ["dispatch", "main", "parse_config"]


class UsageError(GoGePoError):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="gogepo", description="Return-conditioned policy generator (GoGePo) and ARS baseline")
    parser.add_argument("--log-level", default=None, help="Logging level (default: LOG_LEVEL setting)")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND", parser_class=ArgumentParser)

    p = sub.add_parser("train", help="Train a policy generator")
    p.add_argument("--config", type=Path, help="Run config file (key = value)")
    p.add_argument("--seed", type=int, help="Override the config seed")
    p.add_argument("--out", type=Path, help="Output directory (default: RUNS_DIR/gogepo-<env>-seed<seed>)")
    p.add_argument("--resume", type=Path, help="Continue from a training checkpoint")

    p = sub.add_parser("ars", help="Train the ARS baseline")
    p.add_argument("--config", type=Path, help="Run config file (key = value)")
    p.add_argument("--seed", type=int, help="Override the config seed")
    p.add_argument("--out", type=Path, help="Output directory (default: RUNS_DIR/ars-<env>-seed<seed>)")

    p = sub.add_parser("eval", help="Evaluate the generated policy for one command")
    p.add_argument("--checkpoint", type=Path, required=True, help="Generator checkpoint")
    p.add_argument("--command", type=float, required=True, help="Return command")
    p.add_argument("--episodes", type=positive_int, default=10, help="Evaluation episodes (default: 10)")
    p.add_argument("--seed", type=int, default=0, help="Seed for environment resets (default: 0)")

    p = sub.add_parser("sweep", help="Commanded vs achieved return over a range of commands")
    p.add_argument("--checkpoint", type=Path, required=True, help="Generator checkpoint")
    p.add_argument("--min", type=float, dest="c_min", help="Lowest command (default: env return range)")
    p.add_argument("--max", type=float, dest="c_max", help="Highest command (default: env return range)")
    p.add_argument("--num", type=positive_int, default=20, help="Number of commands (default: 20)")
    p.add_argument("--episodes", type=positive_int, default=10, help="Episodes per command (default: 10)")
    p.add_argument("--seed", type=int, default=0, help="Seed for environment resets (default: 0)")
    p.add_argument("--out", type=Path, help="CSV output (default: stdout)")

    p = sub.add_parser("pca", help="2-D PCA map of policy fingerprints")
    p.add_argument("--checkpoint", type=Path, required=True, help="Final generator checkpoint")
    p.add_argument("--buffer", type=Path, required=True, help="Buffer dump written by train")
    p.add_argument("--stages", type=Path, help="Directory of stage checkpoints to project")
    p.add_argument("--num", type=positive_int, default=20, help="Commands per stage (default: 20)")
    p.add_argument("--episodes", type=positive_int, default=1, help="Episodes per stage policy (default: 1)")
    p.add_argument("--seed", type=int, default=0, help="Seed for environment resets (default: 0)")
    p.add_argument("--out", type=Path, help="CSV output (default: stdout)")

    p = sub.add_parser("serve", help="Serve a checkpoint over HTTP")
    p.add_argument("--checkpoint", type=Path, help="Checkpoint to serve (default: CHECKPOINT_PATH setting)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _run_dir(args, algorithm: str, config) -> Path:
    return args.out or Path(settings.RUNS_DIR) / f"{algorithm}-{config.env}-seed{config.seed}"


def _with_seed(config, seed: Optional[int]):
    return config if seed is None else config.model_copy(update={"seed": seed})


def cmd_train(args) -> int:
    from app.trainer import resume_state, train

    if args.config is None and args.resume is None:
        raise UsageError("train needs --config or --resume")
    if args.resume is not None and args.seed is not None:
        raise UsageError("--seed cannot be combined with --resume; the checkpoint fixes the seed")
    if args.config is not None:
        config = _with_seed(parse_config(args.config, "gogepo"), args.seed)
    else:
        _, config = resume_state(args.resume)
    result = train(config, _run_dir(args, "gogepo", config), resume=args.resume)
    print(f"checkpoint: {result.checkpoint}")
    print(f"log: {result.log}")
    return EXIT_OK


def cmd_ars(args) -> int:
    from app.ars import ars_train

    if args.config is None:
        raise UsageError("ars needs --config")
    config = _with_seed(parse_config(args.config, "ars"), args.seed)
    result = ars_train(config, _run_dir(args, "ars", config))
    print(f"checkpoint: {result.run.checkpoint}")
    print(f"log: {result.run.log}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from app.checkpoint import load_model
    from app.envs import evaluate_policy, make_env
    from app.hypergen import generate

    model = load_model(args.checkpoint)
    policy = generate(model.generator, args.command)
    returns = evaluate_policy(make_env(model.env), policy, model.stat, args.episodes,
                              np.random.default_rng(args.seed), model.output_activation)
    print(f"command {args.command!r}: mean {returns.mean()!r} std {returns.std()!r} over {args.episodes} episodes")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from app.analysis import identity_sweep, sweep_correlation, write_sweep_csv
    from app.checkpoint import load_model
    from app.envs import make_env

    model = load_model(args.checkpoint)
    low, high = make_env(model.env).spec.return_range
    c_min = low if args.c_min is None else args.c_min
    c_max = high if args.c_max is None else args.c_max
    rows = identity_sweep(model, c_min, c_max, args.num, args.episodes, np.random.default_rng(args.seed))
    write_sweep_csv(args.out or sys.stdout, rows)
    logger.info("spearman(command, return) = %.3f", sweep_correlation(rows))
    return EXIT_OK


def cmd_pca(args) -> int:
    from app.analysis import fingerprint_map, load_stages, write_points_csv
    from app.buffer import load_dump

    stages = load_stages(args.stages) if args.stages else []
    points = fingerprint_map(args.checkpoint, load_dump(args.buffer), stages, n_commands=args.num,
                             episodes=args.episodes, rng=np.random.default_rng(args.seed))
    write_points_csv(args.out or sys.stdout, points)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    if args.checkpoint is not None:
        settings.CHECKPOINT_PATH = str(args.checkpoint)
    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train, "ars": cmd_ars, "eval": cmd_eval,
    "sweep": cmd_sweep, "pca": cmd_pca, "serve": cmd_serve,
}


def dispatch(argv: Sequence[str]) -> int:
    """0 success, 1 user error, 2 internal error"""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USER
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        print("gogepo: error: a command is required", file=sys.stderr)
        return EXIT_USER

    configure_logging(args.log_level)
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"gogepo: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (GoGePoError, OSError) as exc:
        logger.error("❌ %s", exc)
        print(f"gogepo: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:
        logger.exception("❌ internal error")
        return EXIT_INTERNAL


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
