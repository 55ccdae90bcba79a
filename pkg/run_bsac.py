"""
Command-line entry point: train, evaluate, plot, compare runs, run the tabular oracle and the scripted baseline.
"""
import argparse
import sys

import numpy as np

from src.common.exceptions import ConfigurationError
from src.common.path_utils import load_mdp
from src.common.utils import get_logger, parse_int_list, seed_everything, set_global_log_level
from src.environments import scripted_baseline_return
from src.evaluation import evaluate
from src.experiment_config import ExperimentConfig
from src.harness import run_experiment
from src.plotting import emit_comparison, emit_curves
from src.tabular_oracle import hard_value_iteration, tabular_soft_iteration_oracle


def parse_labelled_runs(values):
    """
    Parse `label=dir` pairs. A bare directory is labelled by itself.
    """
    runs = {}
    for value in values:
        label, _, run_dir = value.partition("=")
        if not run_dir:
            label, run_dir = value, value
        runs[label] = run_dir
    return runs


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(description="Soft actor-critic with policies factorized over strategy graphs.")
    parser.add_argument("--logging_level", type=str, default="info", help="Verbosity level of the logger.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    train_parser = subparsers.add_parser("train", help="Train every seed of an experiment config.")
    train_parser.add_argument("--config", type=str, required=True, help="Path to the experiment config.")
    help = "Seeds to run, overrides the config. A single int, a list or an inclusive range, for example `0`, `0,1,2` "
    help += "or `0-4`."
    train_parser.add_argument("--seeds", type=parse_int_list, default=None, help=help)
    train_parser.add_argument("--out", type=str, default=None, help="Run directory, overrides the config.")
    train_parser.add_argument("--n_workers", type=int, default=None, help="Processes to run seeds in.")
    train_parser.add_argument("--fast", action="store_true", help="Use fast testing hyperparameters.")

    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint with deterministic actions.")
    eval_parser.add_argument("--checkpoint", type=str, required=True, help="Path to the checkpoint.")
    eval_parser.add_argument("--env", type=str, required=True, help="Environment name.")
    eval_parser.add_argument("--episodes", type=int, default=10, help="Number of episodes.")
    eval_parser.add_argument("--seed", type=int, default=0, help="Evaluation seed.")

    plot_parser = subparsers.add_parser("plot", help="Write learning curves of a run directory.")
    plot_parser.add_argument("--run-dir", dest="run_dir", type=str, required=True, help="Run directory.")

    compare_parser = subparsers.add_parser("compare", help="Compare learning curves of several run directories.")
    compare_parser.add_argument("--runs", type=str, nargs="+", required=True,
                                help="Run directories, optionally labelled, for example `sac=results/runs/sac`.")
    compare_parser.add_argument("--out", type=str, required=True, help="Folder for the report.")

    oracle_parser = subparsers.add_parser("oracle", help="Run tabular soft value iteration on a finite MDP.")
    oracle_parser.add_argument("--mdp", type=str, required=True, help="Path or name of the MDP file.")
    oracle_parser.add_argument("--alpha", type=float, default=1.0, help="Temperature.")
    oracle_parser.add_argument("--discount", type=float, default=0.9, help="Discount.")

    baseline_parser = subparsers.add_parser("baseline", help="Return of the scripted Reacher2 controller.")
    baseline_parser.add_argument("--episodes", type=int, default=10, help="Number of episodes.")
    baseline_parser.add_argument("--seed", type=int, default=0, help="Seed.")

    return parser.parse_args(argv)


def main(argv=None):
    seed_everything(57)
    args = parse_arguments(argv)
    set_global_log_level(args.logging_level)
    logger = get_logger(__name__)

    if args.command == "train":
        config = ExperimentConfig.from_file(args.config, seeds=args.seeds, output_dir=args.out, fast=args.fast)
        config = config.with_overrides(n_workers=args.n_workers)
        records = run_experiment(config)
        return 0 if all(record.ok for record in records) else 1

    if args.command == "eval":
        summary = evaluate(args.checkpoint, args.env, args.episodes, args.seed)
        print(f"mean={summary.mean} std={summary.std} min={summary.min} max={summary.max}")
        return 0

    if args.command == "plot":
        for path in emit_curves(args.run_dir):
            print(path)
        return 0

    if args.command == "compare":
        figure_path, summary_path = emit_comparison(parse_labelled_runs(args.runs), args.out)
        print(figure_path)
        print(summary_path)
        return 0

    if args.command == "oracle":
        mdp = load_mdp(args.mdp)
        result = tabular_soft_iteration_oracle(mdp, args.alpha, args.discount)
        hard_values, _ = hard_value_iteration(mdp, args.discount)
        logger.info(f"Converged after {result.n_iterations} iterations, final residual {result.residuals[-1]:.3e}.")
        with np.printoptions(precision=6, suppress=True):
            print(f"soft values: {result.values}")
            print(f"policy:\n{result.policy}")
            print(f"hard values: {hard_values}")
        return 0

    if args.command == "baseline":
        mean, returns = scripted_baseline_return(episodes=args.episodes, seed=args.seed)
        print(f"mean={mean} min={min(returns)} max={max(returns)}")
        return 0

    raise ConfigurationError(f"Unknown command {args.command}. ")


if __name__ == "__main__":
    sys.exit(main())
