"""
Learning curves of one run directory and side-by-side comparisons of several, saved as SVG into `plots/`.
"""
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from src.common.exceptions import EmptyInputError
from src.common.path_utils import load_resolved_config, load_run_metrics, make_file_path, save_figure
from src.common.utils import get_logger
from src.constants import COMPARISON_SUMMARY_FILENAME, CURVE_PADDING, MAP_ALGORITHM_TO_COLOR, SEED_COLORS, Z_SCORE_95

logger = get_logger(__name__)

NON_METRIC_COLUMNS = ["env_step", "wall_clock_s"]


def curve_limits(values, padding=CURVE_PADDING):
    """
    Y-axis limits spanning the finite values, padded by `padding` times the range on both sides.
    A flat curve is padded by `padding` times its magnitude (or by `padding` if it is zero).

    Args:
        values (array-like): Values, NaN allowed.
        padding (float): Fraction of the range to pad with.

    Returns:
        tuple of float: (low, high). (0, 1) if there are no finite values.
    """
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return 0.0, 1.0
    low, high = float(values.min()), float(values.max())
    span = high - low
    if span == 0:
        span = abs(low) if low != 0 else 1.0
    return low - padding * span, high + padding * span


def metric_names(frames):
    columns = next(iter(frames.values())).columns
    return [column for column in columns if column not in NON_METRIC_COLUMNS]


def build_curve_figure(metric, frames, title=None):
    """
    Line chart of one metric against `env_step`, one trace per seed and a black mean trace.
    A curve with a single point is drawn with a marker.

    Args:
        metric (str): Column to plot.
        frames (dict of int: pd.DataFrame): Metrics per seed.
        title (str, optional): Title for the plot.

    Returns:
        matplotlib.figure.Figure: The figure.
    """
    fig = plt.figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    marker = None
    if max(len(frame) for frame in frames.values()) == 1:
        marker = "o"
    all_values = []
    for i, (seed, frame) in enumerate(frames.items()):
        color = SEED_COLORS[i % len(SEED_COLORS)]
        ax.plot(frame["env_step"], frame[metric], c=color, alpha=0.6, marker=marker, label=f"seed {seed}")
        all_values.extend(frame[metric].tolist())

    combined = pd.concat([frame[["env_step", metric]] for frame in frames.values()])
    mean = combined.groupby("env_step")[metric].mean()
    ax.plot(mean.index, mean.values, c="black", linewidth=2, marker=marker, label="mean")

    ax.set_ylim(*curve_limits(all_values))
    ax.set_xlabel("Environment steps")
    ax.set_ylabel(metric)
    ax.set_title(title if title is not None else metric)
    ax.legend()
    fig.tight_layout()
    return fig


def emit_curves(run_dir):
    """
    Write one SVG line chart per metric column of a run directory, into `run_dir/plots/`.

    Raises:
        EmptyInputError: If the directory has no metrics rows.

    Returns:
        list of pathlib.Path: The written files.
    """
    frames = load_run_metrics(run_dir)
    config = load_resolved_config(run_dir)
    prefix = f"{config['algorithm']} on {config['env']}: " if config else ""
    paths = []
    for metric in metric_names(frames):
        fig = build_curve_figure(metric, frames, title=f"{prefix}{metric}")
        paths.append(save_figure(fig, run_dir, f"{metric}.svg"))
    logger.info(f"Wrote {len(paths)} charts for {len(frames)} seeds to {Path(run_dir)}. ")
    return paths


def confidence_band(frames, metric="eval_return_mean"):
    """
    Mean and 95% confidence half-width over seeds, per `env_step`.

    Returns:
        pd.DataFrame: Indexed by `env_step`, columns `mean`, `half_width` and `n_seeds`.
    """
    combined = pd.concat([frame[["env_step", metric]] for frame in frames.values()])
    grouped = combined.groupby("env_step")[metric]
    band = pd.DataFrame({"mean": grouped.mean(), "std": grouped.std(ddof=0), "n_seeds": grouped.count()})
    band["half_width"] = Z_SCORE_95 * band["std"] / np.sqrt(band["n_seeds"])
    return band


def build_comparison_figure(bands, colors=None, metric="eval_return_mean"):
    """
    Learning curves of several runs in one chart, mean line with a 95% confidence band each.

    Args:
        bands (dict of str: pd.DataFrame): Band per label, from `confidence_band()`.
        colors (dict of str: str, optional): Color per label.
        metric (str): Name for the y-axis.

    Returns:
        matplotlib.figure.Figure: The figure.
    """
    colors = colors or {}
    fig = plt.figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    for i, (label, band) in enumerate(bands.items()):
        color = colors.get(label, SEED_COLORS[i % len(SEED_COLORS)])
        x_values = band.index.to_numpy()
        mean = band["mean"].to_numpy()
        half_width = band["half_width"].to_numpy()
        ax.plot(x_values, mean, label=label, c=color)
        ax.fill_between(x_values, mean - half_width, mean + half_width, color=color, alpha=0.15)
    ax.set_xlabel("Environment steps")
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    return fig


def emit_comparison(run_dirs, output_dir, metric="eval_return_mean"):
    """
    Side-by-side learning curve report of several run directories, for example SAC against BSAC with the same seeds.
    Writes `comparison.svg` into `output_dir/plots/` and a summary CSV of the final returns into `output_dir`.

    Args:
        run_dirs (dict of str: str): Run directory per label.
        output_dir (str or pathlib.Path): Where to write the report.
        metric (str): Metric column to compare.

    Raises:
        EmptyInputError: If there are no run directories, or one has no metrics rows.

    Returns:
        pathlib.Path: The chart.
        pathlib.Path: The summary CSV.
    """
    if not run_dirs:
        raise EmptyInputError("Need at least one run directory to compare. ")
    bands = {}
    colors = {}
    summary_rows = []
    for label, run_dir in run_dirs.items():
        frames = load_run_metrics(run_dir)
        band = confidence_band(frames, metric)
        bands[label] = band
        config = load_resolved_config(run_dir)
        if config is not None and config["algorithm"] in MAP_ALGORITHM_TO_COLOR:
            colors[label] = MAP_ALGORITHM_TO_COLOR[config["algorithm"]]
        final = band.iloc[-1]
        summary_rows.append({"label": label, "run_dir": str(run_dir), "n_seeds": int(final["n_seeds"]),
                             "final_env_step": int(band.index[-1]), "final_mean": float(final["mean"]),
                             "final_ci95_half_width": float(final["half_width"]),
                             "best_mean": float(band["mean"].max())})
    if len(set(colors.values())) < len(colors):  # Two runs of the same algorithm
        colors = {}
    figure_path = save_figure(build_comparison_figure(bands, colors, metric), output_dir, "comparison.svg")
    summary_path = make_file_path(output_dir, COMPARISON_SUMMARY_FILENAME)
    pd.DataFrame(summary_rows).to_csv(summary_path, index=False)
    for row in summary_rows:
        logger.info(f"{row['label']}: final {metric} {row['final_mean']:.4f} "
                    f"+- {row['final_ci95_half_width']:.4f} over {row['n_seeds']} seeds. ")
    return figure_path, summary_path
