"""
All functions that handle reading and saving files are in here.
Shipped data (hyperparameters, strategy graph fixtures, MDPs) is looked up relative to the repository root, run
outputs go wherever the experiment config points.
"""
import csv
import math
import warnings
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd
import yaml

from src.common.exceptions import ConfigurationError, ContractError, EmptyInputError
from src.common.utils import get_logger
from src.constants import (CHECKPOINT_FILENAME_TEMPLATE, DEFAULT_HYPERPARAMETERS_FILENAME,
                           FALLBACK_HYPERPARAMETERS_ENV, FAST_HYPERPARAMETERS_FILENAME, GRAPHS_FOLDER,
                           HYPERPARAMETERS_FOLDER, MDPS_FOLDER, METRICS_FILENAME_TEMPLATE, NOT_READY, PLOTS_FOLDER,
                           RESOLVED_CONFIG_FILENAME, RESULTS_FOLDER, RUN_SUMMARY_FILENAME)
from src.strategy_graph import StrategyGraph
from src.tabular_oracle import FiniteMDP

logger = get_logger(__name__)

REPOSITORY_ROOT = Path(__file__).resolve().parents[2]


def create_folder(folder_path):
    Path(folder_path).mkdir(parents=True, exist_ok=True)


def make_file_path(folder, filename, check_folder_exists=True):
    """
    Join a run (or data) folder with a bare filename, creating the folder when `check_folder_exists` is True.
    Folders belong in `folder`, so `filename` must not contain a separator.

    Raises:
        ContractError: If `filename` is not a bare filename.
    """
    name = Path(filename).as_posix() if isinstance(filename, Path) else filename
    if not isinstance(name, str) or "/" in name or "\\" in name:
        raise ContractError(f"Expected a bare filename, without folders. Was {filename}. ")
    if check_folder_exists:
        create_folder(folder)
    return Path(folder) / name


def load_yaml(path):
    """
    Read a yaml (or json, which is a subset) document.

    Raises:
        ConfigurationError: If the file is missing or does not parse.
    """
    try:
        with open(path, "r") as infile:
            return yaml.safe_load(infile)
    except FileNotFoundError as error:
        raise ConfigurationError(f"File {path} does not exist. ") from error
    except yaml.YAMLError as error:
        raise ConfigurationError(f"File {path} is not valid yaml or json. {error}") from error


def write_yaml(data, path):
    with open(path, "w") as outfile:
        yaml.safe_dump(data, outfile, sort_keys=False)


def load_hyperparameters(env_name, fast=False):
    """
    Loads the learner hyperparameters of an environment. If the environment has no hyperparameter file, the
    pendulum file is used instead, with a warning.
    If `fast` is True, loads the file with short warmup and small batches, so that one can test fast.

    Args:
        env_name (str): Name of the environment.
        fast (bool, optional): If True, will use hyperparameters for fast testing. Defaults to False.

    Returns:
        dict: The hyperparameters.
    """
    filename = FAST_HYPERPARAMETERS_FILENAME if fast else DEFAULT_HYPERPARAMETERS_FILENAME
    base_folder = REPOSITORY_ROOT / RESULTS_FOLDER / HYPERPARAMETERS_FOLDER
    file_path = make_file_path(base_folder / env_name, filename, check_folder_exists=False)
    if not file_path.exists():
        message = f"No hyperparameters found for `{env_name}` at {file_path}. "
        message += f"Using the `{FALLBACK_HYPERPARAMETERS_ENV}` hyperparameters instead. "
        warnings.warn(message)
        file_path = make_file_path(base_folder / FALLBACK_HYPERPARAMETERS_ENV, filename, check_folder_exists=False)
    return load_yaml(file_path)


def resolve_graph_path(graph_reference):
    """
    A graph reference is either a path to a json/yaml file or the name of a shipped fixture, like `hopper-3p`.
    """
    path = Path(graph_reference)
    if path.suffix in (".json", ".yaml", ".yml") and path.exists():
        return path
    fixture_path = REPOSITORY_ROOT / GRAPHS_FOLDER / f"{graph_reference}.json"
    if fixture_path.exists():
        return fixture_path
    available = sorted(p.stem for p in (REPOSITORY_ROOT / GRAPHS_FOLDER).glob("*.json"))
    raise ConfigurationError(f"No graph file or fixture named {graph_reference}. Fixtures are {available}. ")


def load_graph(graph_reference):
    """
    Load a strategy graph from a file path or a fixture name.

    Args:
        graph_reference (str or pathlib.Path): Path, or fixture name in `data/graphs/`.

    Returns:
        StrategyGraph: The validated graph.
    """
    return StrategyGraph.from_dict(load_yaml(resolve_graph_path(graph_reference)))


def load_mdp(mdp_reference):
    """
    Load a finite MDP from a file path or the name of a file in `data/mdps/`.

    Returns:
        FiniteMDP: The MDP.
    """
    path = Path(mdp_reference)
    if not path.exists():
        path = REPOSITORY_ROOT / MDPS_FOLDER / f"{mdp_reference}.json"
    return FiniteMDP.from_dict(load_yaml(path))


def get_metrics_path(run_dir, seed, check_folder_exists=True):
    return make_file_path(run_dir, METRICS_FILENAME_TEMPLATE.format(seed=seed), check_folder_exists)


def get_checkpoint_path(run_dir, seed, check_folder_exists=True):
    return make_file_path(run_dir, CHECKPOINT_FILENAME_TEMPLATE.format(seed=seed), check_folder_exists)


def format_metrics_header(config_hash, seed):
    return f"# config_hash={config_hash} seed={seed}"


def read_metrics_header(path):
    """
    Read the provenance line of a metrics file.

    Returns:
        str: Config hash.
        int: Seed.
    """
    with open(path, "r") as infile:
        first_line = infile.readline().strip()
    if not first_line.startswith("# "):
        raise ConfigurationError(f"Metrics file {path} has no provenance header. Was {first_line!r}. ")
    fields = dict(part.split("=", 1) for part in first_line[2:].split())
    return fields["config_hash"], int(fields["seed"])


def _format_cell(value):
    if isinstance(value, int):
        return str(value)
    if value is None or math.isnan(value):
        return NOT_READY
    return repr(float(value))


class MetricsWriter:
    """
    Append-only metrics CSV of one seed. The first line records the config hash and seed, then the column header.
    Every row is flushed as soon as it is written.
    """
    def __init__(self, path, columns, config_hash, seed):
        self.path = Path(path)
        self.columns = list(columns)
        self.last_env_step = -1
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._file.write(format_metrics_header(config_hash, seed) + "\n")
        self._writer.writerow(self.columns)
        self._file.flush()

    def write_row(self, row):
        """
        Args:
            row (dict of str: float): Value per column. NaN is written as the not-ready sentinel.
        """
        if row["env_step"] <= self.last_env_step:
            raise ValueError(f"Rows must be increasing in `env_step`. Was {row['env_step']} after "
                             f"{self.last_env_step}. ")
        self._writer.writerow([_format_cell(row[column]) for column in self.columns])
        self._file.flush()
        self.last_env_step = row["env_step"]

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()


def load_metrics(path):
    """
    Read a metrics CSV. Not-ready cells become NaN.

    Returns:
        pd.DataFrame: One row per evaluation.
    """
    return pd.read_csv(path, skiprows=1, na_values=[NOT_READY], keep_default_na=False)


def load_run_metrics(run_dir):
    """
    Read every metrics CSV of a run directory.

    Raises:
        EmptyInputError: If there are no metrics files or none of them have rows.

    Returns:
        dict of int: pd.DataFrame: Metrics per seed, sorted by seed.
    """
    frames = {}
    for path in Path(run_dir).glob(METRICS_FILENAME_TEMPLATE.format(seed="*")):
        _, seed = read_metrics_header(path)
        frames[seed] = load_metrics(path)
    if not frames or all(len(frame) == 0 for frame in frames.values()):
        raise EmptyInputError(f"No metrics rows found in {run_dir}. ")
    return dict(sorted(frames.items()))


def save_resolved_config(run_dir, config_dict):
    write_yaml(config_dict, make_file_path(run_dir, RESOLVED_CONFIG_FILENAME))


def load_resolved_config(run_dir):
    path = make_file_path(run_dir, RESOLVED_CONFIG_FILENAME, check_folder_exists=False)
    if not path.exists():
        return None
    return load_yaml(path)


def save_run_summary(run_dir, summaries):
    write_yaml(summaries, make_file_path(run_dir, RUN_SUMMARY_FILENAME))


def save_figure(fig, folder, filename):
    """
    Save a figure as a file in `folder/plots/` and close it.

    Returns:
        pathlib.Path: Where the figure was saved.
    """
    file_path = make_file_path(Path(folder) / PLOTS_FOLDER, filename, check_folder_exists=True)
    fig.savefig(file_path)
    plt.close(fig)
    logger.debug(f"Saved figure {file_path}. ")
    return file_path
