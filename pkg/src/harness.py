"""
Multi-seed experiment orchestration.
"""
import traceback
from concurrent.futures import ProcessPoolExecutor

from src.common.exceptions import ConfigurationError
from src.common.path_utils import (create_folder, get_metrics_path, read_metrics_header, save_resolved_config,
                                   save_run_summary)
from src.common.utils import get_logger
from src.train import RunRecord, train_seed

logger = get_logger(__name__)


def check_resumption(config, config_hash):
    """
    Refuse to write into a run directory whose metrics files come from a different config.

    Raises:
        ConfigurationError: If any seed's existing metrics file has another config hash.
    """
    mismatched = []
    for seed in config.seeds:
        path = get_metrics_path(config.output_dir, seed, check_folder_exists=False)
        if path.exists():
            existing_hash, _ = read_metrics_header(path)
            if existing_hash != config_hash:
                mismatched.append(str(path))
    if mismatched:
        message = f"Run directory {config.output_dir} holds metrics of a different config ({mismatched}). "
        message += "Use another `output_dir` or remove the old files. "
        raise ConfigurationError(message)


def _run_seed_isolated(config, seed, config_hash):
    try:
        return train_seed(config, seed, config_hash)
    except Exception as error:  # A failing seed does not stop the others
        logger.error(f"Seed {seed} failed: {error!r}\n{traceback.format_exc()}")
        return RunRecord(config_hash=config_hash, seed=seed, error=f"{type(error).__name__}: {error}")


def run_experiment(config):
    """
    Run every seed of an experiment. The config is validated and the run directory checked before any seed starts.
    With `n_workers > 1` seeds run in a process pool, each run itself stays single-threaded and writes its own
    files.

    Args:
        config (ExperimentConfig): The experiment.

    Raises:
        ConfigurationError: If the run directory holds metrics of a different config.

    Returns:
        list of RunRecord: One record per seed, in the order of `config.seeds`.
    """
    config_hash = config.hash()
    check_resumption(config, config_hash)
    create_folder(config.output_dir)
    save_resolved_config(config.output_dir, {"config_hash": config_hash, **config.to_dict()})
    logger.info(f"Running {len(config.seeds)} seeds of config {config_hash[:12]} into {config.output_dir}. ")

    if config.n_workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(config.n_workers, len(config.seeds))) as executor:
            futures = [executor.submit(_run_seed_isolated, config, seed, config_hash) for seed in config.seeds]
            records = []
            for seed, future in zip(config.seeds, futures):
                try:
                    records.append(future.result())
                except Exception as error:  # The worker process itself died
                    logger.error(f"Seed {seed} failed in its worker: {error!r}")
                    records.append(RunRecord(config_hash=config_hash, seed=seed,
                                             error=f"{type(error).__name__}: {error}"))
    else:
        records = [_run_seed_isolated(config, seed, config_hash) for seed in config.seeds]

    save_run_summary(config.output_dir, [record.summary() for record in records])
    n_failed = sum(not record.ok for record in records)
    if n_failed:
        logger.warning(f"{n_failed} of {len(records)} seeds failed. See the log and the run summary. ")
    return records
