"""
Training loop of one seed: interleave environment steps and learner updates, evaluate every interval, write the
metrics CSV incrementally and checkpoint at the end.
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from src.common.path_utils import MetricsWriter, get_checkpoint_path, get_metrics_path
from src.common.utils import count_parameters, derive_seed, get_logger
from src.constants import METRICS_BASE_COLUMNS, WALL_CLOCK_COLUMN
from src.environments import make_env
from src.evaluation import evaluate_policy
from src.needs_hierarchy import needs_for_step
from src.numerics import save_parameters
from src.replay_buffer import Transition
from src.soft_learner import SoftLearner

logger = get_logger(__name__)

LOSS_NAMES = ["q1_loss", "q2_loss", "v_loss", "policy_loss"]


def metrics_columns(m):
    return METRICS_BASE_COLUMNS + [f"entropy_sub_{i + 1}" for i in range(m)] + [WALL_CLOCK_COLUMN]


@dataclass
class RunRecord:
    """
    Outcome of one seed. `rows` are the metrics rows as written, increasing in `env_step`. `error` is set if the
    seed failed, in which case `rows` holds whatever was written before the failure.
    """
    config_hash: str
    seed: int
    rows: list = field(default_factory=list)
    wall_clock: float = 0.0
    metrics_path: str = None
    checkpoint_path: str = None
    n_clamped: int = 0
    error: str = None

    @property
    def ok(self):
        return self.error is None

    def summary(self):
        final = self.rows[-1]["eval_return_mean"] if self.rows else None
        return {"seed": self.seed, "config_hash": self.config_hash, "n_rows": len(self.rows),
                "final_eval_return_mean": final, "n_clamped": self.n_clamped, "metrics_path": self.metrics_path,
                "checkpoint_path": self.checkpoint_path, "error": self.error}


class IntervalAverager:
    """
    Averages learner metrics between two evaluations. Not-ready updates are skipped, and an interval without any
    ready update averages to NaN, which is written as the not-ready sentinel.
    """
    def __init__(self, m):
        self.m = m
        self.reset()

    def reset(self):
        self.count = 0
        self.losses = np.zeros(len(LOSS_NAMES))
        self.entropies = np.zeros(self.m)

    def add(self, metrics):
        if not metrics.ready:
            return
        self.count += 1
        self.losses += [metrics.q1_loss, metrics.q2_loss, metrics.v_loss, metrics.policy_loss]
        self.entropies += metrics.entropies

    def means(self):
        if self.count == 0:
            return [math.nan] * len(LOSS_NAMES), [math.nan] * self.m
        return (self.losses / self.count).tolist(), (self.entropies / self.count).tolist()


def train_seed(config, seed, config_hash=None):
    """
    Train and evaluate one seed of an experiment. Every sub-seed (environment, initialization, noise, replay,
    exploration and evaluation) is derived from `seed`, so `(config, seed)` fixes every byte of the metrics file.

    Warmup steps (until the buffer holds `warmup_steps` transitions) use uniform random actions. Evaluation runs
    `eval_episodes` episodes with the deterministic action every `eval_interval` steps, and once more at the end
    if `total_steps` is not a multiple of it.

    Args:
        config (ExperimentConfig): The experiment.
        seed (int): The run seed.
        config_hash (str, optional): Hash for the metrics header. Computed from `config` if None.

    Returns:
        RunRecord: The record.
    """
    config_hash = config_hash if config_hash is not None else config.hash()
    hp = config.hyperparams
    env = make_env(config.env, config.action_permutation)
    eval_env = make_env(config.env, config.action_permutation)
    spec = env.spec
    learner = SoftLearner.build(config.graph, spec.obs_dim, spec.action_low, spec.action_high, hp, seed=seed)
    explore_rng = np.random.default_rng(derive_seed(seed, "explore"))
    env_seed = derive_seed(seed, "env")
    eval_seed = derive_seed(seed, "eval")
    low, high = np.array(spec.action_low), np.array(spec.action_high)

    columns = metrics_columns(learner.m)
    metrics_path = get_metrics_path(config.output_dir, seed)
    record = RunRecord(config_hash=config_hash, seed=seed, metrics_path=str(metrics_path))
    averager = IntervalAverager(learner.m)
    start_time = time.perf_counter()
    logger.info(f"Starting seed {seed}: `{config.algorithm}` on `{config.env}` with m={learner.m} "
                f"({count_parameters(learner.policy)} policy parameters) for {config.total_steps} steps. ")

    episode = 0
    observation = env.reset(derive_seed(env_seed, f"episode{episode}"))
    with MetricsWriter(metrics_path, columns, config_hash, seed) as writer:
        for env_step in range(1, config.total_steps + 1):
            if len(learner.buffer) < hp.warmup_steps:
                action = explore_rng.uniform(low, high)
            else:
                action = learner.act(observation)
            result = env.step(action)
            reward = result.reward
            if config.needs is not None:
                reward, _ = needs_for_step(reward, result.probes, config.needs)
            learner.observe(Transition(state=observation, action=action, reward=reward,
                                       next_state=result.observation, done=result.terminal))
            observation = result.observation
            if result.done:
                episode += 1
                observation = env.reset(derive_seed(env_seed, f"episode{episode}"))

            if env_step % hp.update_interval == 0:
                averager.add(learner.train_step())

            if env_step % config.eval_interval == 0 or env_step == config.total_steps:
                summary = evaluate_policy(learner.policy, eval_env, config.eval_episodes, eval_seed)
                losses, entropies = averager.means()
                averager.reset()
                wall_clock = time.perf_counter() - start_time if config.record_wall_clock else 0.0
                row = {"env_step": env_step, "eval_return_mean": summary.mean, "eval_return_std": summary.std}
                row.update(dict(zip(LOSS_NAMES, losses)))
                row.update({f"entropy_sub_{i + 1}": value for i, value in enumerate(entropies)})
                row[WALL_CLOCK_COLUMN] = wall_clock
                writer.write_row(row)
                record.rows.append(row)
                logger.info(f"Seed {seed}, step [{env_step} / {config.total_steps}]: eval return "
                            f"{summary.mean:.4f} (std {summary.std:.4f}). ")

    checkpoint_path = get_checkpoint_path(config.output_dir, seed)
    metadata = {"config_hash": config_hash, "seed": seed, "env": config.env, "algorithm": config.algorithm,
                "env_step": config.total_steps, "action_permutation": config.action_permutation,
                "policy": learner.policy.describe(), "hyperparameters": hp.to_dict()}
    save_parameters(checkpoint_path, learner.named_tensors(), metadata)
    record.checkpoint_path = str(checkpoint_path)
    record.wall_clock = time.perf_counter() - start_time
    record.n_clamped = env.n_clamped
    logger.info(f"Finished seed {seed} in {record.wall_clock:.1f}s. Checkpoint saved to {checkpoint_path}. ")
    return record
