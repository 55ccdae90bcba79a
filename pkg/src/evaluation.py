"""
Deterministic-policy rollouts and checkpoint evaluation.
"""
from dataclasses import dataclass

import numpy as np
import torch

from src.common.exceptions import CheckpointError
from src.common.utils import derive_seed, get_logger
from src.environments import Environment, PermutedActionEnv, make_env
from src.models.joint_policy import JointPolicy
from src.numerics import DTYPE, load_parameters

logger = get_logger(__name__)


@dataclass
class EvaluationSummary:
    """
    Statistics of undiscounted episode returns. `std` is the population standard deviation, so one episode gives 0.
    """
    mean: float
    std: float
    min: float
    max: float
    returns: list

    @classmethod
    def from_returns(cls, returns):
        returns = [float(value) for value in returns]
        array = np.array(returns)
        return cls(mean=float(array.mean()), std=float(array.std()), min=float(array.min()), max=float(array.max()),
                   returns=returns)

    def to_dict(self):
        return {"mean": self.mean, "std": self.std, "min": self.min, "max": self.max, "returns": self.returns}


def rollout_returns(act, env, episodes, seed):
    """
    Run `episodes` episodes with the action function `act`. Episode k starts from `derive_seed(seed, "episode<k>")`,
    so the same seed always gives the same start states.

    Args:
        act (callable): Maps an observation to an action.
        env (Environment or PermutedActionEnv): Environment to roll out in.
        episodes (int): Number of episodes.
        seed (int): Evaluation seed.

    Returns:
        list of float: Return of every episode.
    """
    returns = []
    for episode in range(episodes):
        observation = env.reset(derive_seed(seed, f"episode{episode}"))
        total, done = 0.0, False
        while not done:
            result = env.step(act(observation))
            observation, done = result.observation, result.done
            total += result.reward
        returns.append(total)
    return returns


def deterministic_act(policy):
    def act(observation):
        return policy.deterministic_action(torch.as_tensor(np.asarray(observation), dtype=DTYPE)).numpy()
    return act


def evaluate_policy(policy, env, episodes, seed):
    """
    Evaluate the deterministic action (zero noise) of a joint policy.

    Returns:
        EvaluationSummary: The summary.
    """
    return EvaluationSummary.from_returns(rollout_returns(deterministic_act(policy), env, episodes, seed))


def load_policy(checkpoint_path):
    """
    Rebuild the joint policy stored in a checkpoint.

    Raises:
        CheckpointError: If the checkpoint has no policy description or its tensors do not fit it.

    Returns:
        JointPolicy: The policy.
        dict: The checkpoint metadata.
    """
    tensors, metadata = load_parameters(checkpoint_path)
    if "policy" not in metadata:
        raise CheckpointError(f"Checkpoint {checkpoint_path} has no policy description. ")
    policy = JointPolicy.from_description(metadata["policy"])
    state = {name[len("policy."):]: tensor for name, tensor in tensors.items() if name.startswith("policy.")}
    try:
        policy.load_state_dict(state)
    except RuntimeError as error:
        raise CheckpointError(f"Policy tensors in {checkpoint_path} do not fit the stored architecture. {error}")
    policy.eval()
    return policy, metadata


def evaluate(checkpoint_path, env, episodes, seed):
    """
    Evaluate a saved policy with deterministic actions.

    Args:
        checkpoint_path (str or pathlib.Path): Checkpoint written by a training run.
        env (str or Environment): Environment, or its registry name. For a name, the action permutation stored in
            the checkpoint is applied.
        episodes (int): Number of episodes.
        seed (int): Evaluation seed.

    Raises:
        CheckpointError: If the checkpoint's observation or action width does not match the environment.

    Returns:
        EvaluationSummary: Mean, standard deviation, min and max of the returns.
    """
    policy, metadata = load_policy(checkpoint_path)
    if not isinstance(env, (Environment, PermutedActionEnv)):
        env = make_env(env, metadata.get("action_permutation"))
    if policy.obs_dim != env.spec.obs_dim or policy.action_dim != env.spec.action_dim:
        message = f"Checkpoint {checkpoint_path} has observation width {policy.obs_dim} and action width "
        message += f"{policy.action_dim}, environment `{env.name}` has {env.spec.obs_dim} and {env.spec.action_dim}. "
        raise CheckpointError(message)
    summary = evaluate_policy(policy, env, episodes, seed)
    logger.info(f"Evaluated {checkpoint_path} on `{env.name}` over {episodes} episodes: mean return "
                f"{summary.mean:.4f} (std {summary.std:.4f}, min {summary.min:.4f}, max {summary.max:.4f}). ")
    return summary
