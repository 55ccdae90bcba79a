"""
Deterministic control environments and the registry `make_env()` looks names up in.
"""
from src.common.exceptions import ConfigurationError
from src.environments.base import Environment, EnvSpec, PermutedActionEnv, StepResult
from src.environments.hazard_point_mass import HazardPointMass
from src.environments.pendulum import Pendulum
from src.environments.reacher import Reacher2, ReacherController, scripted_baseline_return

ENV_REGISTRY = {
    "pendulum": Pendulum,
    "reacher2": Reacher2,
    "hazard_point_mass": HazardPointMass,
}


def make_env(name, action_permutation=None):
    """
    Make an environment by registry name.

    Args:
        name (str): Must be in `ENV_REGISTRY`.
        action_permutation (list of int, optional): If given, wrap the environment in `PermutedActionEnv`.

    Raises:
        ConfigurationError: If the name is unknown.

    Returns:
        Environment: The environment.
    """
    key = str(name).strip().lower()
    if key not in ENV_REGISTRY:
        raise ConfigurationError(f"Unknown environment. Must be in {sorted(ENV_REGISTRY)}. Was {name}. ")
    env = ENV_REGISTRY[key]()
    if action_permutation is not None:
        return PermutedActionEnv(env, action_permutation)
    return env
