"""
Environment contract shared by every task: spec, seeded reset, clamped step, probes and the action permutation adapter.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from src.common.exceptions import ContractError, DimensionError
from src.common.utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class EnvSpec:
    """
    Static description of an environment.

    Args:
        name (str): Registry name.
        obs_dim (int): Observation width.
        action_dim (int): Action width.
        action_low (tuple of float): Lower action bound per dimension.
        action_high (tuple of float): Upper action bound per dimension.
        dt (float): Integration step in seconds.
        max_steps (int): Episode cap.
        probe_catalog (dict of str: str): Probe id to description.
    """
    name: str
    obs_dim: int
    action_dim: int
    action_low: tuple
    action_high: tuple
    dt: float
    max_steps: int
    probe_catalog: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractError(f"`dt` must be positive. Was {self.dt}. ")
        if len(self.action_low) != self.action_dim or len(self.action_high) != self.action_dim:
            raise DimensionError(f"Action bounds of `{self.name}` must have {self.action_dim} entries. ")
        if any(low >= high for low, high in zip(self.action_low, self.action_high)):
            raise ContractError(f"Action bounds of `{self.name}` need low < high. ")


@dataclass
class StepResult:
    """
    Args:
        observation (np.ndarray): Observation after the step.
        reward (float): Reward of the step.
        done (bool): True if the episode ended, by a terminal state or by the step cap.
        probes (dict of str: float): Probe values in [0, 1].
        truncated (bool): True if the episode ended only because of the step cap.
    """
    observation: np.ndarray
    reward: float
    done: bool
    probes: dict
    truncated: bool = False

    @property
    def terminal(self):
        return self.done and not self.truncated


class Environment:
    """
    Base class of the deterministic control environments. Subclasses set `spec` and implement `_reset(rng)`,
    `_step(action)` (returning observation, reward and the terminal flag), `_observation()` and `_probes()`.
    """
    spec = None

    def __init__(self):
        self.step_count = 0
        self.n_clamped = 0
        self._done = True
        self._warned_this_episode = False
        self.low = np.array(self.spec.action_low, dtype=np.float64)
        self.high = np.array(self.spec.action_high, dtype=np.float64)

    @property
    def name(self):
        return self.spec.name

    def reset(self, seed=None):
        """
        Args:
            seed (int, optional): Seed for the initial state. The same seed always gives the same state.

        Returns:
            np.ndarray: Initial observation.
        """
        self._reset(np.random.default_rng(seed))
        self.step_count = 0
        self._done = False
        self._warned_this_episode = False
        return self._observation()

    def step(self, action):
        """
        Advance one integration step. Out-of-bounds actions are clamped and counted in `n_clamped`.

        Args:
            action (np.ndarray): [action_dim] action.

        Raises:
            DimensionError: If the action has the wrong width.
            ContractError: If the action has a NaN, or the episode is over and `reset()` was not called.

        Returns:
            StepResult: The result.
        """
        if self._done:
            raise ContractError(f"Episode of `{self.name}` is over. Call `reset()` before stepping. ")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.size != self.spec.action_dim:
            message = f"Action for `{self.name}` must have {self.spec.action_dim} entries. Was {action.size}. "
            raise DimensionError(message)
        if np.isnan(action).any():
            raise ContractError(f"Action for `{self.name}` contains NaN. Was {action.tolist()}. ")
        clipped = np.clip(action, self.low, self.high)
        if not np.array_equal(clipped, action):
            self.n_clamped += 1
            if not self._warned_this_episode:
                warnings.warn(f"Action {action.tolist()} for `{self.name}` was clamped to the action bounds. ")
                self._warned_this_episode = True
        self.step_count += 1
        observation, reward, terminal = self._step(clipped)
        truncated = (not terminal) and self.step_count >= self.spec.max_steps
        self._done = terminal or truncated
        return StepResult(observation=observation, reward=float(reward), done=self._done, probes=self._probes(),
                          truncated=truncated)

    def probes(self):
        return self._probes()

    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError

    def _observation(self):
        raise NotImplementedError

    def _probes(self):
        return {}


class PermutedActionEnv:
    """
    Adapter for environments whose native action order differs from the policy's layout.
    `permutation[i]` is the environment index that receives policy component i.
    """
    def __init__(self, env, permutation):
        permutation = [int(index) for index in permutation]
        if sorted(permutation) != list(range(env.spec.action_dim)):
            message = f"`permutation` must be a permutation of range({env.spec.action_dim}). Was {permutation}. "
            raise ContractError(message)
        self.env = env
        self.permutation = np.array(permutation)
        spec = env.spec
        self.spec = EnvSpec(
            name=spec.name, obs_dim=spec.obs_dim, action_dim=spec.action_dim,
            action_low=tuple(spec.action_low[i] for i in permutation),
            action_high=tuple(spec.action_high[i] for i in permutation), dt=spec.dt, max_steps=spec.max_steps,
            probe_catalog=spec.probe_catalog)

    @property
    def name(self):
        return self.env.name

    @property
    def n_clamped(self):
        return self.env.n_clamped

    def reset(self, seed=None):
        return self.env.reset(seed)

    def to_env_action(self, action):
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        env_action = np.empty_like(action)
        env_action[self.permutation] = action
        return env_action

    def step(self, action):
        return self.env.step(self.to_env_action(action))

    def probes(self):
        return self.env.probes()
