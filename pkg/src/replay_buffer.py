"""
Fixed-capacity FIFO store of transitions, sampled uniformly with its own seeded generator.
"""
import math
from dataclasses import dataclass

import numpy as np
import torch

from src.common.exceptions import ContractError, DimensionError, NumericalError
from src.numerics import DTYPE


@dataclass
class Transition:
    """
    One environment transition. `done` is True only for terminal states, not for time-limit truncation.
    """
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    """
    Tensor view of sampled transitions. Rewards and dones are [batch], the rest [batch x width].
    """
    states: torch.Tensor
    actions: torch.Tensor
    rewards: torch.Tensor
    next_states: torch.Tensor
    dones: torch.Tensor

    def __len__(self):
        return self.states.shape[0]

    @classmethod
    def from_transitions(cls, transitions):
        return cls(
            states=torch.as_tensor(np.stack([t.state for t in transitions]), dtype=DTYPE),
            actions=torch.as_tensor(np.stack([t.action for t in transitions]), dtype=DTYPE),
            rewards=torch.as_tensor([float(t.reward) for t in transitions], dtype=DTYPE),
            next_states=torch.as_tensor(np.stack([t.next_state for t in transitions]), dtype=DTYPE),
            dones=torch.as_tensor([float(t.done) for t in transitions], dtype=DTYPE))


class ReplayBuffer:
    """
    Fixed-capacity ring of transitions with FIFO eviction and uniform sampling (with replacement).
    Storage is preallocated float64 numpy arrays.
    """
    def __init__(self, capacity, obs_dim, action_dim, seed=None):
        """
        Args:
            capacity (int): Maximum number of transitions kept.
            obs_dim (int): Observation width.
            action_dim (int): Action width.
            seed (int, optional): Seed of the sampling generator.
        """
        if capacity < 1:
            raise ContractError(f"`capacity` must be positive. Was {capacity}. ")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.rng = np.random.default_rng(seed)

        self.states = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.next_states = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.dones = np.zeros(capacity, dtype=np.float64)

        self.pos = 0
        self.size = 0

    def push(self, transition):
        """
        Store a transition, evicting the oldest one when full.

        Raises:
            DimensionError: If widths do not match the buffer.
            NumericalError: If the reward is not finite.
        """
        state = np.asarray(transition.state, dtype=np.float64).reshape(-1)
        next_state = np.asarray(transition.next_state, dtype=np.float64).reshape(-1)
        action = np.asarray(transition.action, dtype=np.float64).reshape(-1)
        if state.size != self.obs_dim or next_state.size != self.obs_dim or action.size != self.action_dim:
            message = f"Transition widths must be (obs={self.obs_dim}, action={self.action_dim}). "
            message += f"Was (obs={state.size}, next_obs={next_state.size}, action={action.size}). "
            raise DimensionError(message)
        if not math.isfinite(float(transition.reward)):
            raise NumericalError(f"Reward must be finite. Was {transition.reward}. ", parameter_name="reward")
        idx = self.pos
        self.states[idx] = state
        self.actions[idx] = action
        self.rewards[idx] = float(transition.reward)
        self.next_states[idx] = next_state
        self.dones[idx] = float(bool(transition.done))
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size):
        """
        Draw `batch_size` transitions uniformly over the stored ones.

        Returns:
            TransitionBatch: The batch.
        """
        if self.size == 0:
            raise ContractError("Cannot sample from an empty replay buffer. ")
        indices = self.rng.integers(0, self.size, size=batch_size)
        return TransitionBatch(
            states=torch.from_numpy(self.states[indices]),
            actions=torch.from_numpy(self.actions[indices]),
            rewards=torch.from_numpy(self.rewards[indices]),
            next_states=torch.from_numpy(self.next_states[indices]),
            dones=torch.from_numpy(self.dones[indices]))

    def __len__(self):
        return self.size
