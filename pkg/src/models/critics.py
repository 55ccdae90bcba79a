"""
Critic networks of the soft learner: twin Q-functions and the state value function with its target copy.
"""
import copy

import torch
import torch.nn as nn

from src.numerics import Mlp, forward


class CriticBank(nn.Module):
    """
    Twin soft Q-networks Q1, Q2 over (state, action), the state value network V and its Polyak-smoothed target copy.
    """
    def __init__(self, obs_dim, action_dim, hidden_sizes=(64, 64), generator=None):
        """
        Args:
            obs_dim (int): Observation width.
            action_dim (int): Joint action width.
            hidden_sizes (list of int): Hidden layer sizes of every network.
            generator (torch.Generator, optional): Generator for the initialization.
        """
        super(CriticBank, self).__init__()
        hidden_sizes = [int(size) for size in hidden_sizes]
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.hidden_sizes = hidden_sizes
        self.q1 = Mlp([obs_dim + action_dim, *hidden_sizes, 1], generator=generator, name="q1")
        self.q2 = Mlp([obs_dim + action_dim, *hidden_sizes, 1], generator=generator, name="q2")
        self.value = Mlp([obs_dim, *hidden_sizes, 1], generator=generator, name="value")
        self.target_value = copy.deepcopy(self.value)
        self.target_value.name = "target_value"
        for param in self.target_value.parameters():
            param.requires_grad_(False)

    def q_values(self, states, actions):
        x = torch.cat([states, actions], dim=-1)
        return forward(self.q1, x).squeeze(-1), forward(self.q2, x).squeeze(-1)

    def min_q(self, states, actions):
        q1, q2 = self.q_values(states, actions)
        return torch.min(q1, q2)

    def v(self, states):
        return forward(self.value, states).squeeze(-1)

    def target_v(self, states):
        with torch.no_grad():
            return forward(self.target_value, states).squeeze(-1)

    def soft_update(self, tau):
        """
        Target <- tau * V + (1 - tau) * target.

        Args:
            tau (float): Smoothing coefficient in (0, 1].
        """
        with torch.no_grad():
            for target_param, param in zip(self.target_value.parameters(), self.value.parameters()):
                target_param.mul_(1 - tau).add_(param, alpha=tau)
