"""
Squashed-Gaussian sub-policies bound to strategy graph nodes, and the factorized joint policy built from them.
"""
import math

import torch
import torch.nn as nn

from src.common.exceptions import ContractError, DimensionError, DomainError
from src.constants import PRE_SQUASH_LIMIT
from src.numerics import DTYPE, Mlp, forward, gaussian_log_prob, gaussian_sample_reparam, tanh_log_det
from src.strategy_graph import StrategyGraph, conditioning_input, topological_order


class SubPolicy(nn.Module):
    """
    Policy of one tactic. The network maps the conditioning input to a mean and a log standard deviation per
    action dimension. A Gaussian latent is squashed with tanh and rescaled affinely into [low, high], and the
    log-probability carries the exact change-of-variables correction for both.
    """
    def __init__(self, node_id, input_dim, action_dims, hidden_sizes, low, high, generator=None, squash=True):
        """
        Args:
            node_id (str): Id of the graph node this sub-policy acts for.
            input_dim (int): Width of the conditioning input.
            action_dims (int): Width of this tactic's action slice.
            hidden_sizes (list of int): Hidden layer sizes.
            low (list of float): Lower action bound per dimension.
            high (list of float): Upper action bound per dimension.
            generator (torch.Generator, optional): Generator for the initialization.
            squash (bool): If False, the sub-policy is a plain (unbounded) Gaussian. Only meant for tests.
        """
        super(SubPolicy, self).__init__()
        low = torch.as_tensor(low, dtype=DTYPE).reshape(-1)
        high = torch.as_tensor(high, dtype=DTYPE).reshape(-1)
        if low.numel() != action_dims or high.numel() != action_dims:
            message = f"Bounds of `{node_id}` must have {action_dims} entries. Was {low.numel()} and {high.numel()}. "
            raise DimensionError(message)
        if not bool((low < high).all()):
            raise ContractError(f"Bounds of `{node_id}` need low < high. Was {low.tolist()} and {high.tolist()}. ")
        self.node_id = node_id
        self.action_dims = int(action_dims)
        self.squash = squash
        self.net = Mlp([input_dim, *hidden_sizes, 2 * action_dims], generator=generator, name=f"policy.{node_id}")
        self.register_buffer("low", low)
        self.register_buffer("high", high)
        self.register_buffer("midpoint", (low + high) / 2)
        self.register_buffer("half_range", (high - low) / 2)

    def distribution_params(self, x):
        out = forward(self.net, x)
        mean, log_std = out[:, :self.action_dims], out[:, self.action_dims:]
        return mean, log_std

    def _log_prob_from_latent(self, u, mean, log_std):
        log_prob = gaussian_log_prob(u, mean, log_std)
        if self.squash:
            log_prob = log_prob - tanh_log_det(u) - torch.log(self.half_range)
        return log_prob.sum(dim=-1)

    def sample(self, x, noise):
        """
        Args:
            x (torch.Tensor): [batch x input_dim] conditioning input.
            noise (torch.Tensor): [batch x action_dims] standard normal noise.

        Returns:
            torch.Tensor: [batch x action_dims] action, strictly inside the bounds.
            torch.Tensor: [batch] log-probability of the action.
        """
        mean, log_std = self.distribution_params(x)
        u = gaussian_sample_reparam(mean, log_std, noise)
        if not self.squash:
            return u, self._log_prob_from_latent(u, mean, log_std)
        u = torch.clamp(u, -PRE_SQUASH_LIMIT, PRE_SQUASH_LIMIT)
        action = self.midpoint + self.half_range * torch.tanh(u)
        return action, self._log_prob_from_latent(u, mean, log_std)

    def log_prob(self, x, action):
        """
        Args:
            x (torch.Tensor): [batch x input_dim] conditioning input.
            action (torch.Tensor): [batch x action_dims] action, strictly inside the bounds.

        Raises:
            DomainError: If an action component is on or outside its bound.

        Returns:
            torch.Tensor: [batch] log-probability.
        """
        mean, log_std = self.distribution_params(x)
        if not self.squash:
            return self._log_prob_from_latent(action, mean, log_std)
        if bool((action <= self.low).any()) or bool((action >= self.high).any()):
            message = f"Action of `{self.node_id}` must be strictly inside "
            message += f"({self.low.tolist()}, {self.high.tolist()}). Was {action.tolist()}. "
            raise DomainError(message)
        y = (action - self.midpoint) / self.half_range
        y = torch.clamp(y, -1 + 1e-15, 1 - 1e-15)
        u = torch.clamp(torch.atanh(y), -PRE_SQUASH_LIMIT, PRE_SQUASH_LIMIT)
        return self._log_prob_from_latent(u, mean, log_std)


class JointPolicy(nn.Module):
    """
    The joint policy pi(t_1, ..., t_m | s) = prod_i pi_i(t_i | s, parents(t_i)). Sub-policies are sampled in the
    graph's topological order, each one sees the state and its parents' (squashed) actions, and the joint action
    is laid out in topological order.
    """
    def __init__(self, graph, obs_dim, action_low, action_high, hidden_sizes=(64, 64), generator=None, squash=True):
        """
        Args:
            graph (StrategyGraph): The strategy graph.
            obs_dim (int): Observation width.
            action_low (list of float): Lower bounds of the joint action, in the global (topological) layout.
            action_high (list of float): Upper bounds of the joint action, in the global layout.
            hidden_sizes (list of int): Hidden layer sizes of every sub-policy network.
            generator (torch.Generator, optional): Generator for the initialization.
            squash (bool): If False, sub-policies are unbounded Gaussians. Only meant for tests.
        """
        super(JointPolicy, self).__init__()
        action_low = [float(value) for value in action_low]
        action_high = [float(value) for value in action_high]
        if len(action_low) != graph.total_action_dim or len(action_high) != graph.total_action_dim:
            message = f"Bounds must have one entry per action dimension ({graph.total_action_dim}). "
            message += f"Was {len(action_low)} and {len(action_high)}. "
            raise DimensionError(message)
        self.graph = graph
        self.obs_dim = int(obs_dim)
        self.hidden_sizes = [int(size) for size in hidden_sizes]
        self.action_low = action_low
        self.action_high = action_high
        self.squash = squash
        self.order = topological_order(graph)
        self.slices = graph.action_slices()
        self.subs = nn.ModuleDict()
        for node_id in self.order:  # Creation order fixes the initialization stream
            node_slice = self.slices[node_id]
            self.subs[node_id] = SubPolicy(
                node_id, graph.conditioning_width(node_id, self.obs_dim), graph.node(node_id).action_dims,
                self.hidden_sizes, action_low[node_slice], action_high[node_slice], generator=generator,
                squash=squash)

    @property
    def m(self):
        return self.graph.m

    @property
    def action_dim(self):
        return self.graph.total_action_dim

    def _as_batch(self, state):
        state = torch.as_tensor(state, dtype=DTYPE)
        if state.dim() == 1:
            return state.unsqueeze(0), True
        return state, False

    def sample_joint(self, state, generator=None, noise=None):
        """
        Sample a joint action through the strategy chain with reparameterized noise.

        Args:
            state (torch.Tensor): [obs_dim] or [batch x obs_dim] observation.
            generator (torch.Generator, optional): Noise source, used when `noise` is None.
            noise (dict of str: torch.Tensor, optional): Explicit standard normal noise per node id, each
                [batch x action_dims].

        Returns:
            torch.Tensor: [batch x total_action_dim] joint action (unbatched if `state` was).
            torch.Tensor: [batch x m] per-sub-policy log-probabilities, in topological order.
        """
        state, single = self._as_batch(state)
        if state.shape[-1] != self.obs_dim:
            raise DimensionError(f"State must have width {self.obs_dim}. Was {state.shape[-1]}. ")
        batch_size = state.shape[0]
        sampled = {}
        log_probs = []
        for node_id in self.order:
            sub = self.subs[node_id]
            if noise is not None:
                eps = torch.as_tensor(noise[node_id], dtype=DTYPE).reshape(batch_size, sub.action_dims)
            else:
                eps = torch.randn((batch_size, sub.action_dims), generator=generator, dtype=DTYPE)
            x = conditioning_input(self.graph, node_id, state, sampled)
            action, log_prob = sub.sample(x, eps)
            sampled[node_id] = action
            log_probs.append(log_prob)
        action = torch.cat([sampled[node_id] for node_id in self.order], dim=-1)
        per_sub = torch.stack(log_probs, dim=-1)
        if single:
            return action[0], per_sub[0]
        return action, per_sub

    def log_prob_joint(self, state, action, evaluation_order=None):
        """
        Log-probability of a given joint action. Each node's conditioning input is rebuilt from the action's own
        slices, so the nodes can be evaluated in any order.

        Args:
            state (torch.Tensor): [obs_dim] or [batch x obs_dim] observation.
            action (torch.Tensor): [total_action_dim] or [batch x total_action_dim] joint action in global layout.
            evaluation_order (list of str, optional): Order to evaluate the nodes in. Defaults to topological.

        Raises:
            DomainError: If an action component is on or outside its bound.

        Returns:
            torch.Tensor: [batch] total log-probability (unbatched if `state` was).
            torch.Tensor: [batch x m] per-sub-policy log-probabilities, in topological order.
        """
        state, single = self._as_batch(state)
        action = torch.as_tensor(action, dtype=DTYPE)
        if action.dim() == 1:
            action = action.unsqueeze(0)
        if action.shape[-1] != self.action_dim:
            raise DimensionError(f"Action must have width {self.action_dim}. Was {action.shape[-1]}. ")
        given = {node_id: action[:, self.slices[node_id]] for node_id in self.order}
        per_node = {}
        for node_id in evaluation_order or self.order:
            x = conditioning_input(self.graph, node_id, state, given)
            per_node[node_id] = self.subs[node_id].log_prob(x, given[node_id])
        per_sub = torch.stack([per_node[node_id] for node_id in self.order], dim=-1)
        total = per_sub.sum(dim=-1)
        if single:
            return total[0], per_sub[0]
        return total, per_sub

    def entropy_terms(self, state, n_samples, generator=None, return_std_error=False):
        """
        Monte-Carlo estimates of each sub-policy's entropy E[-log pi_i] at one state.

        Args:
            state (torch.Tensor): [obs_dim] observation.
            n_samples (int): Number of draws, at least 1.
            generator (torch.Generator, optional): Noise source.
            return_std_error (bool): If True, also return the standard error of each estimate.

        Returns:
            torch.Tensor: [m] entropy estimates, in topological order.
            torch.Tensor: [m] standard errors, only if `return_std_error`.
        """
        if n_samples < 1:
            raise ContractError(f"`n_samples` must be at least 1. Was {n_samples}. ")
        state = torch.as_tensor(state, dtype=DTYPE).reshape(1, -1).expand(n_samples, -1)
        with torch.no_grad():
            _, per_sub = self.sample_joint(state, generator=generator)
        estimates = -per_sub.mean(dim=0)
        if not return_std_error:
            return estimates
        if n_samples == 1:
            return estimates, torch.zeros_like(estimates)
        return estimates, per_sub.std(dim=0) / math.sqrt(n_samples)

    def deterministic_action(self, state):
        """
        Squashed, rescaled means, chained through the graph with zero noise.
        """
        state, single = self._as_batch(state)
        noise = {node_id: torch.zeros((state.shape[0], self.subs[node_id].action_dims), dtype=DTYPE)
                 for node_id in self.order}
        with torch.no_grad():
            action, _ = self.sample_joint(state, noise=noise)
        if single:
            return action[0]
        return action

    def describe(self):
        """
        Returns:
            dict: Json-serializable description from which `from_description()` rebuilds the architecture.
        """
        return {"graph": self.graph.to_dict(), "obs_dim": self.obs_dim, "action_low": self.action_low,
                "action_high": self.action_high, "hidden_sizes": self.hidden_sizes, "squash": self.squash}

    @classmethod
    def from_description(cls, description):
        return cls(StrategyGraph.from_dict(description["graph"]), description["obs_dim"],
                   description["action_low"], description["action_high"], description["hidden_sizes"],
                   squash=description.get("squash", True))
