"""
Off-policy maximum-entropy learner. With a single-node strategy graph this is Soft Actor-Critic with an explicit
state value network, with a multi-node graph it is the factorized variant where the entropy bonus is split evenly
over the m sub-policies.
"""
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch
import torch.nn.functional as F

from src.common.exceptions import ConfigurationError
from src.common.utils import derive_seed, get_logger, make_generator
from src.models.critics import CriticBank
from src.models.joint_policy import JointPolicy
from src.numerics import DTYPE, adam_step, backward, make_adam
from src.replay_buffer import ReplayBuffer

logger = get_logger(__name__)


@dataclass
class Hyperparams:
    """
    Learner hyperparameters. The sub-policy count m is not stored here, it is read from the strategy graph.
    """
    discount: float = 0.99
    temperature: float = 0.2
    tau: float = 0.005
    q_learning_rate: float = 3e-4
    value_learning_rate: float = 3e-4
    policy_learning_rate: float = 3e-4
    batch_size: int = 256
    warmup_steps: int = 1000
    update_interval: int = 1
    buffer_capacity: int = 100_000
    hidden_sizes: list = field(default_factory=lambda: [64, 64])

    def __post_init__(self):
        problems = []
        if not 0 < self.discount < 1:
            problems.append(f"`discount` must be in (0, 1). Was {self.discount}. ")
        if not self.temperature >= 0:
            problems.append(f"`temperature` must be non-negative. Was {self.temperature}. ")
        if not 0 < self.tau <= 1:
            problems.append(f"`tau` must be in (0, 1]. Was {self.tau}. ")
        for name in ["q_learning_rate", "value_learning_rate", "policy_learning_rate"]:
            if not getattr(self, name) >= 0:
                problems.append(f"`{name}` must be non-negative. Was {getattr(self, name)}. ")
        for name in ["batch_size", "update_interval", "buffer_capacity"]:
            if int(getattr(self, name)) < 1:
                problems.append(f"`{name}` must be a positive integer. Was {getattr(self, name)}. ")
        if int(self.warmup_steps) < 0:
            problems.append(f"`warmup_steps` must be non-negative. Was {self.warmup_steps}. ")
        if len(self.hidden_sizes) == 0 or min(self.hidden_sizes) < 1:
            problems.append(f"`hidden_sizes` must be a non-empty list of positive ints. Was {self.hidden_sizes}. ")
        if problems:
            raise ConfigurationError("".join(problems))
        self.hidden_sizes = [int(size) for size in self.hidden_sizes]

    @classmethod
    def from_dict(cls, hp_dict):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(hp_dict) - known)
        if unknown:
            raise ConfigurationError(f"Unknown hyperparameters {unknown}. Must be in {sorted(known)}. ")
        return cls(**hp_dict)

    def to_dict(self):
        return asdict(self)


@dataclass
class StepMetrics:
    """
    Losses and per-sub-policy entropy estimates of one train step. `ready` is False when the learner had too
    little data, in which case all values are NaN.
    """
    q1_loss: float
    q2_loss: float
    v_loss: float
    policy_loss: float
    entropies: list
    ready: bool = True

    @classmethod
    def not_ready(cls, m):
        return cls(math.nan, math.nan, math.nan, math.nan, [math.nan] * m, ready=False)


def q_target(batch, critics, hp):
    """
    Soft Bellman backup `r + discount * (1 - done) * V_target(s')`, with no gradient.

    Args:
        batch (TransitionBatch): The transitions.
        critics (CriticBank): The critics.
        hp (Hyperparams): Hyperparameters.

    Returns:
        torch.Tensor: [batch] targets.
    """
    return batch.rewards + hp.discount * (1 - batch.dones) * critics.target_v(batch.next_states)


def value_target(states, policy, critics, hp, generator=None, n_samples=1):
    """
    Soft value target `min(Q1, Q2)(s, A) - temperature * log pi(A | s)` with A drawn from the joint policy. The
    joint log-probability is the sum of the per-sub-policy terms, so the per-node split does not change the total.

    Args:
        states (torch.Tensor): [batch x obs_dim] states.
        policy (JointPolicy): The policy.
        critics (CriticBank): The critics.
        hp (Hyperparams): Hyperparameters.
        generator (torch.Generator, optional): Noise source.
        n_samples (int): Action draws per state, averaged.

    Returns:
        torch.Tensor: [batch] targets, with no gradient.
    """
    batch_size = states.shape[0]
    with torch.no_grad():
        repeated = states.repeat_interleave(n_samples, dim=0)
        actions, per_sub = policy.sample_joint(repeated, generator=generator)
        targets = critics.min_q(repeated, actions) - hp.temperature * per_sub.sum(dim=-1)
        return targets.reshape(batch_size, n_samples).mean(dim=1)


def q_losses(batch, critics, hp):
    """
    Mean squared soft Bellman errors of Q1 and Q2 against `q_target()`. The target carries no gradient.

    Returns:
        torch.Tensor: Scalar Q1 loss.
        torch.Tensor: Scalar Q2 loss.
    """
    targets = q_target(batch, critics, hp)
    q1, q2 = critics.q_values(batch.states, batch.actions)
    return F.mse_loss(q1, targets), F.mse_loss(q2, targets)


def value_loss(states, policy, critics, hp, generator=None, n_samples=1):
    """Mean squared error of V against `value_target()`, with gradient to the V network only."""
    targets = value_target(states, policy, critics, hp, generator=generator, n_samples=n_samples)
    return F.mse_loss(critics.v(states), targets)


def policy_loss(
states, policy, critics, hp, generator=None, return_log_probs=False):
    """
    Reparameterized policy loss, mean over the batch of `sum_i (temperature / m) * log pi_i - min(Q1, Q2)(s, A)`.
    The partition function of the Boltzmann target does not depend on the policy, so it is left out.
    With m = 1 this is the standard SAC policy loss.

    Args:
        states (torch.Tensor): [batch x obs_dim] states.
        policy (JointPolicy): The policy.
        critics (CriticBank): The critics. Gradients also reach their parameters, zero those before critic steps.
        hp (Hyperparams): Hyperparameters.
        generator (torch.Generator, optional): Noise source.
        return_log_probs (bool): If True, also return the [batch x m] per-sub-policy log-probabilities (detached).

    Returns:
        torch.Tensor: Scalar loss.
    """
    if states.shape[0] == 0:
        raise ConfigurationError("`policy_loss` needs a non-empty batch. ")
    actions, per_sub = policy.sample_joint(states, generator=generator)
    entropy_term = (hp.temperature / policy.m) * per_sub.sum(dim=-1)
    loss = (entropy_term - critics.min_q(states, actions)).mean()
    if return_log_probs:
        return loss, per_sub.detach()
    return loss


class SoftLearner:
    """
    Owns a joint policy, the critic bank, three Adam optimizers, the replay buffer and the noise generator.
    One instance is single-threaded. All randomness comes from sub-seeds of the run seed.
    """
    def __init__(self, policy, critics, hp, seed=0):
        """
        Args:
            policy (JointPolicy): The policy.
            critics (CriticBank): The critics.
            hp (Hyperparams): Hyperparameters.
            seed (int): Run seed, the noise and replay streams are derived from it.
        """
        self.policy = policy
        self.critics = critics
        self.hp = hp
        self.seed = seed
        self.generator = make_generator(derive_seed(seed, "noise"))
        self.buffer = ReplayBuffer(hp.buffer_capacity, policy.obs_dim, policy.action_dim,
                                   seed=derive_seed(seed, "replay"))
        q_params = [(f"q1.{name}", p) for name, p in critics.q1.named_parameters()]
        q_params += [(f"q2.{name}", p) for name, p in critics.q2.named_parameters()]
        self.q_optimizer = make_adam(q_params, hp.q_learning_rate)
        self.value_optimizer = make_adam(
            [(f"value.{name}", p) for name, p in critics.value.named_parameters()], hp.value_learning_rate)
        self.policy_optimizer = make_adam(
            [(f"policy.{name}", p) for name, p in policy.named_parameters()], hp.policy_learning_rate)
        self.n_updates = 0

    @classmethod
    def build(cls, graph, obs_dim, action_low, action_high, hp, seed=0):
        """
        Build policy and critics from the `init` stream of `seed`, the policy first.
        """
        init_generator = make_generator(derive_seed(seed, "init"))
        policy = JointPolicy(graph, obs_dim, action_low, action_high, hp.hidden_sizes, generator=init_generator)
        critics = CriticBank(obs_dim, graph.total_action_dim, hp.hidden_sizes, generator=init_generator)
        return cls(policy, critics, hp, seed=seed)

    @property
    def m(self):
        return self.policy.m

    def is_ready(self):
        return len(self.buffer) >= self.hp.batch_size and len(self.buffer) >= self.hp.warmup_steps

    def observe(self, transition):
        self.buffer.push(transition)

    def act(self, state, deterministic=False):
        """
        Args:
            state (np.ndarray): [obs_dim] observation.
            deterministic (bool): If True, use the deterministic action (zero noise).

        Returns:
            np.ndarray: [action_dim] action in the policy's global layout.
        """
        state = torch.as_tensor(np.asarray(state), dtype=DTYPE)
        if deterministic:
            return self.policy.deterministic_action(state).numpy()
        with torch.no_grad():
            action, _ = self.policy.sample_joint(state, generator=self.generator)
        return action.numpy()

    def train_step(self):
        """
        One gradient step each for Q1 and Q2, V and the policy, then the target value update.

        Returns:
            StepMetrics: Losses and entropy estimates, or `StepMetrics.not_ready()` without enough data.
        """
        if not self.is_ready():
            return StepMetrics.not_ready(self.m)
        hp = self.hp
        batch = self.buffer.sample(hp.batch_size)

        q1_loss, q2_loss = q_losses(batch, self.critics, hp)
        self.q_optimizer.zero_grad()
        backward(q1_loss + q2_loss)
        adam_step(self.q_optimizer)

        v_loss = value_loss(batch.states, self.policy, self.critics, hp, generator=self.generator)
        self.value_optimizer.zero_grad()
        backward(v_loss)
        adam_step(self.value_optimizer)

        pi_loss, per_sub = policy_loss(batch.states, self.policy, self.critics, hp, generator=self.generator,
                                       return_log_probs=True)
        self.policy_optimizer.zero_grad()
        backward(pi_loss)
        adam_step(self.policy_optimizer)

        self.critics.soft_update(hp.tau)
        self.n_updates += 1
        metrics = StepMetrics(q1_loss=q1_loss.item(), q2_loss=q2_loss.item(), v_loss=v_loss.item(),
                              policy_loss=pi_loss.item(), entropies=(-per_sub.mean(dim=0)).tolist())
        logger.debug(f"Update {self.n_updates}: {metrics}")
        return metrics

    def named_tensors(self):
        """
        Returns:
            dict of str: torch.Tensor: Every parameter and buffer of the policy and the critics.
        """
        tensors = {f"policy.{name}": tensor for name, tensor in self.policy.state_dict().items()}
        tensors.update({f"critics.{name}": tensor for name, tensor in self.critics.state_dict().items()})
        return tensors

    def load_named_tensors(self, tensors):
        self.policy.load_state_dict(
            {name[len("policy."):]: tensor for name, tensor in tensors.items() if name.startswith("policy.")})
        self.critics.load_state_dict(
            {name[len("critics."):]: tensor for name, tensor in tensors.items() if name.startswith("critics.")})
