"""
Soft value iteration on finite MDPs. The fixed point of the soft Bellman operator is the optimal maximum-entropy
value function, and its Boltzmann policy the optimal soft policy. Used to check convergence claims on problems small
enough to solve exactly.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from src.common.exceptions import ConfigurationError, NonConvergenceError
from src.common.utils import get_logger
from src.constants import MDP_SCHEMA_VERSION, SOFT_ITERATION_MAX_ITERATIONS, SOFT_ITERATION_TOLERANCE

logger = get_logger(__name__)


@dataclass
class FiniteMDP:
    """
    Args:
        transitions (np.ndarray): [n_states x n_actions x n_states] transition probabilities P(s' | s, a).
        rewards (np.ndarray): [n_states x n_actions] expected rewards.
    """
    transitions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        if self.transitions.ndim != 3 or self.transitions.shape[0] != self.transitions.shape[2]:
            message = f"`transitions` must be [n_states, n_actions, n_states]. Was {self.transitions.shape}. "
            raise ConfigurationError(message)
        if self.rewards.shape != self.transitions.shape[:2]:
            message = f"`rewards` must be {self.transitions.shape[:2]}. Was {self.rewards.shape}. "
            raise ConfigurationError(message)
        if (self.transitions < 0).any() or not np.allclose(self.transitions.sum(axis=2), 1.0, atol=1e-9):
            raise ConfigurationError("Every row of `transitions` must be a probability distribution. ")
        if not np.isfinite(self.rewards).all():
            raise ConfigurationError("`rewards` must be finite. ")

    @property
    def n_states(self):
        return self.transitions.shape[0]

    @property
    def n_actions(self):
        return self.transitions.shape[1]

    @classmethod
    def from_dict(cls, mdp_dict):
        version = mdp_dict.get("schema_version", MDP_SCHEMA_VERSION)
        if version != MDP_SCHEMA_VERSION:
            raise ConfigurationError(f"Unsupported MDP schema version. Must be {MDP_SCHEMA_VERSION}. Was {version}. ")
        try:
            return cls(transitions=mdp_dict["transitions"], rewards=mdp_dict["rewards"])
        except KeyError as error:
            raise ConfigurationError(f"MDP definition is missing {error}. ") from error

    def to_dict(self):
        return {"schema_version": MDP_SCHEMA_VERSION, "transitions": self.transitions.tolist(),
                "rewards": self.rewards.tolist()}


@dataclass
class SoftIterationResult:
    """
    Args:
        values (np.ndarray): [n_states] soft optimal values.
        q_values (np.ndarray): [n_states x n_actions] soft optimal Q-values.
        policy (np.ndarray): [n_states x n_actions] Boltzmann policy exp((Q - V) / alpha).
        residuals (list of float): Sup-norm change of V per iteration.
    """
    values: np.ndarray
    q_values: np.ndarray
    policy: np.ndarray
    residuals: list

    @property
    def n_iterations(self):
        return len(self.residuals)


def soft_backup(mdp, values, discount):
    """Q(s, a) = r(s, a) + discount * E[V(s')]."""
    return mdp.rewards + discount * mdp.transitions @ values


def tabular_soft_iteration_oracle(mdp, alpha, discount, tolerance=SOFT_ITERATION_TOLERANCE,
                                  max_iterations=SOFT_ITERATION_MAX_ITERATIONS):
    """
    Iterate V(s) <- alpha * log sum_a exp(Q(s, a) / alpha), Q(s, a) <- r(s, a) + discount * E[V(s')] until the
    sup-norm change of V is below `tolerance`.

    Args:
        mdp (FiniteMDP): The MDP.
        alpha (float): Temperature, positive. Small values approach hard value iteration.
        discount (float): Discount in [0, 1).
        tolerance (float): Convergence threshold on the sup-norm residual.
        max_iterations (int): Iteration cap.

    Raises:
        ConfigurationError: If `alpha` is not positive or `discount` is not in [0, 1).
        NonConvergenceError: If the residual turns non-finite or the cap is reached.

    Returns:
        SoftIterationResult: Fixed point, Boltzmann policy and residual history.
    """
    if not alpha > 0:
        raise ConfigurationError(f"`alpha` must be positive. Was {alpha}. ")
    if not 0 <= discount < 1:
        raise ConfigurationError(f"`discount` must be in [0, 1). Was {discount}. ")
    values = np.zeros(mdp.n_states)
    residuals = []
    for iteration in range(max_iterations):
        q_values = soft_backup(mdp, values, discount)
        new_values = alpha * logsumexp(q_values / alpha, axis=1)
        residual = float(np.max(np.abs(new_values - values)))
        residuals.append(residual)
        values = new_values
        if not np.isfinite(residual):
            raise NonConvergenceError(f"Soft iteration diverged at iteration {iteration + 1}. ", residuals)
        if residual < tolerance:
            break
    else:
        message = f"Soft iteration did not reach residual {tolerance} in {max_iterations} iterations. "
        message += f"Last residual was {residuals[-1]}. "
        raise NonConvergenceError(message, residuals)

    q_values = soft_backup(mdp, values, discount)
    policy = softmax(q_values / alpha, axis=1)
    logger.debug(f"Soft iteration converged after {len(residuals)} iterations, residual {residuals[-1]:.3e}.")
    return SoftIterationResult(values=values, q_values=q_values, policy=policy, residuals=residuals)


def hard_value_iteration(mdp, discount, tolerance=SOFT_ITERATION_TOLERANCE,
                         max_iterations=SOFT_ITERATION_MAX_ITERATIONS):
    """
    Standard value iteration, the alpha -> 0 limit of the soft oracle.

    Returns:
        np.ndarray: [n_states] optimal values.
        np.ndarray: [n_states x n_actions] optimal Q-values.
    """
    values = np.zeros(mdp.n_states)
    for _ in range(max_iterations):
        q_values = soft_backup(mdp, values, discount)
        new_values = q_values.max(axis=1)
        residual = np.max(np.abs(new_values - values))
        values = new_values
        if residual < tolerance:
            return values, soft_backup(mdp, values, discount)
    raise NonConvergenceError(f"Value iteration did not converge in {max_iterations} iterations. ")


def random_finite_mdp(n_states, n_actions, rng):
    """
    Random MDP with Dirichlet transition rows and standard normal rewards.

    Args:
        n_states (int): Number of states.
        n_actions (int): Number of actions.
        rng (np.random.Generator): Generator.

    Returns:
        FiniteMDP: The MDP.
    """
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    rewards = rng.standard_normal((n_states, n_actions))
    return FiniteMDP(transitions=transitions, rewards=rewards)
