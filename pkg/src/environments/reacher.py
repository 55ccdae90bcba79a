"""
Planar two-link reacher with independent joint rotors, its inverse-kinematics PD controller and the scripted baseline.
"""
import math

import numpy as np

from src.common.utils import derive_seed
from src.constants import (REACHER_CANONICAL_TARGET, REACHER_CONTROLLER_KD, REACHER_CONTROLLER_KP, REACHER_DAMPING,
                           REACHER_DT, REACHER_INERTIA, REACHER_INIT_ANGLE_NOISE, REACHER_LINK_LENGTHS,
                           REACHER_MAX_STEPS, REACHER_MAX_TORQUE, REACHER_TARGET_RADIUS_RANGE)
from src.environments.base import Environment, EnvSpec


def wrap_angle(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


class Reacher2(Environment):
    """
    Planar two-joint arm (shoulder, elbow) with independent damped rotor dynamics per joint, reaching for a target.
    Action is [shoulder torque, elbow torque], reward is -distance(tip, target) - 0.01 * |torque|^2.

    Observation: [cos q1, sin q1, cos q2, sin q2, q1_dot, q2_dot, target_x, target_y, tip_x - target_x,
    tip_y - target_y].
    """
    spec = EnvSpec(
        name="reacher2", obs_dim=10, action_dim=2, action_low=(-REACHER_MAX_TORQUE, -REACHER_MAX_TORQUE),
        action_high=(REACHER_MAX_TORQUE, REACHER_MAX_TORQUE), dt=REACHER_DT, max_steps=REACHER_MAX_STEPS,
        probe_catalog={"near_target": "1 - distance(tip, target) / arm reach, clamped to [0, 1]",
                       "torque_headroom": "1 - |torque| / (sqrt(2) * max torque)"})

    def __init__(self):
        super().__init__()
        self.q = np.zeros(2)
        self.q_dot = np.zeros(2)
        self.target = np.array(REACHER_CANONICAL_TARGET, dtype=np.float64)
        self.last_torque = np.zeros(2)

    def reset(self, seed=None, canonical=False):
        """
        Args:
            seed (int, optional): Seed for the initial joint angles and the target.
            canonical (bool): If True, start at q = (0, 0) at rest with the canonical target, ignoring `seed`.

        Returns:
            np.ndarray: Initial observation.
        """
        observation = super().reset(seed)
        if canonical:
            self.q = np.zeros(2)
            self.q_dot = np.zeros(2)
            self.target = np.array(REACHER_CANONICAL_TARGET, dtype=np.float64)
            observation = self._observation()
        return observation

    def _reset(self, rng):
        self.q = rng.uniform(-REACHER_INIT_ANGLE_NOISE, REACHER_INIT_ANGLE_NOISE, size=2)
        self.q_dot = np.zeros(2)
        radius = rng.uniform(*REACHER_TARGET_RADIUS_RANGE)
        angle = rng.uniform(-math.pi, math.pi)
        self.target = np.array([radius * math.cos(angle), radius * math.sin(angle)])
        self.last_torque = np.zeros(2)

    def tip(self):
        l1, l2 = REACHER_LINK_LENGTHS
        return np.array([l1 * math.cos(self.q[0]) + l2 * math.cos(self.q[0] + self.q[1]),
                         l1 * math.sin(self.q[0]) + l2 * math.sin(self.q[0] + self.q[1])])

    def distance(self):
        return float(np.linalg.norm(self.tip() - self.target))

    def _step(self, action):
        torque = np.array(action, dtype=np.float64)
        reward = -self.distance() - 0.01 * float(torque @ torque)
        acceleration = (torque - REACHER_DAMPING * self.q_dot) / REACHER_INERTIA
        self.q_dot = self.q_dot + REACHER_DT * acceleration
        self.q = self.q + REACHER_DT * self.q_dot
        self.last_torque = torque
        return self._observation(), reward, False

    def _observation(self):
        delta = self.tip() - self.target
        return np.array([math.cos(self.q[0]), math.sin(self.q[0]), math.cos(self.q[1]), math.sin(self.q[1]),
                         self.q_dot[0], self.q_dot[1], self.target[0], self.target[1], delta[0], delta[1]])

    def _probes(self):
        reach = sum(REACHER_LINK_LENGTHS)
        near = min(max(1 - self.distance() / reach, 0.0), 1.0)
        headroom = 1 - float(np.linalg.norm(self.last_torque)) / (math.sqrt(2) * REACHER_MAX_TORQUE)
        return {"near_target": near, "torque_headroom": min(max(headroom, 0.0), 1.0)}


class ReacherController:
    """
    Scripted baseline: inverse kinematics (positive elbow angle solution) for the target joint angles, then a PD
    law on each joint, clipped to the torque bounds. Works from the observation alone.
    """
    def __init__(self, kp=REACHER_CONTROLLER_KP, kd=REACHER_CONTROLLER_KD):
        self.kp = kp
        self.kd = kd

    @staticmethod
    def inverse_kinematics(target):
        l1, l2 = REACHER_LINK_LENGTHS
        x, y = float(target[0]), float(target[1])
        cos_q2 = (x ** 2 + y ** 2 - l1 ** 2 - l2 ** 2) / (2 * l1 * l2)
        q2 = math.acos(min(max(cos_q2, -1.0), 1.0))
        q1 = math.atan2(y, x) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
        return np.array([q1, q2])

    def act(self, observation):
        q = np.array([math.atan2(observation[1], observation[0]), math.atan2(observation[3], observation[2])])
        q_dot = np.asarray(observation[4:6], dtype=np.float64)
        q_target = self.inverse_kinematics(observation[6:8])
        error = np.array([wrap_angle(q_target[0] - q[0]), wrap_angle(q_target[1] - q[1])])
        torque = self.kp * error - self.kd * q_dot
        return np.clip(torque, -REACHER_MAX_TORQUE, REACHER_MAX_TORQUE)


def scripted_baseline_return(episodes=10, seed=0, env=None, controller=None):
    """
    Mean undiscounted return of `ReacherController` over `episodes` seeded episodes.

    Args:
        episodes (int): Number of episodes.
        seed (int): Seed; episode k starts from `derive_seed(seed, "episode<k>")`.
        env (Reacher2, optional): Environment to use.
        controller (ReacherController, optional): Controller to use.

    Returns:
        float: Mean return.
        list of float: Return of every episode.
    """
    env = env if env is not None else Reacher2()
    controller = controller if controller is not None else ReacherController()
    returns = []
    for episode in range(episodes):
        observation = env.reset(derive_seed(seed, f"episode{episode}"))
        total, done = 0.0, False
        while not done:
            result = env.step(controller.act(observation))
            observation, done = result.observation, result.done
            total += result.reward
        returns.append(total)
    return float(np.mean(returns)), returns
