"""
Damped torque-limited pendulum swing-up, integrated with semi-implicit Euler.
"""
import math

import numpy as np

from src.constants import (PENDULUM_DAMPING, PENDULUM_DT, PENDULUM_GRAVITY, PENDULUM_INIT_ANGLE_RANGE,
                           PENDULUM_INIT_SPEED_RANGE, PENDULUM_LENGTH, PENDULUM_MASS, PENDULUM_MAX_SPEED,
                           PENDULUM_MAX_STEPS, PENDULUM_MAX_TORQUE)
from src.environments.base import Environment, EnvSpec


def angle_from_upright(phi):
    """Map the angle from the hanging position to the angle from upright, in [-pi, pi)."""
    return (phi % (2 * math.pi)) - math.pi


class Pendulum(Environment):
    """
    Damped torque-driven pendulum, swing-up task. Internally the angle `phi` is measured from the hanging position,
    so hanging at rest is an exact fixed point. Observation is [cos(theta), sin(theta), theta_dot] with theta the
    angle from upright, reward is -(theta^2 + 0.1 * theta_dot^2 + 0.001 * torque^2). No terminal states.
    """
    spec = EnvSpec(
        name="pendulum", obs_dim=3, action_dim=1, action_low=(-PENDULUM_MAX_TORQUE,),
        action_high=(PENDULUM_MAX_TORQUE,), dt=PENDULUM_DT, max_steps=PENDULUM_MAX_STEPS,
        probe_catalog={"upright": "(1 + cos(theta)) / 2, 1 when upright",
                       "speed_margin": "1 - |theta_dot| / max_speed"})

    def __init__(self):
        super().__init__()
        self.phi = 0.0
        self.phi_dot = 0.0
        self.last_torque = 0.0

    def _reset(self, rng):
        theta = rng.uniform(-PENDULUM_INIT_ANGLE_RANGE, PENDULUM_INIT_ANGLE_RANGE)
        self.phi = float(theta + math.pi)
        self.phi_dot = float(rng.uniform(-PENDULUM_INIT_SPEED_RANGE, PENDULUM_INIT_SPEED_RANGE))
        self.last_torque = 0.0

    def set_state(self, phi, phi_dot):
        """Place the pendulum at an exact state (angle from hanging, angular speed) and start a new episode."""
        self.reset()
        self.phi = float(phi)
        self.phi_dot = float(phi_dot)
        return self._observation()

    @property
    def theta(self):
        return angle_from_upright(self.phi)

    def energy(self):
        inertia = PENDULUM_MASS * PENDULUM_LENGTH ** 2
        potential = PENDULUM_MASS * PENDULUM_GRAVITY * PENDULUM_LENGTH * (1 - math.cos(self.phi))
        return 0.5 * inertia * self.phi_dot ** 2 + potential

    def _step(self, action):
        torque = float(action[0])
        inertia = PENDULUM_MASS * PENDULUM_LENGTH ** 2
        theta = self.theta
        reward = -(theta ** 2 + 0.1 * self.phi_dot ** 2 + 0.001 * torque ** 2)
        acceleration = (-(PENDULUM_GRAVITY / PENDULUM_LENGTH) * math.sin(self.phi) - PENDULUM_DAMPING * self.phi_dot
                        + torque / inertia)
        phi_dot = self.phi_dot + PENDULUM_DT * acceleration
        self.phi_dot = min(max(phi_dot, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
        self.phi = self.phi + PENDULUM_DT * self.phi_dot
        self.last_torque = torque
        return self._observation(), reward, False

    def _observation(self):
        theta = self.theta
        return np.array([math.cos(theta), math.sin(theta), self.phi_dot], dtype=np.float64)

    def _probes(self):
        return {"upright": (1 + math.cos(self.theta)) / 2,
                "speed_margin": max(0.0, 1 - abs(self.phi_dot) / PENDULUM_MAX_SPEED)}
