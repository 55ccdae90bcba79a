"""
Point mass in a walled arena with circular hazards, a goal and a draining battery.
Its probes feed the needs hierarchy.
"""
import math

import numpy as np

from src.constants import (HAZARD_ARENA, HAZARD_BATTERY_BASE_DRAIN, HAZARD_BATTERY_THRUST_DRAIN, HAZARD_CIRCLES,
                           HAZARD_COLLISION_PENALTY, HAZARD_DAMPING, HAZARD_DT, HAZARD_GOAL, HAZARD_GOAL_RADIUS,
                           HAZARD_INFLUENCE, HAZARD_MASS, HAZARD_MAX_STEPS, HAZARD_START, HAZARD_START_NOISE,
                           HAZARD_THRUST_GAIN)
from src.environments.base import Environment, EnvSpec

MAX_THRUST_NORM = math.sqrt(2.0)
ARENA_DIAGONAL = 2 * math.sqrt(2.0) * HAZARD_ARENA


def _clamp01(value):
    return min(max(value, 0.0), 1.0)


class HazardPointMass(Environment):
    """
    Damped point mass with 2-D thrust in a walled square arena, a goal disc, circular hazards and a battery that
    drains with thrust. Reward is -distance(goal) minus a penalty while inside a hazard. The episode ends in the
    goal disc or on an empty battery.

    Observation: [x, y, vx, vy, goal_x - x, goal_y - y, battery, hazard_clearance].
    """
    spec = EnvSpec(
        name="hazard_point_mass", obs_dim=8, action_dim=2, action_low=(-1.0, -1.0), action_high=(1.0, 1.0),
        dt=HAZARD_DT, max_steps=HAZARD_MAX_STEPS,
        probe_catalog={"hazard_clearance": "1 - hazard proximity, 0 on or inside a hazard edge",
                       "battery_level": "remaining battery fraction",
                       "thrust_headroom": "1 - |last thrust| / sqrt(2)",
                       "goal_progress": "1 - distance(goal) / arena diagonal"})

    def __init__(self):
        super().__init__()
        self.position = np.array(HAZARD_START, dtype=np.float64)
        self.velocity = np.zeros(2)
        self.battery = 1.0
        self.last_thrust = np.zeros(2)
        self.goal = np.array(HAZARD_GOAL, dtype=np.float64)

    def _reset(self, rng):
        self.position = np.array(HAZARD_START, dtype=np.float64) + rng.uniform(-HAZARD_START_NOISE,
                                                                               HAZARD_START_NOISE, size=2)
        self.velocity = np.zeros(2)
        self.battery = 1.0
        self.last_thrust = np.zeros(2)

    def goal_distance(self):
        return float(np.linalg.norm(self.goal - self.position))

    def hazard_proximity(self):
        """
        Returns:
            float: In [0, 1]. 0 when farther than the influence distance from every hazard edge, 1 on or inside one.
        """
        proximity = 0.0
        for x, y, radius in HAZARD_CIRCLES:
            gap = math.hypot(self.position[0] - x, self.position[1] - y) - radius
            proximity = max(proximity, _clamp01((HAZARD_INFLUENCE - gap) / HAZARD_INFLUENCE))
        return proximity

    def in_hazard(self):
        return any(math.hypot(self.position[0] - x, self.position[1] - y) < radius for x, y, radius in HAZARD_CIRCLES)

    def _step(self, action):
        thrust = np.array(action, dtype=np.float64)
        acceleration = (HAZARD_THRUST_GAIN * thrust - HAZARD_DAMPING * self.velocity) / HAZARD_MASS
        self.velocity = self.velocity + HAZARD_DT * acceleration
        self.position = self.position + HAZARD_DT * self.velocity
        for axis in range(2):  # Walls stop the mass
            if abs(self.position[axis]) > HAZARD_ARENA:
                self.position[axis] = math.copysign(HAZARD_ARENA, self.position[axis])
                self.velocity[axis] = 0.0
        self.battery = max(0.0, self.battery - HAZARD_BATTERY_BASE_DRAIN
                           - HAZARD_BATTERY_THRUST_DRAIN * float(thrust @ thrust))
        self.last_thrust = thrust
        reward = -self.goal_distance()
        if self.in_hazard():
            reward -= HAZARD_COLLISION_PENALTY
        terminal = self.goal_distance() < HAZARD_GOAL_RADIUS or self.battery <= 0.0
        return self._observation(), reward, terminal

    def _observation(self):
        delta = self.goal - self.position
        return np.array([self.position[0], self.position[1], self.velocity[0], self.velocity[1], delta[0], delta[1],
                         self.battery, 1 - self.hazard_proximity()])

    def _probes(self):
        return {"hazard_clearance": 1 - self.hazard_proximity(),
                "battery_level": _clamp01(self.battery),
                "thrust_headroom": _clamp01(1 - float(np.linalg.norm(self.last_thrust)) / MAX_THRUST_NORM),
                "goal_progress": _clamp01(1 - self.goal_distance() / ARENA_DIAGONAL)}
