"""
Agent needs hierarchy: five levels of expected utilities (safety, basic, capability, teaming, learning), each level
only considered once the level below it is satisfied, and a reward shaping term that targets the lowest unmet need.
"""
import math
from dataclasses import dataclass
from enum import IntEnum

from src.common.exceptions import ConfigurationError, DomainError
from src.common.utils import get_logger

logger = get_logger(__name__)


class NeedsLevel(IntEnum):
    SAFETY = 0
    BASIC = 1
    CAPABILITY = 2
    TEAMING = 3
    LEARNING = 4

    @classmethod
    def parse(cls, value):
        if isinstance(value, NeedsLevel):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            message = f"Needs level must be in {[level.name.lower() for level in cls]}. Was {value}. "
            raise ConfigurationError(message) from None


@dataclass(frozen=True)
class FeatureSpec:
    """
    Args:
        id (str): Feature id.
        level (NeedsLevel): The level the feature counts toward.
        utility (float): Utility value of the feature.
        probe_id (str): Id of the probe that gives the feature's probability.
    """
    id: str
    level: NeedsLevel
    utility: float
    probe_id: str


@dataclass(frozen=True)
class NeedsConfig:
    """
    Args:
        features (tuple of FeatureSpec): All features, on any level.
        thresholds (dict of NeedsLevel: float): Satisfaction threshold per level. Every level must be present.
        shaping_weight (float): Weight of the dominant level's value in `shaped_reward()`.
        task (str): Task label handed to probes. Carries no meaning for a single agent.
    """
    features: tuple
    thresholds: dict
    shaping_weight: float = 0.0
    task: str = "default"

    def __post_init__(self):
        missing = [level.name.lower() for level in NeedsLevel if level not in self.thresholds]
        if missing:
            raise ConfigurationError(f"Needs thresholds are missing levels {missing}. ")
        if not any(feature.level == NeedsLevel.SAFETY for feature in self.features):
            raise ConfigurationError("Needs config needs at least one feature on the safety level. ")
        for feature in self.features:
            if not math.isfinite(feature.utility):
                raise ConfigurationError(f"Utility of feature `{feature.id}` must be finite. Was {feature.utility}. ")
        if not math.isfinite(self.shaping_weight):
            raise ConfigurationError(f"`shaping_weight` must be finite. Was {self.shaping_weight}. ")

    def features_at(self, level):
        return [feature for feature in self.features if feature.level == level]

    @property
    def probe_ids(self):
        return sorted({feature.probe_id for feature in self.features})

    @classmethod
    def from_dict(cls, needs_dict):
        """
        Build from the `needs` block of an experiment config:
        `{"shaping_weight", "task", "thresholds": {level: value}, "features": [{"id", "level", "utility", "probe"}]}`.
        """
        try:
            features = tuple(
                FeatureSpec(id=str(entry["id"]), level=NeedsLevel.parse(entry["level"]),
                            utility=float(entry["utility"]), probe_id=str(entry.get("probe", entry["id"])))
                for entry in needs_dict["features"])
            thresholds = {NeedsLevel.parse(level): float(value) for level, value in needs_dict["thresholds"].items()}
        except (KeyError, TypeError) as error:
            raise ConfigurationError(f"Malformed needs config. Missing or bad entry {error}. ") from error
        return cls(features=features, thresholds=thresholds,
                   shaping_weight=float(needs_dict.get("shaping_weight", 0.0)),
                   task=str(needs_dict.get("task", "default")))

    def to_dict(self):
        return {"shaping_weight": self.shaping_weight, "task": self.task,
                "thresholds": {level.name.lower(): self.thresholds[level] for level in NeedsLevel},
                "features": [{"id": f.id, "level": f.level.name.lower(), "utility": f.utility, "probe": f.probe_id}
                             for f in self.features]}


@dataclass(frozen=True)
class NeedsProfile:
    """
    Per-level values, satisfaction flags and the dominant (lowest unsatisfied) level. `combined` is the union of
    all five values in level order. Levels above the first unsatisfied one are 0.
    """
    n_s: float
    n_b: float
    n_c: float
    n_t: float
    n_l: float
    satisfied: dict
    dominant_level: NeedsLevel

    @property
    def combined(self):
        return (self.n_s, self.n_b, self.n_c, self.n_t, self.n_l)

    def value(self, level):
        return self.combined[int(level)]


def level_expectation(level, config, probes):
    """
    Expected utility of a level, sum over its features of utility * probability.

    Args:
        level (NeedsLevel or str): The level.
        config (NeedsConfig): The config.
        probes (dict of str: float): Probe values by probe id.

    Raises:
        ConfigurationError: If a probe of the level is missing.
        DomainError: If a probe value is outside [0, 1].

    Returns:
        float: The level's value. 0 for a level without features.
    """
    level = NeedsLevel.parse(level)
    total = 0.0
    for feature in config.features_at(level):
        if feature.probe_id not in probes:
            message = f"Probe `{feature.probe_id}` for feature `{feature.id}` is missing. "
            message += f"Available probes are {sorted(probes)}. "
            raise ConfigurationError(message)
        probability = float(probes[feature.probe_id])
        if not 0.0 <= probability <= 1.0:
            raise DomainError(f"Probe `{feature.probe_id}` must be in [0, 1]. Was {probability}. ")
        total += feature.utility * probability
    return total


def evaluate_profile(config, probes):
    """
    Evaluate the hierarchy bottom-up. A level is evaluated only when the level below is satisfied, otherwise its
    value is 0 and it is unsatisfied.

    Args:
        config (NeedsConfig): The config.
        probes (dict of str: float): Probe values by probe id.

    Returns:
        NeedsProfile: The profile.
    """
    values = []
    satisfied = {}
    dominant = None
    gate_open = True
    for level in NeedsLevel:
        if gate_open:
            value = level_expectation(level, config, probes)
            satisfied[level] = value >= config.thresholds[level]
            if not satisfied[level]:
                dominant = level
                gate_open = False
        else:
            value = 0.0
            satisfied[level] = False
        values.append(value)
    if dominant is None:
        dominant = NeedsLevel.LEARNING
    return NeedsProfile(*values, satisfied=satisfied, dominant_level=dominant)


def shaped_reward(base_reward, profile, config):
    """
    `base_reward + shaping_weight * value(dominant_level)`. A weight of 0 returns `base_reward` unchanged.
    """
    if config.shaping_weight == 0:
        return base_reward
    return base_reward + config.shaping_weight * profile.value(profile.dominant_level)


def needs_for_step(reward, probes, config):
    """
    Profile and shaped reward for one environment step.

    Args:
        reward (float): The environment reward.
        probes (dict of str: float): The step's probe values.
        config (NeedsConfig): The config.

    Returns:
        float: Shaped reward.
        NeedsProfile: The profile.
    """
    profile = evaluate_profile(config, probes)
    return shaped_reward(reward, profile, config), profile
