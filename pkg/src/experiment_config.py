"""
Experiment configuration: which learner, on which environment, with which strategy graph, needs shaping, seeds
and evaluation schedule. Configs are yaml (or json) files with `schema_version: 1`.
"""
import copy
import warnings
from dataclasses import dataclass, field, replace

from src.common.exceptions import ConfigurationError, DimensionError
from src.common.path_utils import load_graph, load_hyperparameters, load_yaml
from src.common.utils import config_hash
from src.constants import ALGORITHMS, CONFIG_SCHEMA_VERSION
from src.environments import ENV_REGISTRY, make_env
from src.needs_hierarchy import NeedsConfig
from src.soft_learner import Hyperparams
from src.strategy_graph import StrategyGraph, single_node_graph

KNOWN_KEYS = {"schema_version", "algorithm", "env", "graph", "hyperparameters", "needs", "seeds", "total_steps",
              "eval_interval", "eval_episodes", "output_dir", "action_permutation", "record_wall_clock", "n_workers",
              "fast"}
HASH_EXCLUDED_KEYS = ["seeds", "output_dir", "n_workers"]


@dataclass
class ExperimentConfig:
    """
    Resolved and validated experiment config. Build it with `from_dict()` or `from_file()`.

    Args:
        algorithm (str): `sac` or `bsac`.
        env (str): Environment registry name.
        graph (StrategyGraph): Strategy graph. For `sac` it is always the single-node graph.
        hyperparams (Hyperparams): Learner hyperparameters, the environment's file with the overrides applied.
        needs (NeedsConfig or None): Needs shaping, if any.
        seeds (list of int): Run seeds.
        total_steps (int): Environment steps per seed.
        eval_interval (int): Environment steps between evaluations.
        eval_episodes (int): Episodes per evaluation.
        output_dir (str): Run directory.
        action_permutation (list of int or None): Environment index receiving each policy action component.
        record_wall_clock (bool): If False, `wall_clock_s` is written as 0.0.
        n_workers (int): Processes to run seeds in.
    """
    algorithm: str
    env: str
    graph: StrategyGraph
    hyperparams: Hyperparams
    needs: NeedsConfig = None
    seeds: list = field(default_factory=lambda: [0])
    total_steps: int = 10_000
    eval_interval: int = 1000
    eval_episodes: int = 5
    output_dir: str = "results/runs/default"
    action_permutation: list = None
    record_wall_clock: bool = True
    n_workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"`algorithm` must be in {ALGORITHMS}. Was {self.algorithm}. ")
        if self.env not in ENV_REGISTRY:
            raise ConfigurationError(f"`env` must be in {sorted(ENV_REGISTRY)}. Was {self.env}. ")
        problems = []
        for name in ["total_steps", "eval_interval", "eval_episodes", "n_workers"]:
            if int(getattr(self, name)) < 1:
                problems.append(f"`{name}` must be a positive integer. Was {getattr(self, name)}. ")
        if len(self.seeds) == 0:
            problems.append("`seeds` must contain at least one seed. ")
        if len(set(self.seeds)) != len(self.seeds):
            problems.append(f"`seeds` must be unique. Was {self.seeds}. ")
        if problems:
            raise ConfigurationError("".join(problems))

        env = make_env(self.env, self.action_permutation)  # Validates the permutation
        if self.graph.total_action_dim != env.spec.action_dim:
            message = f"Strategy graph covers {self.graph.total_action_dim} action dimensions, environment "
            message += f"`{self.env}` has {env.spec.action_dim}. "
            raise DimensionError(message)
        if self.needs is not None:
            unknown = sorted(set(self.needs.probe_ids) - set(env.spec.probe_catalog))
            if unknown:
                message = f"Needs features use probes {unknown} that `{self.env}` does not provide. "
                message += f"Available probes are {sorted(env.spec.probe_catalog)}. "
                raise ConfigurationError(message)

    @property
    def m(self):
        return self.graph.m

    @classmethod
    def from_dict(cls, config_dict, fast=False):
        """
        Resolve a raw config document: load the environment's hyperparameters and apply the overrides, resolve the
        graph reference (inline mapping, fixture name or path) and parse the needs block.

        Args:
            config_dict (dict): The document.
            fast (bool): If True, start from the environment's fast hyperparameters. A `fast: true` key in the
                document does the same.

        Raises:
            ConfigurationError: On unknown keys, unsupported schema versions or invalid values.
            DimensionError: If the graph does not cover the environment's action.

        Returns:
            ExperimentConfig: The config.
        """
        config_dict = copy.deepcopy(config_dict)
        unknown = sorted(set(config_dict) - KNOWN_KEYS)
        if unknown:
            raise ConfigurationError(f"Unknown config keys {unknown}. Must be in {sorted(KNOWN_KEYS)}. ")
        version = config_dict.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            message = f"Unsupported config schema version. Must be {CONFIG_SCHEMA_VERSION}. Was {version}. "
            raise ConfigurationError(message)
        for key in ["algorithm", "env"]:
            if key not in config_dict:
                raise ConfigurationError(f"Config needs the key `{key}`. ")
        algorithm = str(config_dict["algorithm"]).strip().lower()
        env_name = str(config_dict["env"]).strip().lower()
        if env_name not in ENV_REGISTRY:
            raise ConfigurationError(f"`env` must be in {sorted(ENV_REGISTRY)}. Was {env_name}. ")

        fast = fast or bool(config_dict.get("fast", False))
        hp_dict = load_hyperparameters(env_name, fast=fast)
        hp_dict.update(config_dict.get("hyperparameters") or {})
        hyperparams = Hyperparams.from_dict(hp_dict)

        action_dim = ENV_REGISTRY[env_name].spec.action_dim
        graph_reference = config_dict.get("graph")
        if algorithm == "sac":
            if graph_reference is not None:
                warnings.warn("Algorithm `sac` ignores the `graph` entry and uses a single-node graph. ")
            graph = single_node_graph(action_dim)
        elif graph_reference is None:
            raise ConfigurationError("Algorithm `bsac` needs a `graph` (inline mapping, fixture name or path). ")
        elif isinstance(graph_reference, dict):
            graph = StrategyGraph.from_dict(graph_reference)
        else:
            graph = load_graph(graph_reference)

        needs = config_dict.get("needs")
        needs = NeedsConfig.from_dict(needs) if needs is not None else None
        permutation = config_dict.get("action_permutation")
        return cls(
            algorithm=algorithm, env=env_name, graph=graph, hyperparams=hyperparams, needs=needs,
            seeds=[int(seed) for seed in config_dict.get("seeds", [0])],
            total_steps=int(config_dict.get("total_steps", 10_000)),
            eval_interval=int(config_dict.get("eval_interval", 1000)),
            eval_episodes=int(config_dict.get("eval_episodes", 5)),
            output_dir=str(config_dict.get("output_dir", "results/runs/default")),
            action_permutation=[int(i) for i in permutation] if permutation is not None else None,
            record_wall_clock=bool(config_dict.get("record_wall_clock", True)),
            n_workers=int(config_dict.get("n_workers", 1)))

    @classmethod
    def from_file(cls, path, seeds=None, output_dir=None, fast=False):
        """
        Read a config file. `seeds` and `output_dir` override the file's values (they do not change the hash).
        """
        config_dict = load_yaml(path)
        if not isinstance(config_dict, dict):
            raise ConfigurationError(f"Config file {path} must hold a mapping. Was {type(config_dict)}. ")
        config = cls.from_dict(config_dict, fast=fast)
        return config.with_overrides(seeds=seeds, output_dir=output_dir)

    def with_overrides(self, seeds=None, output_dir=None, n_workers=None):
        changes = {}
        if seeds is not None:
            changes["seeds"] = [int(seed) for seed in seeds]
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        if n_workers is not None:
            changes["n_workers"] = int(n_workers)
        return replace(self, **changes)

    def to_dict(self):
        return {"schema_version": CONFIG_SCHEMA_VERSION, "algorithm": self.algorithm, "env": self.env,
                "graph": self.graph.to_dict(), "hyperparameters": self.hyperparams.to_dict(),
                "needs": self.needs.to_dict() if self.needs is not None else None, "seeds": list(self.seeds),
                "total_steps": self.total_steps, "eval_interval": self.eval_interval,
                "eval_episodes": self.eval_episodes, "output_dir": self.output_dir,
                "action_permutation": self.action_permutation, "record_wall_clock": self.record_wall_clock,
                "n_workers": self.n_workers}

    def hash(self):
        """
        SHA-256 of the canonical json of the resolved config, leaving out the keys that do not change a run's
        results (`seeds`, `output_dir` and `n_workers`).
        """
        hashed = self.to_dict()
        for key in HASH_EXCLUDED_KEYS:
            hashed.pop(key)
        return config_hash(hashed)
