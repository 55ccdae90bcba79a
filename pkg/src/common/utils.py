import hashlib
import json
import logging
import random

import numpy as np
import torch

from src.common.exceptions import ConfigurationError
from src.constants import SEED_STREAMS

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO, "warning": logging.WARNING, "error": logging.ERROR,
              "critical": logging.CRITICAL}


def set_global_log_level(level):
    """
    Set the level of the root logger and of every logger made by `get_logger()` so far.

    Args:
        level (str or int): A name in `LOG_LEVELS` (any case) or a `logging` level.
    """
    if isinstance(level, str):
        name = level.strip().lower()
        if name not in LOG_LEVELS:
            raise ConfigurationError(f"Unknown logging level. Must be in {list(LOG_LEVELS)}. Was {level}. ")
        level = LOG_LEVELS[name]
    logging.getLogger().setLevel(level)
    for logger in logging.Logger.manager.loggerDict.values():
        if isinstance(logger, logging.Logger) and logger.name.startswith("src"):
            logger.setLevel(level)


def get_logger(name):
    """
    Get a logger with one stream handler in the shared format. Calling it twice with the same name does not add a
    second handler.

    Args:
        name (str): Name of the logger, normally `__name__`.

    Returns:
        logging.Logger: The logger.
    """
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
    return logger


def seed_everything(seed=57):
    """
    Seed the global generators and make torch deterministic. Learners and environments draw from their own
    derived streams, so this only guards code that reaches for the global ones.
    """
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.set_default_dtype(torch.float64)
    torch.use_deterministic_algorithms(True)


def derive_seed(seed, stream):
    """
    Derive an independent sub-seed from a run seed. The scheme is counter based and language independent:
    the first 8 bytes (little endian) of SHA-256 over the ASCII string "<seed>/<stream>", masked to 63 bits.

    Args:
        seed (int): The run seed.
        stream (str or int): Name (or counter) of the stream, for example "env" or "eval".

    Returns:
        int: The derived seed, in [0, 2**63).
    """
    if isinstance(stream, str) and stream not in SEED_STREAMS and not stream.startswith("episode"):
        raise ValueError(f"Unknown seed stream. Must be in {SEED_STREAMS} or start with `episode`. Was {stream}. ")
    digest = hashlib.sha256(f"{int(seed)}/{stream}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def make_generator(seed):
    """
    Make a seeded torch generator on the cpu.

    Args:
        seed (int): The seed.

    Returns:
        torch.Generator: The generator.
    """
    generator = torch.Generator(device="cpu")
    generator.manual_seed(int(seed))
    return generator


def parse_int_list(values):
    """
    Parse seeds from the command line: "3", "0,1,2" or the inclusive range "0-4".

    Args:
        values (str): The string to parse.

    Returns:
        list of int: The parsed ints.
    """
    values = values.strip()
    if "-" in values:
        start, stop = values.split("-", 1)
        return list(range(int(start), int(stop) + 1))
    return [int(value) for value in values.split(",") if value.strip()]


def config_hash(config_dict):
    """
    Hash a (json-serializable) dictionary in a canonical way.

    Args:
        config_dict (dict): The dictionary to hash.

    Returns:
        str: Hex SHA-256 digest of the canonical json.
    """
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def count_parameters(*modules):
    """Number of scalar parameters across the given torch modules."""
    return sum(parameter.numel() for module in modules for parameter in module.parameters())
