import pytest
import torch

from src.common.utils import make_generator
from src.models.joint_policy import JointPolicy
from src.strategy_graph import StrategyGraph, TacticNode, chain_graph, single_node_graph

torch.set_default_dtype(torch.float64)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run the slow learning smoke tests.")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long learning smoke tests, run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="Needs --runslow to run.")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def generator():
    return make_generator(1234)


@pytest.fixture
def hopper_graph():
    return chain_graph([1, 1, 1])


@pytest.fixture
def diamond_graph():
    return StrategyGraph([TacticNode("d", 1, ("b", "c")), TacticNode("c", 1, ("a",)), TacticNode("b", 2, ("a",)),
                          TacticNode("a", 1, ())])


@pytest.fixture
def independent_graph():
    return StrategyGraph([TacticNode("x", 1, ()), TacticNode("a", 1, ())])


@pytest.fixture
def single_graph():
    return single_node_graph(2)


def make_policy(graph, obs_dim=4, hidden_sizes=(8, 8), seed=0, squash=True, low=-1.0, high=1.0):
    dims = graph.total_action_dim
    return JointPolicy(graph, obs_dim, [low] * dims, [high] * dims, hidden_sizes, generator=make_generator(seed),
                       squash=squash)


@pytest.fixture
def policy_factory():
    return make_policy
