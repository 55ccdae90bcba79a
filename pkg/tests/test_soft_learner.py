import math

import numpy as np
import pytest
import torch

from src.common.exceptions import ConfigurationError, ContractError, DimensionError, NumericalError
from src.common.utils import make_generator
from src.models.critics import CriticBank
from src.numerics import DTYPE
from src.replay_buffer import ReplayBuffer, Transition, TransitionBatch
from src.soft_learner import (Hyperparams, SoftLearner, StepMetrics, policy_loss, q_losses, q_target, value_loss,
                              value_target)
from src.strategy_graph import chain_graph, single_node_graph

OBS_DIM = 3


class FixedPolicy:
    """
    Returns the same action and per-sub log-probabilities for every state.
    """
    def __init__(self, per_sub):
        self.per_sub = torch.tensor(per_sub, dtype=DTYPE)
        self.m = len(per_sub)

    def sample_joint(self, states, generator=None):
        batch_size = states.shape[0]
        return torch.zeros(batch_size, 1, dtype=DTYPE), self.per_sub.expand(batch_size, -1)


class FixedCritics:
    def __init__(self, value):
        self.value = value

    def min_q(self, states, actions):
        return torch.full((states.shape[0],), self.value, dtype=DTYPE)


def set_constant_output(net, value):
    net.zero_output_layer()
    with torch.no_grad():
        net.layers[-1].bias.fill_(value)


def make_batch(rewards, dones, obs_dim=OBS_DIM, action_dim=1):
    n = len(rewards)
    return TransitionBatch(states=torch.zeros(n, obs_dim, dtype=DTYPE), actions=torch.zeros(n, action_dim, dtype=DTYPE),
                           rewards=torch.tensor(rewards, dtype=DTYPE),
                           next_states=torch.zeros(n, obs_dim, dtype=DTYPE), dones=torch.tensor(dones, dtype=DTYPE))


def small_hp(**overrides):
    hp_dict = {"batch_size": 8, "warmup_steps": 8, "buffer_capacity": 200, "hidden_sizes": [8, 8]}
    hp_dict.update(overrides)
    return Hyperparams(**hp_dict)


def filled_learner(graph, hp, seed=0, n_transitions=64, data_seed=99):
    learner = SoftLearner.build(graph, OBS_DIM, [-1.0] * graph.total_action_dim, [1.0] * graph.total_action_dim,
                                hp, seed=seed)
    rng = np.random.default_rng(data_seed)
    for _ in range(n_transitions):
        learner.observe(Transition(state=rng.normal(size=OBS_DIM),
                                   action=rng.uniform(-0.9, 0.9, size=graph.total_action_dim),
                                   reward=float(rng.normal()), next_state=rng.normal(size=OBS_DIM),
                                   done=bool(rng.random() < 0.1)))
    return learner


@pytest.fixture
def critics():
    return CriticBank(OBS_DIM, 1, [8], generator=make_generator(0))


def test_q_target_examples(critics):
    set_constant_output(critics.target_value, 2.0)
    targets = q_target(make_batch([1.0, 1.0], [0.0, 1.0]), critics, Hyperparams(discount=0.99))
    assert targets[0].item() == pytest.approx(2.98, abs=1e-12)
    assert targets[1].item() == 1.0
    assert not targets.requires_grad


def test_q_target_batch_matches_scalar_recomputation(critics, generator):
    hp = Hyperparams(discount=0.9)
    batch = TransitionBatch(states=torch.randn(16, OBS_DIM, generator=generator, dtype=DTYPE),
                            actions=torch.randn(16, 1, generator=generator, dtype=DTYPE),
                            rewards=torch.randn(16, generator=generator, dtype=DTYPE),
                            next_states=torch.randn(16, OBS_DIM, generator=generator, dtype=DTYPE),
                            dones=(torch.rand(16, generator=generator, dtype=DTYPE) < 0.3).to(DTYPE))
    targets = q_target(batch, critics, hp)
    for i in range(16):
        next_value = critics.target_v(batch.next_states[i:i + 1]).item()
        expected = batch.rewards[i].item() + hp.discount * (1 - batch.dones[i].item()) * next_value
        assert targets[i].item() == pytest.approx(expected, abs=1e-12)


def test_value_target_arithmetic():
    states = torch.zeros(2, OBS_DIM, dtype=DTYPE)
    targets = value_target(states, FixedPolicy([-1.4189385]), FixedCritics(1.0), Hyperparams(temperature=0.2))
    assert targets[0].item() == pytest.approx(1.2837877, abs=1e-7)


def test_value_target_split_keeps_total():
    states = torch.zeros(1, OBS_DIM, dtype=DTYPE)
    split = value_target(states, FixedPolicy([-0.5, -0.9189385]), FixedCritics(1.0), Hyperparams(temperature=0.2))
    assert split.item() == pytest.approx(1.2837877, abs=1e-7)


def test_value_target_without_temperature_is_min_q():
    states = torch.zeros(3, OBS_DIM, dtype=DTYPE)
    targets = value_target(states, FixedPolicy([-7.0]), FixedCritics(0.25), Hyperparams(temperature=0.0))
    assert torch.equal(targets, torch.full((3,), 0.25, dtype=DTYPE))


def test_value_target_monte_carlo_average_is_stable(policy_factory):
    policy = policy_factory(single_node_graph(1), obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 1, [8], generator=make_generator(1))
    hp = Hyperparams(temperature=0.2)
    state = torch.full((1, OBS_DIM), 0.4, dtype=DTYPE)
    draws = value_target(state.expand(100_000, -1), policy, critics, hp, generator=make_generator(2))
    reference = draws.mean().item()
    sigma = draws.std().item()
    estimate = value_target(state, policy, critics, hp, generator=make_generator(3), n_samples=1000).item()
    assert abs(estimate - reference) < 3 * sigma / math.sqrt(1000) + 3 * sigma / math.sqrt(100_000)


def test_policy_loss_is_linear_in_temperature(hopper_graph, policy_factory, generator):
    policy = policy_factory(hopper_graph, obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 3, [8], generator=make_generator(1))
    states = torch.randn(32, OBS_DIM, generator=generator, dtype=DTYPE)
    losses = [policy_loss(states, policy, critics, Hyperparams(temperature=alpha), generator=make_generator(5)).item()
              for alpha in [0.0, 0.1, 0.2]]
    assert losses[2] - losses[0] == pytest.approx(2 * (losses[1] - losses[0]), abs=1e-12)


def test_policy_loss_single_node_is_standard_sac(policy_factory, generator):
    policy = policy_factory(single_node_graph(2), obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 2, [8], generator=make_generator(1))
    states = torch.randn(16, OBS_DIM, generator=generator, dtype=DTYPE)
    hp = Hyperparams(temperature=0.3)
    loss = policy_loss(states, policy, critics, hp, generator=make_generator(7))
    actions, log_probs = policy.sample_joint(states, generator=make_generator(7))
    expected = (hp.temperature * log_probs[:, 0] - critics.min_q(states, actions)).mean()
    assert loss.item() == pytest.approx(expected.item(), abs=1e-12)


def test_policy_loss_gradient_matches_finite_differences(policy_factory, generator):
    policy = policy_factory(single_node_graph(1), obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 1, [8], generator=make_generator(1))
    states = torch.randn(4, OBS_DIM, generator=generator, dtype=DTYPE)
    hp = Hyperparams(temperature=0.0)
    bias = policy.subs["policy"].net.layers[-1].bias

    def loss():
        return policy_loss(states, policy, critics, hp, generator=make_generator(9))

    policy.zero_grad()
    loss().backward()
    analytic = bias.grad[0].item()
    h = 1e-6
    with torch.no_grad():
        original = bias[0].item()
        bias[0] = original + h
        plus = loss().item()
        bias[0] = original - h
        minus = loss().item()
        bias[0] = original
    numeric = (plus - minus) / (2 * h)
    assert abs(numeric - analytic) <= 1e-3 * max(1e-8, abs(numeric))


def assert_gradients_match_finite_differences(module, loss, n_per_tensor=4, seed=0):
    module.zero_grad()
    loss().backward()
    picker = make_generator(seed)
    h = 1e-6
    with torch.no_grad():
        for name, param in module.named_parameters():
            if not param.requires_grad:
                continue
            flat = param.view(-1)
            for i in torch.randperm(flat.numel(), generator=picker)[:n_per_tensor].tolist():
                original = flat[i].item()
                flat[i] = original + h
                plus = loss().item()
                flat[i] = original - h
                minus = loss().item()
                flat[i] = original
                numeric = (plus - minus) / (2 * h)
                analytic = param.grad.view(-1)[i].item() if param.grad is not None else 0.0
                assert abs(numeric - analytic) <= 1e-3 * max(1e-4, abs(numeric), abs(analytic)), name


def random_batch(generator, n=16, action_dim=1):
    return TransitionBatch(states=torch.randn(n, OBS_DIM, generator=generator, dtype=DTYPE),
                           actions=torch.rand(n, action_dim, generator=generator, dtype=DTYPE) * 1.8 - 0.9,
                           rewards=torch.randn(n, generator=generator, dtype=DTYPE),
                           next_states=torch.randn(n, OBS_DIM, generator=generator, dtype=DTYPE),
                           dones=(torch.rand(n, generator=generator, dtype=DTYPE) < 0.2).to(DTYPE))


def test_q_loss_gradients_match_finite_differences(generator):
    critics = CriticBank(OBS_DIM, 2, [8, 8], generator=make_generator(3))
    batch = random_batch(generator, action_dim=2)
    hp = Hyperparams(discount=0.95)

    def loss():
        q1_loss, q2_loss = q_losses(batch, critics, hp)
        return q1_loss + q2_loss

    assert_gradients_match_finite_differences(critics, loss, seed=1)
    critics.zero_grad()
    loss().backward()
    assert all(param.grad is None for param in critics.value.parameters())
    assert all(param.grad is None for param in critics.target_value.parameters())


def test_value_loss_gradients_match_finite_differences(policy_factory, generator):
    policy = policy_factory(chain_graph([1, 1]), obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 2, [8, 8], generator=make_generator(4))
    states = torch.randn(16, OBS_DIM, generator=generator, dtype=DTYPE)
    hp = Hyperparams(temperature=0.3)

    def loss():
        return value_loss(states, policy, critics, hp, generator=make_generator(6), n_samples=2)

    assert_gradients_match_finite_differences(critics, loss, seed=2)
    critics.zero_grad()
    policy.zero_grad()
    loss().backward()
    assert all(param.grad is None for param in policy.parameters())
    for network in (critics.q1, critics.q2, critics.target_value):
        assert all(param.grad is None for param in network.parameters())


def test_policy_loss_needs_states(policy_factory):
    policy = policy_factory(single_node_graph(1), obs_dim=OBS_DIM)
    critics = CriticBank(OBS_DIM, 1, [8], generator=make_generator(1))
    with pytest.raises(ConfigurationError):
        policy_loss(torch.zeros(0, OBS_DIM, dtype=DTYPE), policy, critics, Hyperparams())


def test_train_step_not_ready_without_data(hopper_graph):
    learner = filled_learner(hopper_graph, small_hp(), n_transitions=4)
    metrics = learner.train_step()
    assert not metrics.ready
    assert math.isnan(metrics.q1_loss)
    assert len(metrics.entropies) == 3
    assert learner.n_updates == 0


def test_train_step_waits_for_warmup(hopper_graph):
    learner = filled_learner(hopper_graph, small_hp(warmup_steps=100), n_transitions=64)
    assert not learner.is_ready()
    assert not learner.train_step().ready


def test_zero_learning_rates_leave_parameters_unchanged(diamond_graph):
    hp = small_hp(q_learning_rate=0.0, value_learning_rate=0.0, policy_learning_rate=0.0)
    learner = filled_learner(diamond_graph, hp)
    before = {name: tensor.clone() for name, tensor in learner.named_tensors().items()}
    metrics = learner.train_step()
    assert metrics.ready
    assert all(math.isfinite(value) for value in [metrics.q1_loss, metrics.q2_loss, metrics.v_loss,
                                                  metrics.policy_loss, *metrics.entropies])
    assert len(metrics.entropies) == diamond_graph.m
    for name, tensor in learner.named_tensors().items():
        if "target_value" in name:
            torch.testing.assert_close(tensor, before[name], atol=1e-12, rtol=0)
        else:
            assert torch.equal(tensor, before[name]), name


def test_full_target_update_copies_value_network(hopper_graph):
    learner = filled_learner(hopper_graph, small_hp(tau=1.0))
    learner.train_step()
    for target, value in zip(learner.critics.target_value.parameters(), learner.critics.value.parameters()):
        assert torch.equal(target, value)


def test_target_moves_toward_fixed_value_network(hopper_graph):
    hp = small_hp(tau=0.1, value_learning_rate=0.0)
    learner = filled_learner(hopper_graph, hp)
    with torch.no_grad():
        for param in learner.critics.target_value.parameters():
            param.add_(0.5)

    def distance():
        return math.sqrt(sum(float(((t - v) ** 2).sum()) for t, v in
                             zip(learner.critics.target_value.parameters(), learner.critics.value.parameters())))

    for _ in range(5):
        previous = distance()
        learner.train_step()
        assert distance() <= (1 - hp.tau) * previous + 1e-12


def test_same_seed_gives_bit_identical_metrics(hopper_graph):
    runs = []
    for _ in range(2):
        learner = filled_learner(hopper_graph, small_hp(), seed=3)
        runs.append([learner.train_step() for _ in range(100)])
    assert runs[0] == runs[1]
    assert all(metrics.ready for metrics in runs[0])


def test_act_shapes_and_bounds(diamond_graph):
    learner = filled_learner(diamond_graph, small_hp())
    state = np.zeros(OBS_DIM)
    action = learner.act(state)
    assert action.shape == (diamond_graph.total_action_dim,)
    assert np.all(np.abs(action) < 1)
    assert np.array_equal(learner.act(state, deterministic=True), learner.act(state, deterministic=True))


def test_named_tensors_round_trip(hopper_graph):
    first = filled_learner(hopper_graph, small_hp(), seed=1)
    first.train_step()
    second = filled_learner(hopper_graph, small_hp(), seed=2)
    second.load_named_tensors(first.named_tensors())
    state = np.full(OBS_DIM, 0.2)
    assert np.array_equal(first.act(state, deterministic=True), second.act(state, deterministic=True))


def test_hyperparams_validation():
    with pytest.raises(ConfigurationError):
        Hyperparams(discount=1.0)
    with pytest.raises(ConfigurationError):
        Hyperparams(tau=0.0)
    with pytest.raises(ConfigurationError):
        Hyperparams(batch_size=0)
    with pytest.raises(ConfigurationError):
        Hyperparams(hidden_sizes=[])
    with pytest.raises(ConfigurationError):
        Hyperparams.from_dict({"n_sub_policies": 3})
    assert Hyperparams.from_dict({"discount": 0.5}).to_dict()["discount"] == 0.5


def test_not_ready_metrics():
    metrics = StepMetrics.not_ready(2)
    assert not metrics.ready
    assert len(metrics.entropies) == 2


def test_replay_buffer_evicts_oldest_first():
    buffer = ReplayBuffer(3, 1, 1, seed=0)
    for i in range(5):
        buffer.push(Transition([float(i)], [0.0], float(i), [float(i)], False))
    assert len(buffer) == 3
    assert sorted(buffer.rewards.tolist()) == [2.0, 3.0, 4.0]
    batch = buffer.sample(50)
    assert set(batch.rewards.tolist()) <= {2.0, 3.0, 4.0}


def test_replay_buffer_sampling_is_seeded():
    buffers = [ReplayBuffer(10, 1, 1, seed=4) for _ in range(2)]
    for buffer in buffers:
        for i in range(10):
            buffer.push(Transition([float(i)], [0.0], float(i), [0.0], i == 9))
    assert torch.equal(buffers[0].sample(8).rewards, buffers[1].sample(8).rewards)


def test_replay_buffer_errors():
    with pytest.raises(ContractError):
        ReplayBuffer(0, 1, 1)
    buffer = ReplayBuffer(4, 2, 1)
    with pytest.raises(ContractError):
        buffer.sample(1)
    with pytest.raises(DimensionError):
        buffer.push(Transition([0.0], [0.0], 0.0, [0.0], False))
    with pytest.raises(NumericalError):
        buffer.push(Transition([0.0, 0.0], [0.0], math.nan, [0.0, 0.0], False))


def test_learner_widths_follow_graph():
    learner = SoftLearner.build(chain_graph([2, 1]), OBS_DIM, [-1.0] * 3, [1.0] * 3, small_hp(), seed=0)
    assert learner.m == 2
    assert learner.buffer.action_dim == 3
