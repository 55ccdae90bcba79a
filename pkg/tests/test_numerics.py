import math
import struct

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from src.common.exceptions import CheckpointError, ContractError, DimensionError, NumericalError
from src.common.utils import make_generator
from src.constants import CHECKPOINT_MAGIC
from src.numerics import (DTYPE, Mlp, adam_step, backward, check_finite, forward, gaussian_log_prob,
                          gaussian_sample_reparam, load_parameters, make_adam, save_parameters, tanh_log_det)


def numpy_mlp(net, x):
    out = x
    for i, layer in enumerate(net.layers):
        out = out @ layer.weight.detach().numpy().T + layer.bias.detach().numpy()
        if i < len(net.layers) - 1:
            out = np.maximum(out, 0)
    return out


def test_forward_zero_weights_gives_zero():
    net = Mlp([3, 5, 2])
    with torch.no_grad():
        for param in net.parameters():
            param.zero_()
    output = forward(net, torch.randn(4, 3, dtype=DTYPE))
    assert torch.equal(output, torch.zeros(4, 2, dtype=DTYPE))


def test_forward_identity_layer():
    net = Mlp([3, 3])
    with torch.no_grad():
        net.layers[0].weight.copy_(torch.eye(3, dtype=DTYPE))
        net.layers[0].bias.zero_()
    x = torch.tensor([[1.5, -2.0, 0.25]], dtype=DTYPE)
    assert torch.equal(forward(net, x), x)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=6))
def test_forward_matches_numpy_reimplementation(seed, batch_size):
    generator = make_generator(seed)
    net = Mlp([4, 7, 5, 3], generator=generator)
    x = torch.randn(batch_size, 4, generator=generator, dtype=DTYPE)
    expected = numpy_mlp(net, x.numpy())
    np.testing.assert_allclose(forward(net, x).detach().numpy(), expected, atol=1e-12, rtol=0)


def test_forward_wrong_width_raises():
    net = Mlp([3, 2])
    with pytest.raises(DimensionError):
        forward(net, torch.zeros(2, 4, dtype=DTYPE))
    with pytest.raises(DimensionError):
        forward(net, torch.zeros(3, dtype=DTYPE))


def test_same_seed_gives_same_network():
    first = Mlp([4, 8, 2], generator=make_generator(3))
    second = Mlp([4, 8, 2], generator=make_generator(3))
    for a, b in zip(first.parameters(), second.parameters()):
        assert torch.equal(a, b)
    bound = 1 / math.sqrt(4)
    assert float(first.layers[0].weight.abs().max()) <= bound
    assert first.n_parameters == sum(p.numel() for p in first.parameters())


def test_backward_square():
    x = torch.tensor([3.0], dtype=DTYPE, requires_grad=True)
    backward((x ** 2).sum())
    assert x.grad.item() == pytest.approx(6.0)


def test_backward_constant_gives_zero_grad():
    x = torch.tensor([3.0], dtype=DTYPE, requires_grad=True)
    y = torch.tensor([2.0], dtype=DTYPE, requires_grad=True)
    backward((y * 5).sum() + 0 * x.sum())
    assert x.grad.item() == 0.0


def test_backward_contract():
    x = torch.tensor([1.0, 2.0], dtype=DTYPE, requires_grad=True)
    with pytest.raises(ContractError):
        backward(x * 2)
    with pytest.raises(ContractError):
        backward(torch.tensor(1.0, dtype=DTYPE))


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_gradients_match_finite_differences(seed):
    generator = make_generator(seed)
    weight = torch.randn(3, 4, generator=generator, dtype=DTYPE, requires_grad=True)
    bias = torch.randn(3, generator=generator, dtype=DTYPE, requires_grad=True)
    x = torch.randn(4, generator=generator, dtype=DTYPE)

    def f(w, b):
        return torch.tanh(w @ x + b).sum()

    backward(f(weight, bias))
    h = 1e-6
    with torch.no_grad():
        for param, grad in [(weight, weight.grad), (bias, bias.grad)]:
            flat = param.view(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + h
                plus = f(weight, bias).item()
                flat[i] = original - h
                minus = f(weight, bias).item()
                flat[i] = original
                numeric = (plus - minus) / (2 * h)
                analytic = grad.view(-1)[i].item()
                assert abs(numeric - analytic) <= 1e-4 * max(1.0, abs(numeric), abs(analytic))


def composed_loss(net, x):
    out = forward(net, x)
    return (torch.tanh(out) ** 2).sum() + torch.nn.functional.softplus(out).mean() + 0.1 * (out ** 3).sum()


def second_loss(net, x):
    out = forward(net, x)
    return torch.sin(out).sum() - (out ** 2).mean()


def random_mlp(seed, hidden_sizes, n_in=5, n_out=3, batch_size=4):
    generator = make_generator(seed)
    net = Mlp([n_in, *hidden_sizes, n_out], generator=generator)
    x = torch.randn(batch_size, n_in, generator=generator, dtype=DTYPE)
    return net, x


def gradients(net, loss):
    net.zero_grad()
    backward(loss)
    return [param.grad.clone() for param in net.parameters()]


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000),
       st.lists(st.integers(min_value=1, max_value=32), min_size=0, max_size=3))
def test_mlp_gradients_match_finite_differences(seed, hidden_sizes):
    net, x = random_mlp(seed, hidden_sizes)
    analytic = gradients(net, composed_loss(net, x))
    picker = np.random.default_rng(seed)
    h = 1e-6
    with torch.no_grad():
        for param, grad in zip(net.parameters(), analytic):
            flat = param.view(-1)
            for i in picker.choice(flat.numel(), size=min(8, flat.numel()), replace=False).tolist():
                original = flat[i].item()
                flat[i] = original + h
                plus = composed_loss(net, x).item()
                flat[i] = original - h
                minus = composed_loss(net, x).item()
                flat[i] = original
                numeric = (plus - minus) / (2 * h)
                expected = grad.view(-1)[i].item()
                assert abs(numeric - expected) <= 1e-4 * max(1.0, abs(numeric), abs(expected))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000), st.floats(min_value=-3, max_value=3),
       st.floats(min_value=-3, max_value=3))
def test_gradient_is_linear_in_the_loss(seed, a, b):
    net, x = random_mlp(seed, [16, 8])
    grad_f = gradients(net, composed_loss(net, x))
    grad_g = gradients(net, second_loss(net, x))
    combined = gradients(net, a * composed_loss(net, x) + b * second_loss(net, x))
    for total, f_part, g_part in zip(combined, grad_f, grad_g):
        torch.testing.assert_close(total, a * f_part + b * g_part, rtol=1e-10, atol=1e-10)


def test_gradients_are_bit_identical_across_runs():
    runs = []
    for _ in range(2):
        net, x = random_mlp(42, [32, 32, 32])
        runs.append(gradients(net, composed_loss(net, x)))
    for first, second in zip(*runs):
        assert torch.equal(first, second)


def test_adam_zero_gradient_leaves_params_unchanged():
    param = torch.nn.Parameter(torch.tensor([1.0, -2.0], dtype=DTYPE))
    optimizer = make_adam([("p", param)], learning_rate=0.1)
    param.grad = torch.zeros(2, dtype=DTYPE)
    adam_step(optimizer)
    assert torch.equal(param.detach(), torch.tensor([1.0, -2.0], dtype=DTYPE))


@pytest.mark.parametrize("gradient", [0.5, -3.0])
def test_adam_first_step_moves_by_learning_rate(gradient):
    param = torch.nn.Parameter(torch.tensor([0.0], dtype=DTYPE))
    optimizer = make_adam([("p", param)], learning_rate=0.01)
    param.grad = torch.tensor([gradient], dtype=DTYPE)
    adam_step(optimizer)
    assert param.item() == pytest.approx(-0.01 * math.copysign(1, gradient), rel=1e-6)


def test_adam_matches_reference_update_rule():
    lr, beta1, beta2, eps = 0.01, 0.9, 0.999, 1e-8
    target = np.array([0.5, -1.0, 2.0])
    param = torch.nn.Parameter(torch.zeros(3, dtype=DTYPE))
    optimizer = make_adam([("p", param)], lr, beta1, beta2, eps)
    reference = np.zeros(3)
    m = np.zeros(3)
    v = np.zeros(3)
    for t in range(1, 101):
        optimizer.zero_grad()
        backward(((param - torch.from_numpy(target)) ** 2).sum())
        adam_step(optimizer)

        grad = 2 * (reference - target)
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad ** 2
        denominator = np.sqrt(v) / math.sqrt(1 - beta2 ** t) + eps
        reference = reference - (lr / (1 - beta1 ** t)) * m / denominator
    np.testing.assert_allclose(param.detach().numpy(), reference, atol=1e-12, rtol=0)


def test_adam_refuses_nan_gradient_and_names_parameter():
    param = torch.nn.Parameter(torch.tensor([1.0], dtype=DTYPE))
    optimizer = make_adam([("policy.layers.0.weight", param)], learning_rate=0.1)
    param.grad = torch.tensor([math.nan], dtype=DTYPE)
    with pytest.raises(NumericalError) as error:
        adam_step(optimizer)
    assert error.value.parameter_name == "policy.layers.0.weight"
    assert param.item() == 1.0


def test_check_finite():
    check_finite(torch.ones(3, dtype=DTYPE))
    with pytest.raises(NumericalError):
        check_finite(torch.tensor([1.0, math.inf], dtype=DTYPE), "q")


def test_gaussian_sample_reparam_examples():
    mean = torch.tensor([0.3, -1.2], dtype=DTYPE)
    assert torch.equal(gaussian_sample_reparam(mean, torch.zeros(2, dtype=DTYPE), torch.zeros(2, dtype=DTYPE)),
                       mean)
    sample = gaussian_sample_reparam(torch.zeros(1, dtype=DTYPE), torch.zeros(1, dtype=DTYPE),
                                     torch.tensor([1.5], dtype=DTYPE))
    assert sample.item() == 1.5


def test_gaussian_sample_reparam_shape_mismatch():
    with pytest.raises(DimensionError):
        gaussian_sample_reparam(torch.zeros(2, dtype=DTYPE), torch.zeros(3, dtype=DTYPE), torch.zeros(2, dtype=DTYPE))


def test_gaussian_sample_reparam_moments(generator):
    n = 100_000
    mean, log_std = 0.7, math.log(1.8)
    noise = torch.randn(n, generator=generator, dtype=DTYPE)
    samples = gaussian_sample_reparam(torch.full((n,), mean, dtype=DTYPE), torch.full((n,), log_std, dtype=DTYPE),
                                      noise)
    std = math.exp(log_std)
    assert abs(samples.mean().item() - mean) < 3 * std / math.sqrt(n)
    assert abs(samples.std().item() - std) < 3 * std / math.sqrt(2 * n)


def test_gaussian_log_prob_standard_normal():
    value = gaussian_log_prob(torch.zeros(1, dtype=DTYPE), torch.zeros(1, dtype=DTYPE), torch.zeros(1, dtype=DTYPE))
    assert value.item() == pytest.approx(-0.9189385332046727, abs=1e-12)


@given(st.floats(min_value=-50, max_value=50))
def test_tanh_log_det_is_stable(u):
    value = tanh_log_det(torch.tensor([u], dtype=DTYPE)).item()
    assert math.isfinite(value)
    if abs(u) < 5:
        assert value == pytest.approx(math.log(1 - math.tanh(u) ** 2), abs=1e-10)


def test_checkpoint_round_trip(tmp_path):
    tensors = {"a": torch.arange(6, dtype=DTYPE).reshape(2, 3), "b": torch.tensor([math.pi], dtype=DTYPE),
               "c": torch.zeros(0, dtype=DTYPE)}
    path = tmp_path / "params.bin"
    save_parameters(path, tensors, {"note": "x"})
    loaded, metadata = load_parameters(path)
    assert list(loaded) == ["a", "b", "c"]
    for name in tensors:
        assert torch.equal(loaded[name], tensors[name])
    assert metadata == {"note": "x"}
    assert path.read_bytes()[:8] == CHECKPOINT_MAGIC


def test_checkpoint_errors(tmp_path):
    path = tmp_path / "params.bin"
    save_parameters(path, {"a": torch.ones(10, dtype=DTYPE)})
    raw = path.read_bytes()

    truncated = tmp_path / "truncated.bin"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        load_parameters(truncated)

    wrong_version = tmp_path / "version.bin"
    wrong_version.write_bytes(raw[:8] + struct.pack("<I", 99) + raw[12:])
    with pytest.raises(CheckpointError):
        load_parameters(wrong_version)

    not_checkpoint = tmp_path / "other.bin"
    not_checkpoint.write_bytes(b"NOTACKPT" + raw[8:])
    with pytest.raises(CheckpointError):
        load_parameters(not_checkpoint)

    with pytest.raises(CheckpointError):
        load_parameters(tmp_path / "missing.bin")
