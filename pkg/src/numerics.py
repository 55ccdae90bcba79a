"""
Tensor plumbing shared by every learned function: 64-bit multilayer perceptrons, the reverse-mode contract,
a checked Adam step, reparameterized Gaussian sampling and the parameter checkpoint format.

Tensors are `torch.Tensor` in float64 and the reverse-mode tape is torch autograd.
"""
import json
import math
import struct

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.common.exceptions import CheckpointError, ContractError, DimensionError, NumericalError
from src.common.utils import get_logger
from src.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, LOG_STD_MAX, LOG_STD_MIN

logger = get_logger(__name__)

DTYPE = torch.float64
LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_HEADER = struct.Struct("<8sIQ")  # magic, version, manifest length


def check_finite(tensor, name="tensor"):
    """
    Raise if `tensor` holds a NaN or infinite value.

    Args:
        tensor (torch.Tensor): The tensor to check.
        name (str): Name used in the error message.

    Raises:
        NumericalError: If any element is not finite.
    """
    if not bool(torch.isfinite(tensor).all()):
        raise NumericalError(f"Non-finite values in `{name}`. ", parameter_name=name)


class Mlp(nn.Module):
    """
    Fully connected network with rectifier hidden activations and a linear output layer.
    Weights and biases are drawn uniformly from [-1 / sqrt(fan_in), 1 / sqrt(fan_in)] with a dedicated generator,
    so two networks built with the same seed are identical.
    """
    def __init__(self, layer_sizes, generator=None, name="mlp"):
        """
        Args:
            layer_sizes (list of int): Input size, hidden sizes and output size, for example `[4, 32, 32, 2]`.
            generator (torch.Generator, optional): Generator for the initialization. If None, the global torch
                generator is used.
            name (str): Name used for parameter identifiers in errors and checkpoints.
        """
        super(Mlp, self).__init__()
        layer_sizes = [int(size) for size in layer_sizes]
        if len(layer_sizes) < 2 or min(layer_sizes) < 1:
            message = f"`layer_sizes` needs at least an input and output size, all positive. Was {layer_sizes}. "
            raise DimensionError(message)
        self.layer_sizes = layer_sizes
        self.name = name
        self.hidden_activation = "relu"
        self.layers = nn.ModuleList(
            [nn.Linear(n_in, n_out, dtype=DTYPE) for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])])
        self.reset_parameters(generator)

    def reset_parameters(self, generator=None):
        with torch.no_grad():
            for layer in self.layers:
                bound = 1 / math.sqrt(layer.in_features)
                for tensor in (layer.weight, layer.bias):
                    noise = torch.rand(tensor.shape, generator=generator, dtype=DTYPE)
                    tensor.copy_(noise * 2 * bound - bound)

    def zero_output_layer(self):
        """Set the weights and bias of the output layer to zero, so the network outputs zero for every input."""
        with torch.no_grad():
            self.layers[-1].weight.zero_()
            self.layers[-1].bias.zero_()

    @property
    def n_input(self):
        return self.layer_sizes[0]

    @property
    def n_output(self):
        return self.layer_sizes[-1]

    @property
    def n_parameters(self):
        return sum((n_in + 1) * n_out for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = F.relu(layer(x))
        return self.layers[-1](x)


def forward(net, input):
    """
    Run `net` on a batch, after checking the input width.

    Args:
        net (Mlp): The network.
        input (torch.Tensor): [batch x n_in] tensor.

    Raises:
        DimensionError: If the input is not 2-dimensional or its width does not match the network.

    Returns:
        torch.Tensor: [batch x n_out] output, recorded on the autograd tape.
    """
    if input.dim() != 2 or input.shape[1] != net.n_input:
        message = f"Input to `{net.name}` must have shape [batch, {net.n_input}]. Was {list(input.shape)}. "
        raise DimensionError(message)
    return net(input)


def backward(output_scalar):
    """
    Populate `.grad` of every leaf that `output_scalar` depends on with the exact reverse-mode derivative.
    Gradients accumulate, so zero them first when that is not wanted.

    Args:
        output_scalar (torch.Tensor): One-element tensor that requires grad.

    Raises:
        ContractError: If the output is not a scalar or is not attached to the tape.
    """
    if output_scalar.numel() != 1:
        raise ContractError(f"`backward` needs a scalar output. Was shape {list(output_scalar.shape)}. ")
    if not output_scalar.requires_grad:
        raise ContractError("`backward` needs an output that requires grad. ")
    output_scalar.reshape(()).backward()


def make_adam(named_parameters, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
    """
    Make an Adam optimizer that remembers the name of each parameter, for error reporting in `adam_step()`.
    The optimizer state (step count and both moment accumulators per parameter) is the AdamState.

    Args:
        named_parameters (iterable of (str, torch.nn.Parameter)): Typically `module.named_parameters()`.
        learning_rate (float): Step size.
        beta1 (float): Decay of the first moment.
        beta2 (float): Decay of the second moment.
        epsilon (float): Added to the denominator.

    Returns:
        torch.optim.Adam: The optimizer.
    """
    names, params = [], []
    for name, param in named_parameters:
        names.append(name)
        params.append(param)
    return torch.optim.Adam([{"params": params, "names": names}], lr=learning_rate, betas=(beta1, beta2),
                            eps=epsilon)


def adam_step(optimizer):
    """
    One bias-corrected Adam update, refusing NaN gradients.

    Args:
        optimizer (torch.optim.Adam): Optimizer from `make_adam()`, with gradients populated.

    Raises:
        NumericalError: If a gradient has a NaN or infinite entry. The parameter is named in the error.
    """
    for group in optimizer.param_groups:
        names = group.get("names", [str(i) for i in range(len(group["params"]))])
        for name, param in zip(names, group["params"]):
            if param.grad is not None and not bool(torch.isfinite(param.grad).all()):
                raise NumericalError(f"Non-finite gradient for parameter `{name}`. ", parameter_name=name)
    optimizer.step()


def gaussian_sample_reparam(mean, log_std, noise):
    """
    Reparameterized Gaussian sample `mean + exp(log_std) * noise`, differentiable through `mean` and `log_std`.
    `log_std` is clamped to [LOG_STD_MIN, LOG_STD_MAX].

    Args:
        mean (torch.Tensor): Means.
        log_std (torch.Tensor): Log standard deviations, same shape as `mean`.
        noise (torch.Tensor): Standard normal noise, same shape as `mean`.

    Raises:
        DimensionError: If the shapes do not agree.

    Returns:
        torch.Tensor: The sample.
    """
    if mean.shape != log_std.shape or mean.shape != noise.shape:
        message = "Shapes of `mean`, `log_std` and `noise` must agree. "
        message += f"Was {list(mean.shape)}, {list(log_std.shape)} and {list(noise.shape)}. "
        raise DimensionError(message)
    log_std = torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
    return mean + torch.exp(log_std) * noise


def gaussian_log_prob(x, mean, log_std):
    """
    Elementwise log-density of a diagonal Gaussian. `log_std` is clamped like in `gaussian_sample_reparam()`.

    Returns:
        torch.Tensor: Same shape as `x`.
    """
    log_std = torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = (x - mean) * torch.exp(-log_std)
    return -0.5 * z.square() - log_std - LOG_SQRT_2PI


def tanh_log_det(u):
    """
    Elementwise `log(1 - tanh(u)^2)`, computed as `2 * (log 2 - u - softplus(-2u))` to stay finite for large |u|.
    """
    return 2 * (math.log(2) - u - F.softplus(-2 * u))


def save_parameters(path, named_tensors, metadata=None):
    """
    Write tensors to a versioned checkpoint file.

    Layout: 8-byte magic, uint32 version, uint64 manifest length (all little endian), the UTF-8 json manifest
    `{"version", "tensors": [{"name", "shape", "offset", "count"}], "metadata"}` and then every tensor's values as
    flat little-endian float64 in manifest order. `offset` and `count` are in elements.

    Args:
        path (str or pathlib.Path): File to write.
        named_tensors (dict of str: torch.Tensor): Tensors to save, in the order to save them.
        metadata (dict, optional): Json-serializable extra information.
    """
    entries = []
    chunks = []
    offset = 0
    for name, tensor in named_tensors.items():
        values = tensor.detach().cpu().to(DTYPE).reshape(-1).numpy()
        entries.append({"name": name, "shape": list(tensor.shape), "offset": offset, "count": int(values.size)})
        chunks.append(values.astype("<f8").tobytes())
        offset += int(values.size)
    manifest = {"version": CHECKPOINT_VERSION, "tensors": entries, "metadata": metadata or {}}
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as outfile:
        outfile.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(manifest_bytes)))
        outfile.write(manifest_bytes)
        for chunk in chunks:
            outfile.write(chunk)
    logger.debug(f"Saved {len(entries)} tensors ({offset} values) to {path}.")


def load_parameters(path):
    """
    Read a checkpoint written by `save_parameters()`.

    Args:
        path (str or pathlib.Path): File to read.

    Raises:
        CheckpointError: If the file is not a checkpoint, has an unknown version or is truncated.

    Returns:
        dict of str: torch.Tensor: The tensors, in file order.
        dict: The metadata.
    """
    try:
        with open(path, "rb") as infile:
            raw = infile.read()
    except OSError as error:
        raise CheckpointError(f"Could not read checkpoint {path}. {error}") from error
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"Checkpoint {path} is truncated. ")
    magic, version, manifest_length = _HEADER.unpack_from(raw, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"File {path} is not a parameter checkpoint. ")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version. Must be {CHECKPOINT_VERSION}. Was {version}. ")
    start = _HEADER.size
    data_start = start + manifest_length
    if data_start > len(raw):
        raise CheckpointError(f"Checkpoint {path} is truncated inside the manifest. ")
    try:
        manifest = json.loads(raw[start: data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise CheckpointError(f"Checkpoint {path} has an unreadable manifest. {error}") from error
    data = np.frombuffer(raw, dtype="<f8", count=max(len(raw) - data_start, 0) // 8, offset=data_start)
    tensors = {}
    for entry in manifest["tensors"]:
        end = entry["offset"] + entry["count"]
        if end > data.size:
            raise CheckpointError(f"Checkpoint {path} is truncated at tensor `{entry['name']}`. ")
        values = np.array(data[entry["offset"]: end], dtype=np.float64)
        tensors[entry["name"]] = torch.from_numpy(values).reshape(entry["shape"])
    return tensors, manifest["metadata"]
