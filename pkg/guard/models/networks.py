import contextlib
import math
import torch
import torch.nn as nn
from guard.tensors import DTYPE, ops


class BatchNorm(nn.Module):
    """
    Batch normalisation layer that can report the statistics of its last input
    and can run on batch statistics without folding them into the running buffers
    """
    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super(BatchNorm, self).__init__()
        self.weight = nn.Parameter(torch.ones(channels, dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(channels, dtype=DTYPE))
        self.register_buffer('running_mean', torch.zeros(channels, dtype=DTYPE))
        self.register_buffer('running_var', torch.ones(channels, dtype=DTYPE))
        self.momentum = momentum
        self.eps = eps
        self.update_stats = True
        self.record_batch = False
        self.batch_mean = None
        self.batch_var = None

    def forward(self, x):
        if self.record_batch:
            self.batch_mean, self.batch_var = ops.channel_statistics(x)
        if self.training and not self.update_stats:
            running_mean, running_var = None, None
        else:
            running_mean, running_var = self.running_mean, self.running_var
        return ops.batch_norm(x, running_mean, running_var, self.weight, self.bias,
                              training=self.training, momentum=self.momentum, eps=self.eps)


def activate(x, kind):
    return ops.relu(x) if kind == 'relu' else ops.softplus(x)


class MLP(nn.Module):
    """
    Fully connected classifier: linear -> [batch norm] -> activation per hidden layer
    """
    def __init__(self, spec):
        super(MLP, self).__init__()
        self.activation = spec.activation
        widths = spec.widths
        self.layers = nn.ModuleList(
            [nn.Linear(widths[i], widths[i + 1]).to(DTYPE) for i in range(len(widths) - 1)])
        self.norms = nn.ModuleList(
            [BatchNorm(w) for w in widths[1:-1]] if spec.batch_norm else [])

    def features(self, x):
        """
        Penultimate activations
        :param x: (torch.Tensor) (B, ...) inputs, flattened per sample
        """
        h = x.reshape(x.shape[0], -1)
        for i, layer in enumerate(self.layers[:-1]):
            h = ops.linear(h, layer.weight, layer.bias)
            if len(self.norms):
                h = self.norms[i](h)
            h = activate(h, self.activation)
        return h

    def forward(self, x):
        last = self.layers[-1]
        return ops.linear(self.features(x), last.weight, last.bias)


class ConvNetS(nn.Module):
    """
    Small convolutional classifier:
    conv3x3 -> [bn] -> act -> pool -> conv3x3 -> [bn] -> act -> pool -> fc
    """
    def __init__(self, spec):
        super(ConvNetS, self).__init__()
        in_channels, height, width = spec.input_shape
        first, second = spec.channels
        self.activation = spec.activation
        self.conv1 = nn.Conv2d(in_channels, first, kernel_size=3, padding=1).to(DTYPE)
        self.conv2 = nn.Conv2d(first, second, kernel_size=3, padding=1).to(DTYPE)
        self.norm1 = BatchNorm(first) if spec.batch_norm else None
        self.norm2 = BatchNorm(second) if spec.batch_norm else None
        self.fc = nn.Linear(second * (height // 4) * (width // 4), spec.num_classes).to(DTYPE)

    def _block(self, x, conv, norm):
        h = ops.conv2d(x, conv.weight, conv.bias, stride=1, padding=1)
        if norm is not None:
            h = norm(h)
        return ops.max_pool2d(activate(h, self.activation), 2)

    def features(self, x):
        h = self._block(x, self.conv1, self.norm1)
        h = self._block(h, self.conv2, self.norm2)
        return h.reshape(h.shape[0], -1)

    def forward(self, x):
        return ops.linear(self.features(x), self.fc.weight, self.fc.bias)


def build_network(spec):
    if spec.kind == 'mlp':
        return MLP(spec)
    return ConvNetS(spec)


def initialize(network, rng):
    """
    Fan-in scaled uniform weights, zero biases, unit batch-norm scale and zero shift
    :param network: (nn.Module) network to initialise in place
    :param rng: (Rng) random stream
    """
    with torch.no_grad():
        for module in network.modules():
            if isinstance(module, (nn.Linear, nn.Conv2d)):
                fan_in = module.weight[0].numel()
                bound = 1.0 / math.sqrt(fan_in)
                module.weight.copy_(rng.uniform(*module.weight.shape, low=-bound, high=bound))
                module.bias.zero_()
            elif isinstance(module, BatchNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()
                module.running_mean.zero_()
                module.running_var.fill_(1.0)


def batch_norm_layers(network):
    return [m for m in network.modules() if isinstance(m, BatchNorm)]


@contextlib.contextmanager
def frozen_statistics(network):
    """
    Extra forward passes inside this block leave running statistics untouched
    """
    layers = batch_norm_layers(network)
    previous = [layer.update_stats for layer in layers]
    for layer in layers:
        layer.update_stats = False
    try:
        yield
    finally:
        for layer, flag in zip(layers, previous):
            layer.update_stats = flag


@contextlib.contextmanager
def recorded_batch_statistics(network):
    """
    Batch-norm layers keep the differentiable statistics of their last input
    """
    layers = batch_norm_layers(network)
    for layer in layers:
        layer.record_batch = True
    try:
        yield layers
    finally:
        for layer in layers:
            layer.record_batch = False
            layer.batch_mean = None
            layer.batch_var = None
