"""Differentiable building blocks of the 1-D CNN autoencoders.

Reverse-mode differentiation is delegated to torch autograd. Public
functional ops use the ``(batch, width, channels)`` layout, kernels are
``(width, in_channels, out_channels)``; the modules keep torch's
channels-first layout internally to avoid a transpose per layer.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

KERNEL_WIDTH = 9
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    stride: int = 1
    kernel_width: int = KERNEL_WIDTH

    def __post_init__(self):
        if self.kernel_width % 2 == 0:
            raise ValueError("kernel width must be odd")
        if self.stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")


def activation(x):
    return F.leaky_relu(x, LEAKY_SLOPE)


def _conv_cf(x, weight, bias, stride):
    # x: (batch, channels, width); weight: (width, in, out)
    k = weight.shape[0]
    return F.conv1d(x, weight.permute(2, 1, 0), bias, stride=stride, padding=k // 2)


def conv1d(x, spec, weight, bias=None):
    """Same-padded cross-correlation; output width is ``ceil(width / stride)``."""
    squeeze = x.dim() == 2
    if squeeze:
        x = x.unsqueeze(0)
    if x.shape[-1] != spec.in_channels:
        raise ValueError(f"expected {spec.in_channels} input channels, got {x.shape[-1]}")
    if tuple(weight.shape) != (spec.kernel_width, spec.in_channels, spec.out_channels):
        raise ValueError(f"kernel shape {tuple(weight.shape)} does not match {spec}")
    y = _conv_cf(x.transpose(1, 2), weight, bias, spec.stride).transpose(1, 2)
    return y.squeeze(0) if squeeze else y


def _shuffle_cf(x):
    b, c, w = x.shape
    return x.reshape(b, c // 2, 2, w).permute(0, 1, 3, 2).reshape(b, c // 2, 2 * w)


def subpixel_upsample(x):
    """Fold channel pairs into width: ``out[2t, c] = x[t, 2c]``, ``out[2t+1, c] = x[t, 2c+1]``."""
    squeeze = x.dim() == 2
    if squeeze:
        x = x.unsqueeze(0)
    if x.shape[-1] % 2:
        raise ValueError("sub-pixel upsampling needs an even channel count")
    y = _shuffle_cf(x.transpose(1, 2)).transpose(1, 2)
    return y.squeeze(0) if squeeze else y


class Conv1d(nn.Module):
    """Convolution layer holding a ``(width, in, out)`` kernel.

    Weights and biases start from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """

    def __init__(self, in_channels, out_channels, stride=1, kernel_width=KERNEL_WIDTH):
        super().__init__()
        self.spec = ConvSpec(in_channels, out_channels, stride, kernel_width)
        bound = 1.0 / math.sqrt(in_channels * kernel_width)
        self.weight = nn.Parameter(torch.empty(kernel_width, in_channels, out_channels).uniform_(-bound, bound))
        self.bias = nn.Parameter(torch.empty(out_channels).uniform_(-bound, bound))

    def forward(self, x):
        return _conv_cf(x, self.weight, self.bias, self.spec.stride)

    def extra_repr(self):
        s = self.spec
        return f"kernel=({s.kernel_width}, {s.in_channels}, {s.out_channels}), stride={s.stride}"


class BottleneckBlock(nn.Module):
    """``x + f(x)`` with ``f`` = conv(C->b) -> act -> conv(b->b) -> act -> conv(b->C)."""

    def __init__(self, channels, bottleneck=20):
        super().__init__()
        self.reduce = Conv1d(channels, bottleneck)
        self.inner = Conv1d(bottleneck, bottleneck)
        self.expand = Conv1d(bottleneck, channels)

    def forward(self, x):
        return x + self.expand(activation(self.inner(activation(self.reduce(x)))))


class BottleneckStage(nn.Sequential):
    def __init__(self, channels, bottleneck=20, blocks=2):
        super().__init__(*[BottleneckBlock(channels, bottleneck) for _ in range(blocks)])


class Activation(nn.Module):
    def forward(self, x):
        return activation(x)


class Downsample(nn.Module):
    """Stride-2 convolution followed by the hidden activation."""

    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.conv = Conv1d(in_channels, out_channels, stride=2)

    def forward(self, x):
        return activation(self.conv(x))


class Upsample(nn.Module):
    """Convolution, activation, then sub-pixel shuffle: width x2, channels /2."""

    def __init__(self, in_channels, out_channels):
        super().__init__()
        if out_channels % 2:
            raise ValueError("sub-pixel upsampling needs an even channel count")
        self.conv = Conv1d(in_channels, out_channels)

    def forward(self, x):
        return _shuffle_cf(activation(self.conv(x)))


def bottleneck_block(x, block):
    """Apply a :class:`BottleneckBlock` to a ``(batch, width, channels)`` tensor."""
    squeeze = x.dim() == 2
    if squeeze:
        x = x.unsqueeze(0)
    channels = block.reduce.spec.in_channels
    if x.shape[-1] != channels:
        raise ValueError(f"expected {channels} channels, got {x.shape[-1]}")
    y = block(x.transpose(1, 2)).transpose(1, 2)
    return y.squeeze(0) if squeeze else y


def backward(loss):
    """Populate ``.grad`` on every leaf that requires it."""
    if loss.numel() != 1:
        raise ValueError("backward needs a scalar loss")
    loss.backward()


@dataclass
class OptimizerState:
    learning_rate: float = 2e-4
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: list = None
    second_moment: list = None


@torch.no_grad()
def adam_step(params, grads, state):
    """One bias-corrected Adam update, in place on ``params``."""
    params, grads = list(params), list(grads)
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ValueError("gradient shape does not match parameter")
        if not torch.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    if state.first_moment is None:
        state.first_moment = [torch.zeros_like(p) for p in params]
        state.second_moment = [torch.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m.mul_(state.beta1).add_(g, alpha=1.0 - state.beta1)
        v.mul_(state.beta2).addcmul_(g, g, value=1.0 - state.beta2)
        p.sub_(state.learning_rate * (m / c1) / ((v / c2).sqrt() + state.eps))
    return params, state


class Adam:
    """Adam over a fixed parameter list; parameters without a gradient are skipped."""

    def __init__(self, params, lr=2e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.state = OptimizerState(lr, beta1=betas[0], beta2=betas[1], eps=eps)
        self.state.first_moment = [torch.zeros_like(p) for p in self.params]
        self.state.second_moment = [torch.zeros_like(p) for p in self.params]

    @property
    def lr(self):
        return self.state.learning_rate

    @lr.setter
    def lr(self, value):
        self.state.learning_rate = value

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        live = [i for i, p in enumerate(self.params) if p.grad is not None]
        sub = OptimizerState(
            self.state.learning_rate, self.state.batch_size, self.state.beta1,
            self.state.beta2, self.state.eps, self.state.step,
            [self.state.first_moment[i] for i in live],
            [self.state.second_moment[i] for i in live],
        )
        adam_step([self.params[i] for i in live], [self.params[i].grad for i in live], sub)
        self.state.step = sub.step
