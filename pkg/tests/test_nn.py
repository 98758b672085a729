import math

import numpy as np
import pytest
import torch

from cqcodec.losses import LossWeights, mel_loss, total_loss
from cqcodec.nn import (
    Adam, BottleneckBlock, ConvSpec, Conv1d, Downsample, OptimizerState, Upsample, activation,
    adam_step, backward, bottleneck_block, conv1d, subpixel_upsample,
)
from cqcodec.quantization import distance_matrix, entropy_estimate, quant_penalty, soft_assign

D = torch.float64


def _gradcheck(fn, *inputs):
    return torch.autograd.gradcheck(fn, inputs, eps=1e-4, atol=1e-7, rtol=1e-4)


def _rand(gen, *shape):
    return torch.randn(*shape, generator=gen, dtype=D, requires_grad=True)


@pytest.fixture
def gen():
    return torch.Generator().manual_seed(7)


# --- conv1d ---------------------------------------------------------------

def test_conv_identity_kernel(gen):
    x = torch.randn(40, 1, generator=gen, dtype=D)
    w = torch.zeros(9, 1, 1, dtype=D)
    w[4, 0, 0] = 1.0
    assert torch.equal(conv1d(x, ConvSpec(1, 1), w), x)


def test_conv_change_channel_shape():
    y = conv1d(torch.zeros(512, 1), ConvSpec(1, 100), torch.zeros(9, 1, 100))
    assert y.shape == (512, 100)


def test_conv_stride_two_halves_width():
    y = conv1d(torch.zeros(3, 512, 100), ConvSpec(100, 100, 2), torch.zeros(9, 100, 100))
    assert y.shape == (3, 256, 100)


@pytest.mark.parametrize("width", [7, 8, 31, 32])
def test_conv_output_width_is_ceil(width):
    y = conv1d(torch.zeros(width, 2), ConvSpec(2, 3, 2), torch.zeros(9, 2, 3))
    assert y.shape == (math.ceil(width / 2), 3)


def test_conv_is_cross_correlation(gen):
    x = torch.randn(20, 1, generator=gen, dtype=D)
    w = torch.randn(9, 1, 1, generator=gen, dtype=D)
    xp = np.pad(x[:, 0].numpy(), 4)
    ref = np.array([xp[t:t + 9] @ w[:, 0, 0].numpy() for t in range(20)])
    np.testing.assert_allclose(conv1d(x, ConvSpec(1, 1), w)[:, 0].numpy(), ref, atol=1e-12)


def test_conv_shape_errors():
    with pytest.raises(ValueError, match="input channels"):
        conv1d(torch.zeros(10, 2), ConvSpec(1, 1), torch.zeros(9, 1, 1))
    with pytest.raises(ValueError, match="kernel shape"):
        conv1d(torch.zeros(10, 1), ConvSpec(1, 1), torch.zeros(7, 1, 1))
    with pytest.raises(ValueError, match="odd"):
        ConvSpec(1, 1, kernel_width=8)
    with pytest.raises(ValueError, match="stride"):
        ConvSpec(1, 1, stride=3)


# --- bottleneck -----------------------------------------------------------

def _zero_branch(block):
    with torch.no_grad():
        for conv in (block.reduce, block.inner, block.expand):
            conv.weight.zero_()
            conv.bias.zero_()


def test_bottleneck_zero_branch_is_identity(gen):
    block = BottleneckBlock(100)
    _zero_branch(block)
    x = torch.randn(2, 64, 100, generator=gen)
    assert torch.equal(bottleneck_block(x, block), x)


def test_bottleneck_shape():
    assert bottleneck_block(torch.zeros(512, 100), BottleneckBlock(100)).shape == (512, 100)


def test_bottleneck_skip_contributes_identity_jacobian(gen):
    block = BottleneckBlock(4, 3).double()
    _zero_branch(block)
    x = _rand(gen, 16, 4)
    bottleneck_block(x, block).sum().backward()
    assert torch.all(x.grad >= 1.0)


def test_bottleneck_channel_error():
    with pytest.raises(ValueError, match="channels"):
        bottleneck_block(torch.zeros(16, 50), BottleneckBlock(100))


# --- sub-pixel upsampling ------------------------------------------------

def test_subpixel_example():
    y = subpixel_upsample(torch.tensor([[1.0, 2.0], [3.0, 4.0]]))
    assert y.shape == (4, 1)
    assert y[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0]


def test_subpixel_table_shape():
    assert subpixel_upsample(torch.zeros(256, 100)).shape == (512, 50)
    assert Upsample(100, 100)(torch.zeros(1, 100, 256)).shape == (1, 50, 512)


def test_subpixel_definition(gen):
    x = torch.randn(3, 10, 6, generator=gen)
    y = subpixel_upsample(x)
    assert torch.equal(y[:, 0::2, :], x[:, :, 0::2])
    assert torch.equal(y[:, 1::2, :], x[:, :, 1::2])


def test_subpixel_is_permutation():
    x = torch.arange(8 * 6, dtype=D).reshape(8, 6)
    assert sorted(subpixel_upsample(x).flatten().tolist()) == x.flatten().tolist()


def test_subpixel_inverts_pairwise_decimation(gen):
    x = torch.randn(32, 5, generator=gen)
    pairs = torch.stack([x[0::2], x[1::2]], dim=-1).reshape(16, 10)
    assert torch.equal(subpixel_upsample(pairs), x)


def test_subpixel_odd_channels_error():
    with pytest.raises(ValueError, match="even"):
        subpixel_upsample(torch.zeros(4, 3))
    with pytest.raises(ValueError, match="even"):
        Upsample(10, 7)


# --- backward -------------------------------------------------------------

def test_backward_linear_form(gen):
    x = torch.randn(12, generator=gen, dtype=D)
    w = torch.zeros(12, dtype=D, requires_grad=True)
    backward((w * x).sum())
    assert torch.equal(w.grad, x)


def test_backward_rejects_vector_loss():
    w = torch.ones(3, requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(w * 2)


def test_backward_is_deterministic(gen):
    torch.manual_seed(0)
    block = BottleneckBlock(8, 4)
    x = torch.randn(2, 8, 32, generator=gen)
    grads = []
    for _ in range(2):
        block.zero_grad()
        backward((block(x) ** 2).mean())
        grads.append([p.grad.clone() for p in block.parameters()])
    assert all(torch.equal(a, b) for a, b in zip(*grads))


# --- finite-difference oracle for every layer type and loss term ---------

def test_gradcheck_activation(gen):
    x = _rand(gen, 5, 7)
    with torch.no_grad():
        x[x.abs() < 1e-2] = 0.5  # keep away from the kink
    assert _gradcheck(activation, x)


def test_gradcheck_conv1d(gen):
    spec = ConvSpec(3, 4, 2)
    assert _gradcheck(lambda x, w, b: conv1d(x, spec, w, b), _rand(gen, 2, 15, 3), _rand(gen, 9, 3, 4),
                      _rand(gen, 4))


@pytest.mark.parametrize("layer", [lambda: Conv1d(2, 4), lambda: Downsample(4, 4), lambda: Upsample(4, 4),
                                   lambda: BottleneckBlock(4, 3)])
def test_gradcheck_modules(gen, layer):
    torch.manual_seed(3)
    m = layer().double()
    params = list(m.parameters())
    x = _rand(gen, 2, params[0].shape[1], 16)

    def f(x, *ps):
        return torch.func.functional_call(m, dict(zip([n for n, _ in m.named_parameters()], ps)), (x,))

    assert _gradcheck(f, x, *[p.detach().clone().requires_grad_() for p in params])


def test_gradcheck_subpixel(gen):
    assert _gradcheck(subpixel_upsample, _rand(gen, 2, 8, 6))


def test_gradcheck_softmax(gen):
    assert _gradcheck(lambda h, b: soft_assign(distance_matrix(h, b), alpha=3.0), _rand(gen, 2, 10), _rand(gen, 6))


def test_gradcheck_mse(gen):
    assert _gradcheck(lambda y, z: torch.mean((y - z) ** 2), _rand(gen, 3, 20), _rand(gen, 3, 20))


def test_gradcheck_mel_loss(gen):
    y = torch.randn(2, 512, generator=gen, dtype=D)
    assert _gradcheck(lambda z: mel_loss(y, z, (16, 8)), _rand(gen, 2, 512))


def test_gradcheck_regularizers(gen):
    logits = _rand(gen, 12, 5)
    assert _gradcheck(lambda z: quant_penalty(torch.softmax(z, -1)), logits)
    assert _gradcheck(lambda z: entropy_estimate(torch.softmax(z, -1)), logits)


def test_gradcheck_total_loss(gen):
    y = torch.randn(2, 512, generator=gen, dtype=D)
    w = LossWeights(time=2.0, mel=0.5, quant=0.3, entropy=0.1)

    def f(z, logits):
        return total_loss(y, z, [torch.softmax(logits, -1)], w, (8,)).total

    assert _gradcheck(f, _rand(gen, 2, 512), _rand(gen, 6, 4))


# --- Adam -----------------------------------------------------------------

def test_adam_zero_grads_leave_params():
    p = torch.randn(4, 3)
    before = p.clone()
    state = OptimizerState()
    for _ in range(5):
        adam_step([p], [torch.zeros_like(p)], state)
    assert torch.equal(p, before)
    assert state.step == 5


def test_adam_first_step_is_learning_rate():
    p = torch.tensor([1.0], dtype=D)
    adam_step([p], [torch.tensor([0.37], dtype=D)], OptimizerState(learning_rate=2e-4))
    assert p.item() == pytest.approx(1.0 - 2e-4, rel=1e-6)


def test_adam_matches_torch_reference(gen):
    p0 = torch.randn(6, generator=gen, dtype=D)
    ours, ref = p0.clone(), p0.clone().requires_grad_()
    opt = torch.optim.Adam([ref], lr=1e-2)
    state = OptimizerState(learning_rate=1e-2)
    for _ in range(10):
        g = torch.randn(6, generator=gen, dtype=D)
        adam_step([ours], [g], state)
        ref.grad = g.clone()
        opt.step()
    torch.testing.assert_close(ours, ref.detach(), rtol=1e-10, atol=1e-12)


def test_adam_zero_learning_rate():
    p = torch.randn(5)
    before = p.clone()
    adam_step([p], [torch.ones(5)], OptimizerState(learning_rate=0.0))
    assert torch.equal(p, before)


def test_adam_rejects_nan():
    with pytest.raises(FloatingPointError, match="non-finite gradient"):
        adam_step([torch.zeros(2)], [torch.tensor([0.0, math.nan])], OptimizerState())


def test_adam_shape_errors():
    with pytest.raises(ValueError, match="shape"):
        adam_step([torch.zeros(2)], [torch.zeros(3)], OptimizerState())
    with pytest.raises(ValueError, match="length"):
        adam_step([torch.zeros(2)], [], OptimizerState())


def test_adam_defaults():
    s = OptimizerState()
    assert (s.learning_rate, s.batch_size, s.beta1, s.beta2, s.eps) == (2e-4, 128, 0.9, 0.999, 1e-8)


def test_adam_wrapper_skips_params_without_grad():
    a, b = torch.nn.Parameter(torch.ones(2)), torch.nn.Parameter(torch.ones(2))
    opt = Adam([a, b], lr=0.1)
    a.grad = torch.ones(2)
    opt.step()
    assert torch.equal(b.detach(), torch.ones(2))
    assert torch.allclose(a.detach(), torch.full((2,), 0.9))
