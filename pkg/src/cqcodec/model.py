"""The 1-D CNN autoencoder used for residual coding."""

import torch
from torch import nn

from .nn import Activation, BottleneckStage, Conv1d, Downsample, Upsample

FRAME = 512


class AutoEncoder(nn.Module):
    """Residual-coding autoencoder.

    With one downsampling stage this is the reference topology (512-sample
    frame, 256-sample code). A second stage adds a stride-2 convolution and a
    bottleneck stage to the encoder and a second sub-pixel upsampling layer
    to the decoder, halving the code width again.
    """

    def __init__(self, n_downsample=1, channels=100, bottleneck=20):
        super().__init__()
        if n_downsample not in (1, 2):
            raise ValueError(f"unsupported number of downsampling stages: {n_downsample}")
        if channels % 2:
            raise ValueError("channel count must be even")
        self.n_downsample = n_downsample
        self.channels = channels
        self.bottleneck = bottleneck
        C, half = channels, channels // 2

        enc = [Conv1d(1, C), Activation(), BottleneckStage(C, bottleneck)]
        for _ in range(n_downsample):
            enc += [Downsample(C, C), BottleneckStage(C, bottleneck)]
        enc.append(Conv1d(C, 1))
        self.encoder = nn.Sequential(*enc)

        dec = [Conv1d(1, C), Activation(), BottleneckStage(C, bottleneck), Upsample(C, C)]
        for _ in range(n_downsample - 1):
            dec.append(Upsample(half, C))
        dec += [BottleneckStage(half, bottleneck), Conv1d(half, 1)]
        self.decoder = nn.Sequential(*dec)

    @property
    def code_width(self):
        return FRAME >> self.n_downsample

    def encode(self, x):
        """``(batch, 512)`` residual frames -> ``(batch, code_width)`` codes."""
        return self.encoder(x.unsqueeze(1)).squeeze(1)

    def decode(self, h):
        return self.decoder(h.unsqueeze(1)).squeeze(1)

    def forward(self, x):
        """Unquantized pass on ``(batch, width, 1)`` input."""
        return self.decode(self.encode(x.squeeze(-1))).unsqueeze(-1)

    def n_parameters(self):
        return sum(p.numel() for p in self.parameters())

    @torch.no_grad()
    def layer_shapes(self):
        """Rows of ``(layer, input (width, ch), kernel, output (width, ch))``."""
        rows = []
        x = torch.zeros(1, 1, FRAME)
        for part, seq in (("encoder", self.encoder), ("decoder", self.decoder)):
            for i, layer in enumerate(seq):
                if isinstance(layer, Activation):
                    x = layer(x)
                    continue
                y = layer(x)
                conv = getattr(layer, "conv", layer)
                if isinstance(conv, Conv1d):
                    s = conv.spec
                    kernel = (s.kernel_width, s.in_channels, s.out_channels)
                else:
                    b = layer[0]
                    kernel = tuple((c.spec.kernel_width, c.spec.in_channels, c.spec.out_channels)
                                   for c in (b.reduce, b.inner, b.expand))
                rows.append((f"{part}.{i}.{type(layer).__name__}",
                             (x.shape[2], x.shape[1]), kernel, (y.shape[2], y.shape[1])))
                x = y
            x = torch.zeros(1, 1, x.shape[2])
        return rows


def build_autoencoder(config):
    """Build the autoencoder described by a :class:`~cqcodec.config.CodecConfig`."""
    return AutoEncoder(config.n_downsample_stages, config.channels, config.bottleneck_channels)
