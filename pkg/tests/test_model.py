import pytest
import torch

from cqcodec.config import CodecConfig
from cqcodec.model import AutoEncoder, build_autoencoder
from reference_shapes import DECODER, ENCODER, LOW_RATE_PARAMS, STANDARD_PARAMS


def test_layer_shapes_match_reference():
    rows = [r[1:] for r in AutoEncoder().layer_shapes()]
    assert rows == ENCODER + DECODER


def test_parameter_counts():
    std = AutoEncoder().n_parameters()
    low = build_autoencoder(CodecConfig.for_bitrate(9)).n_parameters()
    assert std == 465_372
    assert low == 680_052
    assert abs(std / STANDARD_PARAMS - 1) < 0.05
    assert abs(low / LOW_RATE_PARAMS - 1) < 0.05


@pytest.mark.parametrize("stages, code", [(1, 256), (2, 128)])
def test_encode_decode_widths(stages, code):
    ae = AutoEncoder(stages, channels=8, bottleneck=4)
    h = ae.encode(torch.zeros(3, 512))
    assert h.shape == (3, code) == (3, ae.code_width)
    assert ae.decode(h).shape == (3, 512)
    assert ae(torch.zeros(2, 512, 1)).shape == (2, 512, 1)


def test_low_rate_shapes():
    rows = AutoEncoder(2).layer_shapes()
    enc = [r for r in rows if r[0].startswith("encoder")]
    assert enc[-1][3] == (128, 1)
    assert rows[-1][3] == (512, 1)


def test_invalid_topologies():
    with pytest.raises(ValueError, match="downsampling"):
        AutoEncoder(3)
    with pytest.raises(ValueError, match="even"):
        AutoEncoder(channels=99)


def test_for_bitrate_presets():
    assert (CodecConfig.for_bitrate(9).n_downsample_stages, CodecConfig.for_bitrate(9).n_autoencoders) == (2, 1)
    assert (CodecConfig.for_bitrate(16).n_downsample_stages, CodecConfig.for_bitrate(16).n_autoencoders) == (1, 1)
    assert CodecConfig.for_bitrate(24).n_autoencoders == 2
