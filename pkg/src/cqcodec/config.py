"""Codec configuration and its INI representation.

Every tunable constant, including the ones that are design choices rather
than published values (loss weights, schedule lengths, bitrate-control
settings), lives here with its default so a config file documents the run.
"""

import configparser
import dataclasses
import hashlib
import io
import math
from dataclasses import dataclass, field, fields

SECTIONS = ("codec", "loss", "training", "bitrate", "corpus")


def _opt(default, section, **kw):
    return field(default=default, metadata={"section": section}, **kw)


@dataclass
class CodecConfig:
    target_bitrate_kbps: float = _opt(16.0, "codec")
    n_autoencoders: int = _opt(1, "codec")
    n_downsample_stages: int = _opt(1, "codec")
    channels: int = _opt(100, "codec")
    bottleneck_channels: int = _opt(20, "codec")
    alpha: float = _opt(300.0, "codec")
    residual_centroids: int = _opt(32, "codec")
    lsp_centroids: int = _opt(256, "codec")
    lsp_codebook: str = _opt("shared", "codec")
    lsp_unit_hz: float = _opt(100.0, "codec")
    straight_through: bool = _opt(True, "codec")
    mel_bank_sizes: tuple = _opt((128, 32, 16, 8), "codec")

    lambda_time: float = _opt(60.0, "loss")
    lambda_mel: float = _opt(10.0, "loss")
    lambda_quant: float = _opt(1.0, "loss")
    lambda_entropy: float = _opt(1.0 / 32, "loss")

    epochs: int = _opt(30, "training")
    warmup_epochs: int = _opt(5, "training")
    finetune_epochs: int = _opt(5, "training")
    batch_size: int = _opt(128, "training")
    learning_rate: float = _opt(2e-4, "training")
    seed: int = _opt(0, "training")

    control_bitrate: bool = _opt(True, "bitrate")
    bitrate_factor: float = _opt(4.0, "bitrate")
    bitrate_tolerance: float = _opt(0.10, "bitrate")
    bitrate_max_iter: int = _opt(8, "bitrate")
    bitrate_finetune_steps: int = _opt(50, "bitrate")
    validation_seconds: float = _opt(20.0, "bitrate")

    corpus_glob: str = _opt("*.wav", "corpus")

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, _coerce(f, getattr(self, f.name)))
        self.validate()

    def validate(self):
        if self.n_autoencoders < 1:
            raise ValueError("n_autoencoders must be >= 1")
        if self.n_downsample_stages not in (1, 2):
            raise ValueError("n_downsample_stages must be 1 or 2")
        if self.lsp_unit_hz <= 0:
            raise ValueError("lsp_unit_hz must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for name in ("lambda_time", "lambda_mel", "lambda_quant", "lambda_entropy"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("residual_centroids", "lsp_centroids"):
            j = getattr(self, name)
            if j < 2 or j & (j - 1):
                raise ValueError(f"{name} must be a power of two >= 2")
        if self.lsp_codebook not in ("shared", "per_coefficient"):
            raise ValueError("lsp_codebook must be 'shared' or 'per_coefficient'")

    @classmethod
    def for_bitrate(cls, kbps, **overrides):
        """Preset for the 9/16/20/24 kbps operating points."""
        preset = {"target_bitrate_kbps": float(kbps)}
        if kbps <= 9:
            preset["n_downsample_stages"] = 2
        if kbps >= 24:
            preset["n_autoencoders"] = 2
        preset.update(overrides)
        return cls(**preset)

    @property
    def lsp_scale(self):
        """Factor taking LSP radians to the quantizer's distance unit."""
        return 16000 / (2 * math.pi * self.lsp_unit_hz)

    @property
    def code_width(self):
        return 512 >> self.n_downsample_stages

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_ini(self):
        cp = configparser.ConfigParser()
        for s in SECTIONS:
            cp[s] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            cp[f.metadata["section"]][f.name] = repr(v) if isinstance(v, float) else str(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text, **overrides):
        cp = configparser.ConfigParser()
        cp.read_string(text)
        known = {f.name: f for f in fields(cls)}
        values = {}
        for section in cp.sections():
            for key, raw in cp[section].items():
                if key not in known:
                    raise ValueError(f"unknown config key [{section}] {key}")
                values[key] = _parse_value(known[key], raw, cp[section])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def digest(self):
        return hashlib.sha256(self.to_ini().encode()).digest()[:8]


def _coerce(f, v):
    default = f.default
    if isinstance(default, bool):
        if v in (0, 1):
            return bool(v)
        raise ValueError(f"{f.name} must be a boolean")
    if isinstance(default, int):
        if isinstance(v, bool) or float(v) != int(float(v)):
            raise ValueError(f"{f.name} must be an integer")
        return int(v)
    if isinstance(default, float):
        return float(v)
    if isinstance(default, tuple):
        return tuple(int(x) for x in v)
    return str(v)


def _parse_value(f, raw, section):
    default = f.default
    if isinstance(default, bool):
        return section.getboolean(f.name)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    return raw.strip()
