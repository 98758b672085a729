"""Training objective: time-domain MSE, multi-resolution mel loss, and the
two quantization regularizers."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch

from .dsp import hann
from .quantization import entropy_estimate, quant_penalty
from .validation import SAMPLE_RATE

MEL_BANK_SIZES = (128, 32, 16, 8)
N_FFT = 512


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_mels, fmax=SAMPLE_RATE / 2):
    """``n_mels + 2`` frequencies (Hz) evenly spaced on the mel scale."""
    return mel_to_hz(np.linspace(0.0, hz_to_mel(fmax), n_mels + 2))


def triangular_weights(freqs, n_mels):
    """Evaluate the ``n_mels`` unit-peak triangles at arbitrary frequencies."""
    edges = mel_band_edges(n_mels)
    f = np.asarray(freqs, dtype=np.float64)[None, :]
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (f - lo) / (mid - lo)
    falling = (hi - f) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


@lru_cache(maxsize=None)
def mel_filterbank(n_mels, n_fft=N_FFT):
    """``(n_mels, n_fft // 2 + 1)`` triangular filterbank on the STFT bin grid."""
    bins = np.arange(n_fft // 2 + 1) * SAMPLE_RATE / n_fft
    fb = triangular_weights(bins, n_mels)
    fb.setflags(write=False)
    return fb


def magnitude_spectrum(x, n_fft=N_FFT):
    """Hann-windowed magnitude spectrum of each 512-sample frame in ``x``.

    Scaled by the window's RMS gain so white noise of unit variance has unit
    expected power in every bin.
    """
    win = torch.as_tensor(hann(n_fft), dtype=x.dtype)
    spec = torch.fft.rfft(x * win, n=n_fft) / torch.sqrt((win ** 2).sum())
    # eps keeps the gradient finite at exact zeros and cancels in differences
    return torch.sqrt(spec.real ** 2 + spec.imag ** 2 + 1e-12)


@lru_cache(maxsize=None)
def _band_weights(n_mels):
    # unit-peak triangles divided by their area, so each band reads a weighted
    # mean magnitude; at 128 bands a few low triangles miss every bin and stay zero
    fb = mel_filterbank(n_mels)
    area = fb.sum(axis=1, keepdims=True)
    w = np.divide(fb, area, out=np.zeros_like(fb), where=area > 0)
    w.setflags(write=False)
    return w


def mel_loss(y, y_hat, bank_sizes=MEL_BANK_SIZES):
    """Sum over filterbanks of the MSE between mel-band magnitudes.

    A band's magnitude is the filter-weighted mean of the bin magnitudes.
    """
    if y.shape != y_hat.shape:
        raise ValueError("y and y_hat must have the same shape")
    my, mh = magnitude_spectrum(y), magnitude_spectrum(y_hat)
    total = y.new_zeros(())
    for n in bank_sizes:
        fb = torch.tensor(_band_weights(n), dtype=y.dtype)
        total = total + torch.mean((my @ fb.T - mh @ fb.T) ** 2)
    return total


@dataclass
class LossWeights:
    time: float = 60.0
    mel: float = 10.0
    quant: float = 1.0
    entropy: float = 1.0 / 32


@dataclass
class LossTerms:
    total: torch.Tensor
    mse_time: float
    mel_loss: float
    quant_penalty: float
    entropy_bits: float


def total_loss(y, y_hat, soft_assignments, weights, bank_sizes=MEL_BANK_SIZES):
    """Weighted sum of reconstruction terms and per-quantizer regularizers."""
    if y.shape != y_hat.shape:
        raise ValueError("y and y_hat must have the same shape")
    mse = torch.mean((y - y_hat) ** 2)
    mel = mel_loss(y, y_hat, bank_sizes) if weights.mel else y.new_zeros(())
    q = sum((quant_penalty(A) for A in soft_assignments), y.new_zeros(()))
    e = sum((entropy_estimate(A) for A in soft_assignments), y.new_zeros(()))
    total = weights.time * mse + weights.mel * mel + weights.quant * q + weights.entropy * e
    return LossTerms(total, mse.item(), mel.item(), q.item(), e.item())
