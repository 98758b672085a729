"""Deterministic speech-like test material.

Utterances are sequences of voiced segments (glottal pulse train through
three formant resonators and a lip-radiation differentiator), unvoiced segments (filtered noise), and pauses.
Useful where no recorded 16 kHz corpus is available.
"""

import numpy as np
from scipy import signal as sps

from .validation import SAMPLE_RATE

_VOWELS = [  # F1, F2, F3 in Hz
    (730, 1090, 2440), (270, 2290, 3010), (530, 1840, 2480), (660, 1720, 2410),
    (570, 840, 2410), (300, 870, 2240), (440, 1020, 2240), (490, 1350, 1690),
]


def _resonator(freq, bw):
    r = np.exp(-np.pi * bw / SAMPLE_RATE)
    theta = 2 * np.pi * freq / SAMPLE_RATE
    return np.array([1.0, -2 * r * np.cos(theta), r * r])


def _voiced(n, f0, formants, rng):
    t = np.arange(n)
    f0_track = f0 * (1 + 0.08 * np.sin(2 * np.pi * t / n * rng.uniform(0.5, 1.5)))
    phase = np.cumsum(f0_track / SAMPLE_RATE)
    pulses = np.diff(np.floor(phase), prepend=0.0)
    # Rosenberg-like glottal shaping: leaky integration of the pulse train.
    exc = sps.lfilter([1.0], [1.0, -0.95], pulses) - sps.lfilter([1.0], [1.0, -0.75], pulses)
    exc += 0.01 * rng.standard_normal(n)
    den = np.array([1.0])
    for f in formants:
        den = np.convolve(den, _resonator(f * rng.uniform(0.93, 1.07), rng.uniform(60, 140)))
    # lip radiation differentiates the volume velocity
    return sps.lfilter([1.0, -1.0], den, exc)


def _unvoiced(n, rng):
    noise = rng.standard_normal(n)
    den = _resonator(rng.uniform(2500, 5500), rng.uniform(400, 1200))
    return 0.3 * sps.lfilter([1.0], den, noise) * (1 - np.exp(-np.arange(n) / 200))


def synthetic_speech(duration_s, seed=0, peak=0.5):
    """Return ``duration_s`` seconds of speech-like audio in [-1, 1]."""
    rng = np.random.default_rng(seed)
    total = int(round(duration_s * SAMPLE_RATE))
    f0 = rng.uniform(95, 220)
    pieces = []
    n_done = 0
    while n_done < total:
        kind = rng.choice(["v", "v", "v", "u", "s"])
        n = int(rng.uniform(0.06, 0.25) * SAMPLE_RATE)
        if kind == "v":
            seg = _voiced(n, f0 * rng.uniform(0.85, 1.2), _VOWELS[rng.integers(len(_VOWELS))], rng)
        elif kind == "u":
            seg = _unvoiced(n, rng)
        else:
            seg = 1e-4 * rng.standard_normal(n)
        if kind != "s":
            env = np.minimum(1.0, np.minimum(np.arange(n), np.arange(n)[::-1]) / 320.0)
            seg = seg / (np.max(np.abs(seg)) + 1e-12) * env * rng.uniform(0.3, 1.0)
        pieces.append(seg)
        n_done += n
    x = np.concatenate(pieces)[:total]
    return peak * x / (np.max(np.abs(x)) + 1e-12)


def synthetic_corpus(n_utterances, duration_s, seed=0):
    return [synthetic_speech(duration_s, seed=seed * 1000 + i) for i in range(n_utterances)]
