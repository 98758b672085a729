"""Pre/post filtering, framing, windowing and overlap-add synthesis.

All filters run over a whole utterance; filter state never leaks between
calls.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .validation import SAMPLE_RATE, check_length, check_signal

EMPHASIS = 0.68
HIGHPASS_CUTOFF_HZ = 50.0
HIGHPASS_ORDER = 2

ANALYSIS_LEN = 1024
CODING_LEN = 512
SUBFRAME_LEN = 128
SUBFRAME_HOP = 64
N_SUBFRAMES = 7
CROSSFADE = 32


def hann(n):
    """Periodic Hann window (denominator ``n``)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class AnalysisFrame:
    samples: np.ndarray
    start_index: int


@dataclass(frozen=True)
class WindowBank:
    cross_frame: np.ndarray
    sub_frames: np.ndarray
    synthesis: np.ndarray
    ramp_in: np.ndarray
    ramp_out: np.ndarray

    @property
    def sub_frame_offsets(self):
        return np.arange(N_SUBFRAMES) * SUBFRAME_HOP


@lru_cache(maxsize=None)
def window_bank():
    """Build the analysis, sub-frame and synthesis windows.

    The cross-frame window tapers the outer quarters of a 1024-sample frame
    with the halves of a 512-point Hann window and keeps the middle half flat.
    Sub-frame windows are 128-point Hann windows at 50% overlap except the
    first (flat, then falling) and last (rising, then flat), so the seven of
    them overlap-add to exactly one across the 512-sample middle region.
    """
    quarter = ANALYSIS_LEN // 4
    rise = hann(2 * quarter)[:quarter]
    cross = np.concatenate([rise, np.ones(ANALYSIS_LEN // 2), rise[::-1]])

    h = hann(SUBFRAME_LEN)
    half = SUBFRAME_LEN // 2
    subs = np.tile(h, (N_SUBFRAMES, 1))
    subs[0, :half] = 1.0
    subs[-1, half:] = 1.0

    ramp_in = hann(2 * CROSSFADE)[:CROSSFADE]
    ramp_out = 1.0 - ramp_in
    synth = np.concatenate([ramp_in, np.ones(CODING_LEN - 2 * CROSSFADE), ramp_out])

    for arr in (cross, subs, ramp_in, ramp_out, synth):
        arr.setflags(write=False)
    return WindowBank(cross, subs, synth, ramp_in, ramp_out)


@lru_cache(maxsize=None)
def highpass_coefficients(cutoff=HIGHPASS_CUTOFF_HZ, order=HIGHPASS_ORDER):
    return sps.butter(order, cutoff, btype="highpass", fs=SAMPLE_RATE)


def high_pass(x):
    """Butterworth high-pass at 50 Hz, zero initial state."""
    x = check_signal(x)
    b, a = highpass_coefficients()
    return sps.lfilter(b, a, x)


def pre_emphasize(x, coef=EMPHASIS):
    """``y[t] = x[t] - coef * x[t-1]`` with ``x[-1] = 0``."""
    x = check_signal(x)
    y = x.copy()
    y[1:] -= coef * x[:-1]
    return y


def de_emphasize(x, coef=EMPHASIS):
    """Inverse of :func:`pre_emphasize`: ``y[t] = x[t] + coef * y[t-1]``."""
    x = check_signal(x)
    return sps.lfilter([1.0], [1.0, -coef], x)


def frame_signal(x, frame_len, hop, pad=0):
    """Split ``x`` into frames of ``frame_len`` samples advancing by ``hop``.

    ``pad`` zeros are added at both ends; the tail is zero-extended so the
    last frame is complete. ``start_index`` of each frame is relative to the
    unpadded signal and may be negative.
    """
    x = check_signal(x)
    if frame_len <= 0:
        raise ValueError("frame_len must be positive")
    if hop <= 0 or hop > frame_len:
        raise ValueError("hop must satisfy 0 < hop <= frame_len")
    padded = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    if padded.size < frame_len:
        raise ValueError(f"signal shorter than frame length {frame_len} after padding")
    n_frames = -(-(padded.size - frame_len) // hop) + 1
    total = (n_frames - 1) * hop + frame_len
    padded = np.concatenate([padded, np.zeros(total - padded.size)])
    return [
        AnalysisFrame(padded[k * hop:k * hop + frame_len].copy(), k * hop - pad)
        for k in range(n_frames)
    ]


def apply_cross_frame_window(frame):
    samples = frame.samples if isinstance(frame, AnalysisFrame) else frame
    return check_length(samples, ANALYSIS_LEN) * window_bank().cross_frame


def subframe_decompose(mid):
    """Return the seven windowed 128-sample sub-frames of a 512-sample region."""
    mid = check_length(mid, CODING_LEN, "middle region")
    bank = window_bank()
    return np.stack([
        mid[o:o + SUBFRAME_LEN] * w for o, w in zip(bank.sub_frame_offsets, bank.sub_frames)
    ])


def subframe_overlap_add(subframes):
    out = np.zeros(CODING_LEN)
    for o, sub in zip(window_bank().sub_frame_offsets, subframes):
        out[o:o + SUBFRAME_LEN] += sub
    return out


def synthesis_overlap_add(frames, overlap=CROSSFADE):
    """Crossfade consecutive 512-sample frames over ``overlap`` samples.

    Output length is ``512 + (n - 1) * (512 - overlap)``.
    """
    if overlap != CROSSFADE:
        raise ValueError(f"overlap must be {CROSSFADE}")
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if not frames:
        raise ValueError("no frames to synthesize")
    if any(f.shape != (CODING_LEN,) for f in frames):
        raise ValueError(f"every frame must have length {CODING_LEN}")
    bank = window_bank()
    hop = CODING_LEN - overlap
    out = np.zeros(CODING_LEN + (len(frames) - 1) * hop)
    out[:CODING_LEN] = frames[0]
    for k, f in enumerate(frames[1:], start=1):
        s = k * hop
        out[s:s + overlap] = out[s:s + overlap] * bank.ramp_out + f[:overlap] * bank.ramp_in
        out[s + overlap:s + CODING_LEN] = f[overlap:]
    return out
