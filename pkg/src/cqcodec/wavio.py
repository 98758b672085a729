"""16-bit mono 16 kHz WAV reading and writing."""

import wave

import numpy as np

from .validation import SAMPLE_RATE, check_signal

SCALE = 32768.0


class WavFormatError(ValueError):
    pass


def load_wav(path):
    """Read a PCM WAV file as float64 samples in [-1, 1).

    Raises
    ------
    WavFormatError
        If the file is not RIFF/WAVE, not 16-bit PCM, not mono, or not 16 kHz.
        Nothing is resampled or downmixed.
    """
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            if w.getcomptype() != "NONE":
                raise WavFormatError("PCM required")
            data = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"not a valid WAV file: {exc}") from exc
    if channels != 1:
        raise WavFormatError("mono required")
    if width != 2:
        raise WavFormatError("16-bit samples required")
    if rate != SAMPLE_RATE:
        raise WavFormatError(f"{SAMPLE_RATE} Hz sample rate required, got {rate}")
    if len(data) != 2 * n:
        raise WavFormatError("truncated data chunk")
    return np.frombuffer(data, dtype="<i2").astype(np.float64) / SCALE


def to_pcm16(x):
    """Scale by 32768, round, and clip to the int16 range."""
    return np.clip(np.round(np.asarray(x, dtype=np.float64) * SCALE), -32768, 32767).astype("<i2")


def save_wav(path, x):
    x = check_signal(x, allow_empty=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(to_pcm16(x).tobytes())
