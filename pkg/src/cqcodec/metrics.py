"""Objective quality measures and the training metrics CSV."""

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .validation import SAMPLE_RATE, check_signal

SEGMENT_LEN = 512
SEG_SNR_RANGE = (-10.0, 35.0)
METRIC_COLUMNS = ("epoch", "mse_time", "mel_loss", "quant_penalty", "entropy_bits", "measured_kbps")


def _pair(x, x_hat):
    x = check_signal(x, "reference", allow_empty=True)
    x_hat = check_signal(x_hat, "decoded", allow_empty=True)
    if x.shape != x_hat.shape:
        raise ValueError(f"length mismatch: {x.size} vs {x_hat.size} samples")
    return x, x_hat


def _ratio_db(signal_energy, noise_energy):
    if noise_energy == 0:
        return math.inf
    if signal_energy == 0:
        return -math.inf
    return 10.0 * math.log10(signal_energy / noise_energy)


def snr(x, x_hat):
    """``10 log10(sum x^2 / sum (x - x_hat)^2)`` in dB; ``inf`` for identical signals."""
    x, x_hat = _pair(x, x_hat)
    return _ratio_db(float(x @ x), float((x - x_hat) @ (x - x_hat)))


def seg_snr(x, x_hat, segment=SEGMENT_LEN, limits=SEG_SNR_RANGE):
    """Mean of per-segment SNRs, each clamped to ``limits``.

    A trailing partial segment is included. Identical signals score the
    upper limit.
    """
    x, x_hat = _pair(x, x_hat)
    if x.size == 0:
        raise ValueError("empty signal")
    vals = []
    for s in range(0, x.size, segment):
        r, d = x[s:s + segment], x_hat[s:s + segment]
        v = _ratio_db(float(r @ r), float((r - d) @ (r - d)))
        vals.append(min(max(v, limits[0]), limits[1]) if not math.isnan(v) else limits[0])
    return float(np.mean(vals))


@dataclass
class EvalReport:
    snr_db: float
    seg_snr_db: float
    measured_bitrate_kbps: float
    frame_count: int
    duration_s: float

    def to_text(self):
        """``key=value`` lines; infinities print as ``inf``."""
        return "\n".join(f"{k}={_fmt(v)}" for k, v in asdict(self).items()) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return "inf" if v == math.inf else "-inf" if v == -math.inf else "nan" if math.isnan(v) else repr(v)
    return str(v)


def evaluate(x, x_hat, bitrate_kbps=float("nan"), hop=SEGMENT_LEN):
    x, x_hat = _pair(x, x_hat)
    return EvalReport(snr(x, x_hat), seg_snr(x, x_hat), float(bitrate_kbps),
                      math.ceil(x.size / hop), x.size / SAMPLE_RATE)


def parse_report(text):
    types = {f.name: f.type for f in fields(EvalReport)}
    values = dict(line.split("=", 1) for line in text.strip().splitlines())
    return EvalReport(**{k: int(values[k]) if types[k] in (int, "int") else float(values[k]) for k in types})


def write_metrics_csv(rows, fh):
    """Write epoch metrics (objects or dicts with :data:`METRIC_COLUMNS`)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in rows:
        get = r.get if isinstance(r, dict) else lambda k, r=r: getattr(r, k)
        w.writerow([int(get("epoch"))] + [repr(float(get(k))) for k in METRIC_COLUMNS[1:]])


def read_metrics_csv(fh):
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
        raise ValueError(f"unexpected metrics columns {reader.fieldnames}")
    return [{k: int(row[k]) if k == "epoch" else float(row[k]) for k in METRIC_COLUMNS} for row in reader]
