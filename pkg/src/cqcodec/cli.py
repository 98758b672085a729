"""Command-line interface: ``cqcodec {train,encode,decode,eval,inspect}``.

Failures print a single ``error: <code>: <message>`` line on stderr and exit
with a nonzero status.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import torch

from . import bitstream, checkpoint
from .codec import CQCodec, measure_bitrate
from .config import CodecConfig
from .metrics import evaluate, write_metrics_csv
from .validation import SAMPLE_RATE
from .wavio import WavFormatError, load_wav, save_wav

log = logging.getLogger("cqcodec")

EXIT_CODES = {"usage": 2, "io": 3, "format": 4, "corpus": 5, "checkpoint": 6, "bitstream": 7,
              "mismatch": 8, "training": 9}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def load_corpus(directory, pattern="*.wav"):
    """Load every readable WAV under ``directory``; returns ``(signals, n_skipped)``."""
    root = Path(directory)
    if not root.is_dir():
        raise CliError("io", f"corpus directory not found: {directory}")
    signals, skipped = [], 0
    for path in sorted(root.rglob(pattern)):
        try:
            x = load_wav(path)
        except (WavFormatError, OSError) as exc:
            warnings.warn(f"skipping {path.name}: {exc}", RuntimeWarning)
            skipped += 1
            continue
        if x.size:
            signals.append(x)
        else:
            skipped += 1
    if skipped:
        log.warning("skipped %d unreadable file(s)", skipped)
    if not signals:
        raise CliError("corpus", f"no valid WAV files in {directory}")
    return signals, skipped


def _read(path, what):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError("io", f"cannot read {what} {path}: {exc.strerror}") from exc


def _load_model(path):
    try:
        return checkpoint.loads(data := _read(path, "checkpoint")), checkpoint.model_hash(data)
    except checkpoint.CheckpointError as exc:
        raise CliError("checkpoint", str(exc)) from exc


def _load_signal(path):
    try:
        return load_wav(path)
    except FileNotFoundError as exc:
        raise CliError("io", f"cannot read {path}") from exc
    except WavFormatError as exc:
        raise CliError("format", f"{path}: {exc}") from exc


def _write(path, data):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise CliError("io", f"cannot write {path}: {exc.strerror}") from exc


def cmd_train(args):
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise CliError("io", f"cannot read config {args.config}: {exc.strerror}") from exc
    try:
        config = CodecConfig.from_ini(text, seed=args.seed, epochs=args.epochs)
    except ValueError as exc:
        raise CliError("format", f"bad config: {exc}") from exc
    out = Path(args.out)
    csv_path = out.with_name(out.name + ".metrics.csv")
    for p in (out, csv_path):
        if not p.parent.is_dir():
            raise CliError("io", f"output directory does not exist: {p.parent}")
    signals, skipped = load_corpus(args.corpus, config.corpus_glob)
    print(f"corpus: {len(signals)} file(s), {sum(map(len, signals)) / SAMPLE_RATE:.1f} s, {skipped} skipped")

    codec = CQCodec.from_config(config)
    try:
        codec.fit(signals)
    except (ValueError, RuntimeError) as exc:
        raise CliError("training", str(exc)) from exc
    data = checkpoint.dumps(codec)
    _write(out, data)
    try:
        with open(csv_path, "w", newline="") as fh:
            write_metrics_csv(codec.history_, fh)
    except OSError as exc:
        raise CliError("io", f"cannot write {csv_path}: {exc.strerror}") from exc
    final = codec.bitrate_report_[-1].measured_kbps if codec.bitrate_report_ else float("nan")
    print(f"model {checkpoint.model_hash(data).hex()} written to {out}; {final:.2f} kbps on validation")
    return 0


def cmd_encode(args):
    codec, mhash = _load_model(args.model)
    x = _load_signal(args.input)
    if x.size == 0:
        raise CliError("format", f"{args.input}: empty signal")
    data = codec.encode(x, model_hash=mhash)
    _write(args.output, data)
    meta, _ = bitstream.read_header(data)
    print(f"{measure_bitrate(meta.payload_bits, x.size / SAMPLE_RATE):.3f} kbps "
          f"({meta.frame_count} frames, {len(data)} bytes)")
    return 0


def cmd_decode(args):
    codec, mhash = _load_model(args.model)
    data = _read(args.input, "bitstream")
    try:
        meta, _ = bitstream.read_header(data)
        if meta.model_hash != mhash:
            raise CliError("mismatch", f"bitstream model hash {meta.model_hash.hex()} does not match "
                                       f"checkpoint {mhash.hex()}")
        y = codec.decode(data, model_hash=mhash)
    except bitstream.BitstreamError as exc:
        raise CliError("bitstream", str(exc)) from exc
    try:
        save_wav(args.output, y)
    except OSError as exc:
        raise CliError("io", f"cannot write {args.output}: {exc.strerror}") from exc
    print(f"{measure_bitrate(meta.payload_bits, meta.sample_count / SAMPLE_RATE):.3f} kbps "
          f"({meta.sample_count} samples)")
    return 0


def cmd_eval(args):
    x, y = _load_signal(args.reference), _load_signal(args.decoded)
    if x.size != y.size:
        raise CliError("mismatch", f"length mismatch: {x.size} vs {y.size} samples")
    kbps = float("nan")
    if args.bitstream:
        try:
            meta, _ = bitstream.read_header(_read(args.bitstream, "bitstream"))
        except bitstream.BitstreamError as exc:
            raise CliError("bitstream", str(exc)) from exc
        kbps = measure_bitrate(meta.payload_bits, meta.sample_count / SAMPLE_RATE)
    sys.stdout.write(evaluate(x, y, kbps).to_text())
    return 0


def _stats(values):
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    gaps = np.diff(v)
    return f"min {v[0]:.5g} max {v[-1]:.5g} spacing min {gaps.min():.3g} mean {gaps.mean():.3g}"


def cmd_inspect(args):
    codec, mhash = _load_model(args.path)
    net = codec.network_
    n_params = sum(ae.n_parameters() for ae in net.autoencoders)
    print(f"model {mhash.hex()}  config {codec.get_config().digest().hex()}")
    print(f"parameters: {n_params} in {len(net.autoencoders)} autoencoder(s)")
    for i, ae in enumerate(net.autoencoders):
        print(f"autoencoder {i}: {ae.n_parameters()} parameters")
        for name, shape_in, kernel, shape_out in ae.layer_shapes():
            print(f"  {name:32s} {str(shape_in):12s} {str(kernel):40s} {shape_out}")
    with torch.no_grad():
        print(f"LSP codebook {tuple(net.lsp_codebook.shape)}: {_stats(net.lsp_codebook.numpy())}")
        for i, cb in enumerate(net.residual_codebooks):
            print(f"residual codebook {i} ({cb.numel()}): {_stats(cb.numpy())}")
    tables = codec.tables_
    print(f"Huffman: LSP table {len(tables.lsp.lengths)} codes, "
          + ", ".join(f"residual {i} table {len(t.lengths)} codes" for i, t in enumerate(tables.residual)))
    print(f"signal gain {codec.signal_gain_:.6g}, entropy weight {codec.lambda_entropy_:.6g}")
    print("config:")
    print(codec.get_config().to_ini().rstrip())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cqcodec", description="Neural LPC speech codec.")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on a directory of WAV files")
    t.add_argument("--config", required=True)
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.set_defaults(func=cmd_train)

    for name, func, what in (("encode", cmd_encode, "WAV to bitstream"), ("decode", cmd_decode, "bitstream to WAV")):
        s = sub.add_parser(name, help=what)
        s.add_argument("--model", required=True)
        s.add_argument("input")
        s.add_argument("output")
        s.set_defaults(func=func)

    e = sub.add_parser("eval", help="SNR and segmental SNR of a decoded file")
    e.add_argument("reference")
    e.add_argument("decoded")
    e.add_argument("--bitstream", help="report the payload rate of this bitstream")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect", help="summarize a checkpoint")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.code]


if __name__ == "__main__":
    sys.exit(main())
