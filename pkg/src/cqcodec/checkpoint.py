"""Trained-model files.

Layout::

    magic       4s   b"CQCK"
    version     u16
    header_len  u32
    header      JSON (sorted keys): config INI text, tensor table, entropy
                tables, scalar state
    blobs       raw little-endian tensor data in table order
    crc         u32  CRC-32 of every preceding byte

The file is a pure function of the trained state, so two identical training
runs produce byte-identical checkpoints. Its SHA-256 prefix is the model hash
stamped into bitstreams.
"""

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .bitstream import CodeTables
from .codec import BitrateStep, CQCodec, CQNetwork
from .config import CodecConfig

MAGIC = b"CQCK"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_CRC = struct.Struct("<I")
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8", torch.int64: "<i8"}


class CheckpointError(ValueError):
    pass


def model_hash(data):
    return hashlib.sha256(data).digest()[:8]


def dumps(codec):
    """Serialize a fitted :class:`CQCodec` to bytes."""
    state = codec.network_.state_dict()
    table, blobs, offset = [], [], 0
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        raw = t.numpy().astype(_DTYPES[t.dtype]).tobytes()
        table.append({"name": name, "dtype": _DTYPES[t.dtype], "shape": list(t.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "config": codec.get_config().to_ini(),
        "tensors": table,
        "tables": codec.tables_.to_dict(),
        "state": {
            "signal_gain": codec.signal_gain_,
            "lambda_entropy": codec.lambda_entropy_,
            "bitrate_report": [[s.iteration, s.lambda_entropy, s.measured_kbps, s.entropy_bits]
                               for s in codec.bitrate_report_],
        },
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = _PREFIX.pack(MAGIC, VERSION, len(head)) + head + b"".join(blobs)
    return body + _CRC.pack(zlib.crc32(body))


def loads(data):
    """Rebuild a fitted :class:`CQCodec` from :func:`dumps` output."""
    data = bytes(data)
    if len(data) < _PREFIX.size or data[:4] != MAGIC:
        raise CheckpointError("not a CQ checkpoint")
    if len(data) < _PREFIX.size + _CRC.size:
        raise CheckpointError("checkpoint is truncated")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint is corrupt (checksum mismatch)")
    _, version, n_head = _PREFIX.unpack_from(body)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(body[_PREFIX.size:_PREFIX.size + n_head])
        config = CodecConfig.from_ini(header["config"])
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"checkpoint header is unreadable: {exc}") from exc
    blob = body[_PREFIX.size + n_head:]

    codec = CQCodec.from_config(config)
    net = CQNetwork(config)
    state = {}
    for entry in header["tensors"]:
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = entry["offset"] + count * dt.itemsize
        if end > len(blob):
            raise CheckpointError("checkpoint is truncated")
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=entry["offset"]).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(dt.newbyteorder("=")))
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint tensors do not match the configuration: {exc}") from exc
    net.eval()
    codec.network_ = net
    codec.tables_ = CodeTables.from_dict(header["tables"])
    s = header["state"]
    codec.signal_gain_ = float(s["signal_gain"])
    codec.lambda_entropy_ = float(s["lambda_entropy"])
    codec.bitrate_report_ = [BitrateStep(int(i), *map(float, rest)) for i, *rest in s["bitrate_report"]]
    codec.history_ = []
    return codec


def save(codec, path):
    """Write ``codec`` to ``path``; returns the model hash."""
    data = dumps(codec)
    Path(path).write_bytes(data)
    return model_hash(data)


def load(path):
    """Read a checkpoint; returns ``(codec, model_hash)``."""
    data = Path(path).read_bytes()
    return loads(data), model_hash(data)
