"""Coded-utterance container.

Layout (multi-byte integers little-endian)::

    magic        4s   b"CQC1"
    version      u16
    flags        u16  bit 0: LSP stream odd tail, bit 1: residual odd tail
    config_hash  8s
    model_hash   8s
    frames       u32
    samples      u32
    n_ae         u8
    lsp_count    u16
    code_width   u16
    payload_bits u32
    payload_crc  u32  CRC-32 of the payload bytes
    header_crc   u32  CRC-32 of every preceding header byte

followed by the payload: for each frame, the pair-coded LSP indices and then
each autoencoder's pair-coded residual indices, packed MSB first and
zero-padded to a whole byte at the end.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .huffman import BitReader, BitWriter, HuffmanTable, TruncatedStreamError, huffman_decode, huffman_encode

MAGIC = b"CQC1"
VERSION = 1
_HEADER = struct.Struct("<4sHH8s8sIIBHHII")
_CRC = struct.Struct("<I")
HEADER_SIZE = _HEADER.size + _CRC.size


class BitstreamError(ValueError):
    pass


class NotABitstreamError(BitstreamError):
    pass


class UnsupportedVersionError(BitstreamError):
    pass


class CorruptStreamError(BitstreamError):
    pass


@dataclass
class FrameCode:
    lsp_indices: np.ndarray
    residual_indices: list

    def __post_init__(self):
        self.lsp_indices = np.asarray(self.lsp_indices, dtype=np.int64)
        self.residual_indices = [np.asarray(r, dtype=np.int64) for r in self.residual_indices]

    def __eq__(self, other):
        if not isinstance(other, FrameCode):
            return NotImplemented
        return (np.array_equal(self.lsp_indices, other.lsp_indices)
                and len(self.residual_indices) == len(other.residual_indices)
                and all(np.array_equal(a, b) for a, b in zip(self.residual_indices, other.residual_indices)))


@dataclass
class CodeTables:
    lsp: HuffmanTable
    residual: list

    def to_dict(self):
        return {"lsp": self.lsp.to_dict(), "residual": [t.to_dict() for t in self.residual]}

    @classmethod
    def from_dict(cls, d):
        return cls(HuffmanTable.from_dict(d["lsp"]), [HuffmanTable.from_dict(t) for t in d["residual"]])


@dataclass
class StreamMeta:
    sample_count: int
    config_hash: bytes = b"\0" * 8
    model_hash: bytes = b"\0" * 8
    n_autoencoders: int = 1
    lsp_count: int = 16
    code_width: int = 256
    frame_count: int = 0
    payload_bits: int = 0
    version: int = VERSION
    flags: int = field(default=0)


def encode_payload(frames, tables):
    writer = BitWriter()
    for f in frames:
        huffman_encode(f.lsp_indices, tables.lsp, writer)
        for r, table in zip(f.residual_indices, tables.residual):
            huffman_encode(r, table, writer)
    return writer


def serialize(frames, tables, meta):
    """Pack frame codes into a self-checking byte string.

    ``meta`` provides sample count and hashes; frame count, code geometry and
    payload length are taken from ``frames``.
    """
    frames = list(frames)
    n_ae = len(tables.residual)
    for f in frames:
        if f.lsp_indices.size != meta.lsp_count or len(f.residual_indices) != n_ae:
            raise ValueError("frame code does not match stream geometry")
        if any(r.size != meta.code_width for r in f.residual_indices):
            raise ValueError("residual index count does not match code width")
    writer = encode_payload(frames, tables)
    payload = writer.to_bytes()
    flags = (meta.lsp_count % 2) | ((meta.code_width % 2) << 1)
    head = _HEADER.pack(
        MAGIC, VERSION, flags, meta.config_hash, meta.model_hash, len(frames), meta.sample_count,
        n_ae, meta.lsp_count, meta.code_width, writer.n_bits, zlib.crc32(payload),
    )
    return head + _CRC.pack(zlib.crc32(head)) + payload


def read_header(data):
    """Validate and decode the header; returns ``(meta, payload_crc)``."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise NotABitstreamError("not a CQ bitstream")
    if len(data) < HEADER_SIZE:
        raise CorruptStreamError("truncated header")
    head = data[:_HEADER.size]
    (stored_crc,) = _CRC.unpack_from(data, _HEADER.size)
    if zlib.crc32(head) != stored_crc:
        raise CorruptStreamError("header checksum mismatch")
    (_, version, flags, cfg, model, n_frames, n_samples, n_ae, lsp_count,
     code_width, n_bits, payload_crc) = _HEADER.unpack(head)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported bitstream version {version}")
    meta = StreamMeta(n_samples, cfg, model, n_ae, lsp_count, code_width, n_frames, n_bits, version, flags)
    return meta, payload_crc


def parse(data, tables):
    """Inverse of :func:`serialize`; returns ``(frames, meta)``."""
    data = bytes(data)
    meta, payload_crc = read_header(data)
    payload = data[HEADER_SIZE:]
    if zlib.crc32(payload) != payload_crc:
        raise CorruptStreamError("payload checksum mismatch")
    if len(payload) * 8 < meta.payload_bits:
        raise CorruptStreamError("payload shorter than declared")
    if meta.n_autoencoders != len(tables.residual):
        raise BitstreamError("stream and tables disagree on the number of autoencoders")
    reader = BitReader(payload, meta.payload_bits)
    frames = []
    try:
        for _ in range(meta.frame_count):
            lsp = huffman_decode(reader, tables.lsp, meta.lsp_count)
            res = [huffman_decode(reader, t, meta.code_width) for t in tables.residual]
            frames.append(FrameCode(lsp, res))
    except TruncatedStreamError as exc:
        raise CorruptStreamError(str(exc)) from exc
    return frames, meta
