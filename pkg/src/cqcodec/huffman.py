"""Canonical Huffman coding of non-overlapping symbol pairs.

Pairs never seen while building a table are sent as an escape code followed
by the raw pair index.
"""

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field


class TruncatedStreamError(ValueError):
    pass


def code_lengths(freqs):
    """Optimal prefix-code lengths for ``{symbol: weight}``.

    A lone symbol gets a 1-bit code. Ties are broken by insertion order so
    the result is deterministic.
    """
    items = [(w, i, s) for i, (s, w) in enumerate(freqs.items()) if w > 0]
    if not items:
        return {}
    if len(items) == 1:
        return {items[0][2]: 1}
    heap = [(w, i, [s]) for w, i, s in items]
    heapq.heapify(heap)
    lengths = {s: 0 for _, _, s in items}
    counter = len(heap)
    while len(heap) > 1:
        w1, _, s1 = heapq.heappop(heap)
        w2, _, s2 = heapq.heappop(heap)
        for s in s1 + s2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, counter, s1 + s2))
        counter += 1
    return lengths


def canonical_codes(lengths):
    """Assign canonical codes ordered by (length, symbol): ``{symbol: (code, length)}``."""
    codes = {}
    code = 0
    prev = 0
    for sym, n in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= n - prev
        codes[sym] = (code, n)
        code += 1
        prev = n
    return codes


def kraft_sum(lengths):
    return sum(2.0 ** -n for n in lengths.values())


class BitWriter:
    """MSB-first bit accumulator."""

    def __init__(self):
        self._chunks = []
        self.n_bits = 0

    def write(self, value, n):
        if n:
            self._chunks.append(format(value, f"0{n}b"))
            self.n_bits += n

    def extend(self, other):
        self._chunks.extend(other._chunks)
        self.n_bits += other.n_bits

    def to_str(self):
        return "".join(self._chunks)

    def to_bytes(self):
        bits = self.to_str()
        bits += "0" * (-len(bits) % 8)
        return int(bits, 2).to_bytes(len(bits) // 8, "big") if bits else b""


class BitReader:
    def __init__(self, data, n_bits=None):
        if isinstance(data, str):
            self._bits = data
        else:
            self._bits = "".join(format(b, "08b") for b in data)
        self.n_bits = len(self._bits) if n_bits is None else n_bits
        self.pos = 0

    def read(self, n):
        if self.pos + n > self.n_bits:
            raise TruncatedStreamError("unexpected end of stream")
        v = int(self._bits[self.pos:self.pos + n], 2) if n else 0
        self.pos += n
        return v

    def read_bit(self):
        if self.pos >= self.n_bits:
            raise TruncatedStreamError("unexpected end of stream")
        b = self._bits[self.pos] == "1"
        self.pos += 1
        return b


@dataclass
class HuffmanTable:
    """Prefix code over pair indices ``s1 * J + s2``; index ``J * J`` is the escape."""

    alphabet_size: int
    lengths: dict
    codes: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.lengths = {int(k): int(v) for k, v in self.lengths.items()}
        self.codes = canonical_codes(self.lengths)
        self._by_length = {}
        for sym, (code, n) in self.codes.items():
            self._by_length.setdefault(n, {})[code] = sym
        self._max_len = max(self.lengths.values(), default=0)

    @property
    def escape(self):
        return self.alphabet_size ** 2

    @property
    def raw_pair_bits(self):
        return 2 * max(1, math.ceil(math.log2(self.alphabet_size)))

    def pair_bits(self, pair):
        if pair in self.codes:
            return self.codes[pair][1]
        return self.codes[self.escape][1] + self.raw_pair_bits

    def to_dict(self):
        return {"alphabet_size": self.alphabet_size,
                "lengths": [[s, n] for s, n in sorted(self.lengths.items())]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alphabet_size"], {s: n for s, n in d["lengths"]})

    def write_pair(self, writer, pair):
        code = self.codes.get(pair)
        if code is not None:
            writer.write(*code)
            return
        esc = self.codes.get(self.escape)
        if esc is None:
            raise ValueError(f"pair {pair} not in table and table has no escape code")
        writer.write(*esc)
        writer.write(pair, self.raw_pair_bits)

    def read_pair(self, reader):
        code = 0
        for n in range(1, self._max_len + 1):
            code = (code << 1) | reader.read_bit()
            sym = self._by_length.get(n, {}).get(code)
            if sym is not None:
                if sym == self.escape:
                    return reader.read(self.raw_pair_bits)
                return sym
        raise ValueError("invalid Huffman code in stream")


def group_pairs(symbols, alphabet_size):
    """Non-overlapping pair indices; an odd tail is padded with symbol 0.

    Returns ``(pairs, padded)``.
    """
    s = [int(v) for v in symbols]
    if any(v < 0 or v >= alphabet_size for v in s):
        raise ValueError(f"symbols must lie in [0, {alphabet_size})")
    padded = len(s) % 2 == 1
    if padded:
        s.append(0)
    return [s[i] * alphabet_size + s[i + 1] for i in range(0, len(s), 2)], padded


def build_huffman_pairs(symbols, alphabet_size, escape=True):
    """Fit a pair table to the empirical pair distribution of ``symbols``.

    ``symbols`` may be one flat stream or an iterable of streams (each paired
    independently). The escape symbol gets unit weight.
    """
    streams = symbols
    if len(streams) and not hasattr(streams[0], "__len__"):
        streams = [streams]
    counts = Counter()
    for stream in streams:
        counts.update(group_pairs(stream, alphabet_size)[0])
    freqs = dict(sorted(counts.items()))
    if escape:
        freqs[alphabet_size ** 2] = 1
    if not freqs:
        freqs = {0: 1}
    return HuffmanTable(alphabet_size, code_lengths(freqs))


def huffman_encode(symbols, table, writer=None):
    """Append the pair codes for ``symbols`` to ``writer`` (new one if omitted)."""
    writer = BitWriter() if writer is None else writer
    pairs, _ = group_pairs(symbols, table.alphabet_size)
    for p in pairs:
        table.write_pair(writer, p)
    return writer


def huffman_decode(bits, table, n):
    """Decode ``n`` symbols from a :class:`BitReader`, bit string, or bytes."""
    reader = bits if isinstance(bits, BitReader) else BitReader(bits)
    J = table.alphabet_size
    out = []
    for _ in range((n + 1) // 2):
        p = table.read_pair(reader)
        out.extend(divmod(p, J))
    return out[:n]


def encoded_bits(symbols, table):
    pairs, _ = group_pairs(symbols, table.alphabet_size)
    return sum(table.pair_bits(p) for p in pairs)
