import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqcodec import bitstream as bs
from cqcodec import huffman as hf


def optimal_cost(weights):
    """Exhaustive minimum of sum(w * len) over all complete prefix codes."""
    n = len(weights)
    w = sorted(weights, reverse=True)
    best = math.inf
    for lengths in itertools.combinations_with_replacement(range(1, n), n):
        if sum(2.0 ** -l for l in lengths) <= 1.0:
            best = min(best, sum(a * l for a, l in zip(w, lengths)))
    return best


def pair_entropy(symbols, J):
    pairs, _ = hf.group_pairs(symbols, J)
    c = np.array(list(Counter(pairs).values()), dtype=float)
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum()), len(pairs)


class TestCodeLengths:
    def test_single_symbol(self):
        assert hf.code_lengths({"A": 1}) == {"A": 1}

    def test_dyadic_example(self):
        lengths = hf.code_lengths(dict(zip("abcde", [8, 4, 2, 1, 1])))
        assert [lengths[s] for s in "abcde"] == [1, 2, 3, 4, 4]

    def test_optimal_against_exhaustive_search(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 9))
            weights = [int(v) for v in rng.integers(1, 50, n)]
            lengths = hf.code_lengths(dict(enumerate(weights)))
            cost = sum(weights[s] * l for s, l in lengths.items())
            assert cost == optimal_cost(weights)
            assert hf.kraft_sum(lengths) <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.dictionaries(st.integers(0, 1000), st.integers(1, 10_000), min_size=1, max_size=60))
    def test_kraft_and_prefix_free(self, freqs):
        lengths = hf.code_lengths(freqs)
        assert hf.kraft_sum(lengths) <= 1.0
        codes = [format(c, f"0{n}b") for c, n in hf.canonical_codes(lengths).values()]
        for a, b in itertools.permutations(codes, 2):
            assert not b.startswith(a)

    def test_deterministic(self):
        freqs = {i: 1 for i in range(10)}
        assert hf.code_lengths(freqs) == hf.code_lengths(dict(freqs))


class TestPairCoding:
    def test_roundtrip_million_symbols(self, rng):
        J = 32
        p = rng.dirichlet(np.ones(J) * 0.5)
        symbols = rng.choice(J, size=1_000_000, p=p)
        table = hf.build_huffman_pairs(symbols, J)
        writer = hf.huffman_encode(symbols, table)
        decoded = hf.huffman_decode(writer.to_str(), table, symbols.size)
        assert np.array_equal(decoded, symbols)

    def test_roundtrip_small(self, rng):
        symbols = rng.integers(0, 32, 10_000)
        table = hf.build_huffman_pairs(symbols, 32)
        assert np.array_equal(hf.huffman_decode(hf.huffman_encode(symbols, table).to_bytes(), table, 10_000), symbols)

    def test_uniform_rate(self, rng):
        symbols = rng.integers(0, 32, 200_000)
        table = hf.build_huffman_pairs(symbols, 32)
        per_pair = hf.encoded_bits(symbols, table) / (symbols.size / 2)
        assert 9 <= per_pair < 11

    def test_skewed_rate(self, rng):
        symbols = np.where(rng.random(100_000) < 0.99, 0, rng.integers(1, 32, 100_000))
        table = hf.build_huffman_pairs(symbols, 32)
        assert hf.encoded_bits(symbols, table) / (symbols.size / 2) < 2

    @pytest.mark.parametrize("skew", [0.3, 1.0, 3.0])
    def test_within_one_bit_of_pair_entropy(self, rng, skew):
        J = 8
        p = np.exp(-skew * np.arange(J))
        symbols = rng.choice(J, size=50_000, p=p / p.sum())
        table = hf.build_huffman_pairs(symbols, J, escape=False)
        h2, n_pairs = pair_entropy(symbols, J)
        avg = hf.encoded_bits(symbols, table) / n_pairs
        assert h2 <= avg < h2 + 1

    def test_escape_for_unseen_pairs(self):
        table = hf.build_huffman_pairs([0, 0, 1, 1], 4)
        unseen = [3, 2, 2, 3]
        out = hf.huffman_decode(hf.huffman_encode(unseen, table).to_str(), table, 4)
        assert out == unseen
        esc = table.codes[table.escape][1]
        assert hf.encoded_bits(unseen, table) == 2 * (esc + table.raw_pair_bits)

    def test_raw_size_bound(self, rng):
        symbols = rng.integers(0, 32, 5000)
        table = hf.build_huffman_pairs(symbols[:2000], 32)
        overhead = sum(1 for p in hf.group_pairs(symbols, 32)[0] if p not in table.codes) * table.codes[table.escape][1]
        assert hf.encoded_bits(symbols, table) <= 5 * symbols.size + overhead

    def test_odd_tail(self):
        table = hf.build_huffman_pairs([1, 2, 3], 4)
        assert hf.huffman_decode(hf.huffman_encode([1, 2, 3], table).to_str(), table, 3) == [1, 2, 3]

    def test_empty_stream_table(self):
        table = hf.build_huffman_pairs([], 4, escape=False)
        assert table.lengths == {0: 1}

    def test_out_of_range_symbol(self):
        with pytest.raises(ValueError):
            hf.group_pairs([5], 4)

    def test_truncated(self, rng):
        symbols = rng.integers(0, 8, 100)
        table = hf.build_huffman_pairs(symbols, 8)
        bits = hf.huffman_encode(symbols, table).to_str()
        with pytest.raises(hf.TruncatedStreamError, match="unexpected end of stream"):
            hf.huffman_decode(bits[:-3], table, 100)

    def test_table_dict_roundtrip(self, rng):
        table = hf.build_huffman_pairs(rng.integers(0, 32, 1000), 32)
        again = hf.HuffmanTable.from_dict(table.to_dict())
        assert again.codes == table.codes


def random_stream(rng, n_frames, n_ae=1, width=256):
    lsp = rng.integers(0, 256, (max(n_frames, 1) * 4, 16))
    res = rng.integers(0, 32, (max(n_frames, 1) * 4, width))
    tables = bs.CodeTables(hf.build_huffman_pairs(list(lsp), 256),
                           [hf.build_huffman_pairs(list(res), 32) for _ in range(n_ae)])
    frames = [bs.FrameCode(rng.integers(0, 256, 16), [rng.integers(0, 32, width) for _ in range(n_ae)])
              for _ in range(n_frames)]
    meta = bs.StreamMeta(n_frames * 480 + 32, b"config!!", b"model!!!", n_ae, 16, width)
    return frames, tables, meta


class TestBitstream:
    def test_roundtrip_hundred_frames(self, rng):
        frames, tables, meta = random_stream(rng, 100, n_ae=2)
        data = bs.serialize(frames, tables, meta)
        parsed, m = bs.parse(data, tables)
        assert parsed == frames
        assert (m.sample_count, m.config_hash, m.model_hash, m.frame_count) == (meta.sample_count, b"config!!", b"model!!!", 100)
        assert bs.serialize(parsed, tables, meta) == data

    def test_empty(self, rng):
        _, tables, meta = random_stream(rng, 0)
        parsed, m = bs.parse(bs.serialize([], tables, meta), tables)
        assert parsed == [] and m.frame_count == 0

    def test_every_single_bit_flip_detected(self, rng):
        frames, tables, meta = random_stream(rng, 3, width=16)
        data = bytearray(bs.serialize(frames, tables, meta))
        for pos in range(len(data) * 8):
            corrupt = bytearray(data)
            corrupt[pos // 8] ^= 0x80 >> (pos % 8)
            with pytest.raises(bs.BitstreamError):
                bs.parse(bytes(corrupt), tables)

    def test_wrong_magic(self, rng):
        with pytest.raises(bs.NotABitstreamError, match="not a CQ bitstream"):
            bs.parse(b"RIFF" + bytes(60), random_stream(rng, 0)[1])

    def test_wrong_version(self, rng):
        frames, tables, meta = random_stream(rng, 1)
        data = bytearray(bs.serialize(frames, tables, meta))
        data[4:6] = (7).to_bytes(2, "little")
        head = bytes(data[:bs.HEADER_SIZE - 4])
        import zlib
        data[bs.HEADER_SIZE - 4:bs.HEADER_SIZE] = zlib.crc32(head).to_bytes(4, "little")
        with pytest.raises(bs.UnsupportedVersionError, match="version 7"):
            bs.parse(bytes(data), tables)

    def test_truncated(self, rng):
        frames, tables, meta = random_stream(rng, 5)
        data = bs.serialize(frames, tables, meta)
        with pytest.raises(bs.CorruptStreamError):
            bs.parse(data[:-4], tables)
        with pytest.raises(bs.CorruptStreamError):
            bs.parse(data[:20], tables)

    def test_geometry_checked(self, rng):
        frames, tables, meta = random_stream(rng, 2)
        frames[1].residual_indices[0] = frames[1].residual_indices[0][:10]
        with pytest.raises(ValueError):
            bs.serialize(frames, tables, meta)
