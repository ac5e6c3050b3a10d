"""Run-length encoding of unified weight streams.

Three independently parameterized structures are emitted per layer:

* delta structure: per vector, a fixed-width entry-count header, then the
  first value as flag 1 + W bits (two's complement), then each delta as
  flag 0 + k_delta bits when it fits, else flag 1 + W bits unsigned. The
  flag bit is emitted before its payload.
* count structure: one k_count-bit field per entry holding count - 1
  (so a field spans repetitions 1 .. 2**k_count). A larger repetition
  count is split into a full field followed by dummy entries (delta 0,
  index list continued) covering the remainder.
* index structure: all indexes of a vector in stream order, each encoded
  relative to the previously emitted index, flag 0 + k_index bits for a
  delta in [0, 2**k_index), else flag 1 + idx_full bits absolute. The
  first index of a vector is always absolute. Runs continue across entry
  boundaries.

Structures are byte-aligned per layer. Encoding parameters are chosen per
layer per structure by exhaustive search; the delta and count parameters
are searched jointly because dummy entries created by count overflow add
fields to the delta structure.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bitstream import BitReader, Bitstream
from .errors import ConfigError, CorruptionError
from .transform import UnifiedStream

CODR_FILE_MAGIC = b"CODRRLE1"
_LAYER_HEADER = struct.Struct("<IB4B3Q")


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError(f"ceil_log2 requires n >= 1, got {n}")
    return (n - 1).bit_length()


def header_width(vec_len: int) -> int:
    """Bits of the per-vector entry-count header (holds 0 .. vec_len)."""
    return ceil_log2(vec_len + 1)


def full_index_width(vec_len: int) -> int:
    """Bits of an absolute lane index; at least one even for 1-lane vectors."""
    return max(1, ceil_log2(vec_len))


@dataclass(frozen=True)
class EncodingParams:
    """Per-layer bit lengths for the three structures."""

    k_delta: int
    k_count: int
    k_index: int
    w_full: int
    idx_full: int

    def validate(self, vec_len: int) -> None:
        if self.w_full not in (8, 16):
            raise ConfigError(f"w_full must be 8 or 16, got {self.w_full}")
        if self.idx_full != full_index_width(vec_len):
            raise ConfigError(f"idx_full {self.idx_full} does not match vector length {vec_len}")
        if not 1 <= self.k_delta <= self.w_full:
            raise ConfigError(f"k_delta {self.k_delta} outside [1, {self.w_full}]")
        if not 1 <= self.k_index <= self.idx_full:
            raise ConfigError(f"k_index {self.k_index} outside [1, {self.idx_full}]")
        max_kc = ceil_log2(vec_len) + 1
        if not 1 <= self.k_count <= max_kc:
            raise ConfigError(f"k_count {self.k_count} outside [1, {max_kc}]")


def _count_chunks(count: int, cap: int) -> list[int]:
    chunks = []
    while count > cap:
        chunks.append(cap)
        count -= cap
    chunks.append(count)
    return chunks


def expand_dummies(stream: UnifiedStream, k_count: int) -> UnifiedStream:
    """Split repetition counts exceeding 2**k_count into dummy entries."""
    cap = 1 << k_count
    if all(c <= cap for c in stream.counts):
        return stream
    deltas: list[int] = []
    counts: list[int] = []
    indexes: list[list[int]] = []
    for j, (count, idxs) in enumerate(zip(stream.counts, stream.indexes)):
        off = 0
        for pos, chunk in enumerate(_count_chunks(count, cap)):
            if counts:
                deltas.append(stream.deltas[j - 1] if pos == 0 else 0)
            counts.append(chunk)
            indexes.append(idxs[off:off + chunk])
            off += chunk
    return UnifiedStream(stream.first_value, deltas, counts, indexes)


def merge_dummies(stream: UnifiedStream) -> UnifiedStream:
    """Fold delta-zero entries back into their predecessors."""
    if not any(d == 0 for d in stream.deltas):
        return stream
    deltas: list[int] = []
    counts = [stream.counts[0]]
    indexes = [list(stream.indexes[0])]
    for d, c, idxs in zip(stream.deltas, stream.counts[1:], stream.indexes[1:]):
        if d == 0:
            counts[-1] += c
            indexes[-1].extend(idxs)
        else:
            deltas.append(d)
            counts.append(c)
            indexes.append(list(idxs))
    return UnifiedStream(stream.first_value, deltas, counts, indexes)


def _signed_field(value: int, width: int) -> int:
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    if not lo <= value <= hi:
        raise ValueError(f"value {value} outside signed {width}-bit range")
    return value & ((1 << width) - 1)


def _unsigned_to_signed(raw: int, width: int) -> int:
    return raw - (1 << width) if raw >= (1 << (width - 1)) else raw


def encode_delta_stream(first_value: int, deltas: list[int], k_delta: int,
                        w_full: int, out: Bitstream | None = None) -> Bitstream:
    """First value as flag 1 + W bits, then flagged low/high delta fields."""
    bs = out if out is not None else Bitstream()
    bs.append(1, 1)
    bs.append(_signed_field(first_value, w_full), w_full)
    low = 1 << k_delta
    for d in deltas:
        if not 0 <= d < (1 << w_full):
            raise ValueError(f"delta {d} outside [0, 2^{w_full})")
        if d < low:
            bs.append(0, 1)
            bs.append(d, k_delta)
        else:
            bs.append(1, 1)
            bs.append(d, w_full)
    return bs


def decode_delta_stream(reader: BitReader, k_delta: int, w_full: int,
                        n_entries: int) -> tuple[int | None, list[int]]:
    """Inverse of encode_delta_stream for n_entries fields (0 reads nothing)."""
    if n_entries == 0:
        return None, []
    if reader.read(1) != 1:
        raise CorruptionError("first value of a vector must be a full-precision field")
    first = _unsigned_to_signed(reader.read(w_full), w_full)
    if first == 0:
        raise CorruptionError("decoded first value is zero")
    deltas = []
    for _ in range(n_entries - 1):
        if reader.read(1):
            deltas.append(reader.read(w_full))
        else:
            deltas.append(reader.read(k_delta))
    return first, deltas


def encode_count_stream(counts: list[int], k_count: int,
                        out: Bitstream | None = None) -> tuple[Bitstream, list[tuple[int, int]]]:
    """Encode repetition counts; returns the dummy-augmented entry list as
    (source entry, repetitions) pairs so the other encoders stay aligned."""
    bs = out if out is not None else Bitstream()
    cap = 1 << k_count
    entries: list[tuple[int, int]] = []
    for j, count in enumerate(counts):
        if count < 1:
            raise ValueError(f"repetition count must be >= 1, got {count}")
        for chunk in _count_chunks(count, cap):
            bs.append(chunk - 1, k_count)
            entries.append((j, chunk))
    return bs, entries


def decode_count_stream(reader: BitReader, k_count: int,
                        dummy_flags: list[bool]) -> list[int]:
    """Read one field per flag; dummy fields extend the previous entry."""
    if dummy_flags and dummy_flags[0]:
        raise CorruptionError("dummy entry cannot open a vector")
    merged: list[int] = []
    for is_dummy in dummy_flags:
        c = reader.read(k_count) + 1
        if is_dummy:
            merged[-1] += c
        else:
            merged.append(c)
    return merged


def encode_index_stream(index_lists: list[list[int]], k_index: int, idx_full: int,
                        out: Bitstream | None = None) -> Bitstream:
    bs = out if out is not None else Bitstream()
    low = 1 << k_index
    prev = None
    for group in index_lists:
        last = None
        for idx in group:
            if not 0 <= idx < (1 << idx_full):
                raise ValueError(f"index {idx} outside [0, 2^{idx_full})")
            if last is not None and idx <= last:
                raise ValueError(f"indexes must ascend within a group ({last} then {idx})")
            if prev is None or not 0 <= idx - prev < low:
                bs.append(1, 1)
                bs.append(idx, idx_full)
            else:
                bs.append(0, 1)
                bs.append(idx - prev, k_index)
            prev = idx
            last = idx
    return bs


def decode_index_stream(reader: BitReader, k_index: int, idx_full: int,
                        group_sizes: list[int], vec_len: int) -> list[list[int]]:
    groups: list[list[int]] = []
    prev = None
    for size in group_sizes:
        group: list[int] = []
        for _ in range(size):
            if reader.read(1):
                idx = reader.read(idx_full)
            else:
                if prev is None:
                    raise CorruptionError("first index of a vector must be absolute")
                idx = prev + reader.read(k_index)
            if idx >= vec_len:
                raise CorruptionError(f"index {idx} outside vector of length {vec_len}")
            if group and idx <= group[-1]:
                raise CorruptionError(f"indexes not ascending within a group ({group[-1]} then {idx})")
            group.append(idx)
            prev = idx
        groups.append(group)
    return groups


@dataclass(frozen=True)
class VectorSizes:
    """Exact encoded bit counts of one vector, including its header."""

    delta_bits: int
    count_bits: int
    index_bits: int
    n_entries: int
    n_indexes: int

    @property
    def total_bits(self) -> int:
        return self.delta_bits + self.count_bits + self.index_bits

    @property
    def n_fields(self) -> int:
        # header + delta fields + count fields + index fields
        return 1 + 2 * self.n_entries + self.n_indexes


def vector_sizes(stream: UnifiedStream, params: EncodingParams, vec_len: int) -> VectorSizes:
    """Analytic sizes; matches the emitted bitstreams field for field."""
    aug = expand_dummies(stream, params.k_count)
    u = aug.unique_count
    d_bits = header_width(vec_len)
    if u:
        d_bits += 1 + params.w_full
        low = 1 << params.k_delta
        for d in aug.deltas:
            d_bits += 1 + (params.k_delta if d < low else params.w_full)
    c_bits = u * params.k_count
    i_bits = 0
    n_idx = 0
    low_i = 1 << params.k_index
    prev = None
    for group in aug.indexes:
        for idx in group:
            if prev is None or not 0 <= idx - prev < low_i:
                i_bits += 1 + params.idx_full
            else:
                i_bits += 1 + params.k_index
            prev = idx
            n_idx += 1
    return VectorSizes(d_bits, c_bits, i_bits, u, n_idx)


def _index_structure_bits(streams: list[UnifiedStream], k_index: int, idx_full: int) -> int:
    low = 1 << k_index
    total = 0
    for s in streams:
        prev = None
        for group in s.indexes:
            for idx in group:
                if prev is None or not 0 <= idx - prev < low:
                    total += 1 + idx_full
                else:
                    total += 1 + k_index
                prev = idx
    return total


def choose_encoding_params(streams: list[UnifiedStream], w_full: int,
                           vec_len: int) -> EncodingParams:
    """Exhaustively pick the bit lengths minimizing the layer's encoded size.

    k_index is searched on its own (the index structure does not depend on
    the other parameters). k_delta and k_count are searched over their
    joint grid: count overflow inserts dummy entries whose flag + k_delta
    bits land in the delta structure, so the two sizes are coupled. Ties
    resolve to the smallest parameter (lexicographically for the pair).
    """
    if not streams:
        raise ValueError("choose_encoding_params needs at least one stream")
    idx_full = full_index_width(vec_len)

    best_ki, best_ibits = 1, None
    for ki in range(1, idx_full + 1):
        bits = _index_structure_bits(streams, ki, idx_full)
        if best_ibits is None or bits < best_ibits:
            best_ki, best_ibits = ki, bits

    all_deltas = [d for s in streams for d in s.deltas]
    u_total = sum(s.unique_count for s in streams)
    max_kc = ceil_log2(vec_len) + 1 if vec_len > 1 else 1

    ndum = {}
    for kc in range(1, max_kc + 1):
        cap = 1 << kc
        ndum[kc] = sum((c + cap - 1) // cap - 1 for s in streams for c in s.counts)

    best = None
    for kd in range(1, w_full + 1):
        low = 1 << kd
        d_real = sum(1 + (kd if d < low else w_full) for d in all_deltas)
        for kc in range(1, max_kc + 1):
            total = d_real + ndum[kc] * (1 + kd) + (u_total + ndum[kc]) * kc
            if best is None or total < best[0]:
                best = (total, kd, kc)
    _, k_delta, k_count = best
    return EncodingParams(k_delta=k_delta, k_count=k_count, k_index=best_ki,
                          w_full=w_full, idx_full=idx_full)


@dataclass
class EncodedLayer:
    """One layer's three structure bitstreams plus decode metadata.

    vec_len and n_vectors come from the tile plan; they are not stored in
    the file format and must be re-derived from the layer and tiling
    configuration when reading a file back.
    """

    layer_id: int
    params: EncodingParams
    vec_len: int
    n_vectors: int
    delta: Bitstream
    count: Bitstream
    index: Bitstream

    @property
    def structure_bits(self) -> tuple[int, int, int]:
        return (self.delta.bit_length, self.count.bit_length, self.index.bit_length)

    @property
    def total_bits(self) -> int:
        return sum(self.structure_bits)

    @property
    def payload_bytes(self) -> int:
        return sum((bits + 7) // 8 for bits in self.structure_bits)

    @property
    def record_bytes(self) -> int:
        """On-disk size of this layer's record (header plus payloads)."""
        return _LAYER_HEADER.size + self.payload_bytes


def encode_layer(streams: list[UnifiedStream], params: EncodingParams, vec_len: int,
                 layer_id: int = 0) -> EncodedLayer:
    params.validate(vec_len)
    hdr_w = header_width(vec_len)
    delta, count, index = Bitstream(), Bitstream(), Bitstream()
    for s in streams:
        aug = expand_dummies(s, params.k_count)
        u = aug.unique_count
        if u > vec_len:
            raise ValueError(f"stream with {u} entries cannot come from a {vec_len}-lane vector")
        delta.append(u, hdr_w)
        if u == 0:
            continue
        encode_delta_stream(aug.first_value, aug.deltas, params.k_delta, params.w_full, out=delta)
        for c in aug.counts:
            count.append(c - 1, params.k_count)
        encode_index_stream(aug.indexes, params.k_index, params.idx_full, out=index)
    return EncodedLayer(layer_id, params, vec_len, len(streams), delta, count, index)


def decode_layer(encoded: EncodedLayer) -> list[UnifiedStream]:
    """Inverse of encode_layer; returns dummy-merged streams."""
    p = encoded.params
    p.validate(encoded.vec_len)
    hdr_w = header_width(encoded.vec_len)
    rd = BitReader(encoded.delta)
    rc = BitReader(encoded.count)
    ri = BitReader(encoded.index)
    w_max = 1 << (p.w_full - 1)
    streams: list[UnifiedStream] = []
    for v in range(encoded.n_vectors):
        where = f"layer {encoded.layer_id} vector {v}"
        try:
            u = rd.read(hdr_w)
            if u > encoded.vec_len:
                raise CorruptionError(f"entry count {u} exceeds {encoded.vec_len} lanes")
            if u == 0:
                streams.append(UnifiedStream.empty())
                continue
            first, deltas = decode_delta_stream(rd, p.k_delta, p.w_full, u)
            counts = decode_count_stream(rc, p.k_count, [False] + [d == 0 for d in deltas])
            value = first
            for d in deltas:
                if d:
                    value += d
                    if value == 0:
                        raise CorruptionError("decoded a zero unique value")
                    if value >= w_max:
                        raise CorruptionError(f"decoded value {value} overflows {p.w_full} bits")
            if sum(counts) > encoded.vec_len:
                raise CorruptionError(f"repetitions exceed {encoded.vec_len} lanes")
            groups = decode_index_stream(ri, p.k_index, p.idx_full, counts, encoded.vec_len)
        except CorruptionError as e:
            raise CorruptionError(f"{where}: {e}") from None
        streams.append(UnifiedStream(first, [d for d in deltas if d], counts, groups))
    for name, reader, stream in (("delta", rd, encoded.delta),
                                 ("count", rc, encoded.count),
                                 ("index", ri, encoded.index)):
        if reader.position != stream.bit_length:
            raise CorruptionError(
                f"layer {encoded.layer_id}: {name} structure has "
                f"{stream.bit_length - reader.position} unread bits")
    return streams


def write_codr_file(path, layers: list[EncodedLayer]) -> None:
    with open(path, "wb") as f:
        f.write(CODR_FILE_MAGIC)
        for layer in layers:
            p = layer.params
            d, c, i = layer.structure_bits
            f.write(_LAYER_HEADER.pack(layer.layer_id, p.w_full,
                                       p.k_delta, p.k_count, p.k_index, p.idx_full,
                                       d, c, i))
            f.write(layer.delta.to_bytes())
            f.write(layer.count.to_bytes())
            f.write(layer.index.to_bytes())


def read_codr_file(path, layer_meta: list[tuple[int, int]]) -> list[EncodedLayer]:
    """Read a .codr file given [(vec_len, n_vectors)] per expected layer."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != CODR_FILE_MAGIC:
        raise CorruptionError(f"bad magic {data[:8]!r}")
    off = 8
    layers: list[EncodedLayer] = []
    for vec_len, n_vectors in layer_meta:
        if off + _LAYER_HEADER.size > len(data):
            raise CorruptionError("truncated layer header")
        layer_id, w, kd, kc, ki, idxf, dbits, cbits, ibits = _LAYER_HEADER.unpack_from(data, off)
        off += _LAYER_HEADER.size
        params = EncodingParams(k_delta=kd, k_count=kc, k_index=ki, w_full=w, idx_full=idxf)
        params.validate(vec_len)
        payloads = []
        for bits in (dbits, cbits, ibits):
            nbytes = (bits + 7) // 8
            if off + nbytes > len(data):
                raise CorruptionError("truncated structure payload")
            payloads.append(Bitstream.from_bytes(data[off:off + nbytes], bits))
            off += nbytes
        layers.append(EncodedLayer(layer_id, params, vec_len, n_vectors, *payloads))
    if off != len(data):
        raise CorruptionError(f"{len(data) - off} trailing bytes after the last layer")
    return layers


def size_ucnn_baseline(streams: list[UnifiedStream], w_full: int, vec_len: int,
                       k: int = 5) -> int:
    """Fixed-parameter baseline: flagged low/high fields with k = 5 for
    deltas and indexes, one extra transition bit per index, no repetition
    counts. Index deltas start from an implicit previous index of zero."""
    idx_full = full_index_width(vec_len)
    low = 1 << k
    total = 0
    for s in streams:
        if s.unique_count == 0:
            continue
        total += 1 + w_full
        for d in s.deltas:
            total += 1 + (k if d < low else w_full)
        prev = 0
        for group in s.indexes:
            for idx in group:
                delta = idx - prev
                total += 1 + (k if 0 <= delta < low else idx_full) + 1
                prev = idx
    return total


def size_scnn_baseline(weight_values, bit_width: int) -> int:
    """Zero-run-length baseline: W bits per stored element plus a 4-bit
    preceding-zero-run field; runs longer than 15 insert an explicit zero
    element that also consumes one zero of the run."""
    flat = np.asarray(weight_values).reshape(-1)
    element = bit_width + 4
    total = 0
    run = 0
    for v in flat.tolist():
        if v == 0:
            run += 1
            continue
        total += (run // 16) * element  # padding zero elements
        total += element
        run = 0
    return total
