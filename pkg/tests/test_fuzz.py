"""Mutation fuzzing: corrupted containers must either decode to valid data
or raise the typed corruption/config errors, never anything else."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codr import rle, tensorio
from codr.errors import ConfigError, CorruptionError
from codr.rle import choose_encoding_params, decode_layer, encode_layer
from codr.transform import unify_weight_vector


def build_codr_bytes(seed=0, vec_len=20, n_vectors=12):
    rng = np.random.default_rng(seed)
    streams = []
    for _ in range(n_vectors):
        v = rng.integers(-128, 128, size=vec_len)
        shift = int(rng.choice([0, 5]))
        v = (v >> shift) << shift
        v[rng.random(vec_len) >= 0.6] = 0
        streams.append(unify_weight_vector(np.asarray(v, np.int64)))
    params = choose_encoding_params(streams, 8, vec_len)
    enc = encode_layer(streams, params, vec_len)
    import os
    import tempfile

    fd, path = tempfile.mkstemp(suffix=".codr")
    os.close(fd)
    rle.write_codr_file(path, [enc])
    with open(path, "rb") as f:
        data = f.read()
    os.unlink(path)
    return data, vec_len, n_vectors, streams


BASE, VEC_LEN, N_VECTORS, STREAMS = build_codr_bytes()


@settings(max_examples=400, deadline=None)
@given(st.integers(8, len(BASE) - 1), st.integers(1, 255))
def test_codr_byte_mutations_never_crash(pos, mask):
    import os
    import tempfile

    mutated = bytearray(BASE)
    mutated[pos] ^= mask
    fd, path = tempfile.mkstemp(suffix=".codr")
    os.write(fd, bytes(mutated))
    os.close(fd)
    try:
        layers = rle.read_codr_file(path, [(VEC_LEN, N_VECTORS)])
        decoded = decode_layer(layers[0])
    except (CorruptionError, ConfigError):
        return
    finally:
        os.unlink(path)
    # a surviving mutation must still describe self-consistent streams
    for s in decoded:
        assert sum(s.counts) <= VEC_LEN
        assert all(len(g) == c for g, c in zip(s.indexes, s.counts))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200), st.integers(1, 255))
def test_truncated_codr_never_crashes(cut, mask):
    mutated = BASE[:max(8, len(BASE) - cut)]
    path_data = bytes(mutated)
    import tempfile, os
    fd, path = tempfile.mkstemp(suffix=".codr")
    os.write(fd, path_data)
    os.close(fd)
    try:
        layers = rle.read_codr_file(path, [(VEC_LEN, N_VECTORS)])
        decode_layer(layers[0])
    except (CorruptionError, ConfigError):
        pass
    finally:
        os.unlink(path)


def _tensor_bytes():
    buf = io.BytesIO()
    tensorio.write_tensor(buf, np.arange(24, dtype=np.int8).reshape(2, 3, 4))
    return buf.getvalue()


TENSOR_BASE = _tensor_bytes()


@settings(max_examples=300, deadline=None)
@given(st.integers(0, len(TENSOR_BASE) - 1), st.integers(1, 255))
def test_tensor_byte_mutations_never_crash(pos, mask):
    mutated = bytearray(TENSOR_BASE)
    mutated[pos] ^= mask
    try:
        t = tensorio.read_tensor(io.BytesIO(bytes(mutated)))
    except CorruptionError:
        return
    if t is not None:
        assert t.size <= 10_000_000  # mutated dims stay bounded by payload check
