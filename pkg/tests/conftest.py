import numpy as np
import pytest

from codr import rle, transform
from codr.conv import LayerShape, WeightTensor
from codr.transform import TilingConfig, build_weight_vectors, partition_into_tiles, unify_weight_vector


@pytest.fixture
def default_cfg():
    return TilingConfig()


def random_layer(rng, *, max_ch=8, max_spatial=16, kernels=(1, 2, 3), strides=(1, 2),
                 pads=(0, 1), bit_width=8, density=0.5):
    """Draw a small consistent (shape, weights, input) triple."""
    n = int(rng.integers(1, max_ch + 1))
    m = int(rng.integers(1, max_ch + 1))
    k = int(rng.choice(kernels))
    s = int(rng.choice(strides))
    p = int(rng.choice(pads))
    max_out_r = max(1, (max_spatial + 2 * p - k) // s + 1)
    out_r = int(rng.integers(1, max_out_r + 1))
    out_c = int(rng.integers(1, max_out_r + 1))
    in_r = (out_r - 1) * s + k - 2 * p
    in_c = (out_c - 1) * s + k - 2 * p
    if in_r < 1 or in_c < 1:
        return random_layer(rng, max_ch=max_ch, max_spatial=max_spatial, kernels=kernels,
                            strides=strides, pads=pads, bit_width=bit_width, density=density)
    shape = LayerShape(n_in=n, m_out=m, k_rows=k, k_cols=k,
                       in_rows=in_r, in_cols=in_c, stride=s, pad=p)
    half = 1 << (bit_width - 1)
    values = rng.integers(-half, half, size=(m, n, k, k), dtype=np.int64)
    values[rng.random(values.shape) >= density] = 0
    bias = rng.integers(-half, half, size=m, dtype=np.int64)
    inp = rng.integers(-half, half, size=(n, in_r, in_c), dtype=np.int64)
    return shape, WeightTensor(values, bias), inp


def encode_pipeline(weights: WeightTensor, shape: LayerShape, cfg: TilingConfig,
                    bit_width: int = 8):
    """Tile, unify, choose parameters, encode. Returns (encoded, streams)."""
    plan = partition_into_tiles(shape, cfg)
    streams = [unify_weight_vector(v) for v in build_weight_vectors(weights, plan)]
    vec_len = cfg.vector_length(shape)
    params = rle.choose_encoding_params(streams, bit_width, vec_len)
    return rle.encode_layer(streams, params, vec_len), streams


def halo_coverage(shape: LayerShape, cfg: TilingConfig) -> np.ndarray:
    """Oracle: per input feature, the number of tile windows covering it."""
    h = np.zeros((shape.in_rows, shape.in_cols), np.int64)
    plan = partition_into_tiles(shape, cfg)
    for tile in plan.spatial_tiles:
        r0 = tile.row0 * shape.stride - shape.pad
        c0 = tile.col0 * shape.stride - shape.pad
        r_lo, r_hi = max(0, r0), min(shape.in_rows, r0 + cfg.t_ri)
        c_lo, c_hi = max(0, c0), min(shape.in_cols, c0 + cfg.t_ci)
        if r_lo < r_hi and c_lo < c_hi:
            h[r_lo:r_hi, c_lo:c_hi] += 1
    return h
