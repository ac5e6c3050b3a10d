"""Seeded synthetic weight generation with controlled density and value count.

Every (density, unique_count) cell draws the same base values and the same
per-element zero-threshold uniforms from the seed, then applies the cell's
masks. Cells are therefore nested: lowering the density only grows the
zero set, and lowering the value count only coarsens values, so stream
statistics degrade monotonically across a sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conv import LayerShape, WeightTensor
from .errors import ConfigError


@dataclass(frozen=True)
class SyntheticSpec:
    density: float
    unique_count: int
    seed: int
    bit_width: int = 8

    def __post_init__(self):
        if not 0 < self.density <= 1:
            raise ConfigError(f"density must be in (0, 1], got {self.density}")
        u = self.unique_count
        if u < 2 or u & (u - 1) or u > (1 << self.bit_width):
            raise ConfigError(
                f"unique_count must be a power of two in [2, 2^{self.bit_width}], got {u}")
        if self.bit_width not in (8, 16):
            raise ConfigError(f"bit_width must be 8 or 16, got {self.bit_width}")

    @property
    def lsb_zeros(self) -> int:
        """Low bits forced to zero so only unique_count values remain."""
        return self.bit_width - self.unique_count.bit_length() + 1


def _mask_lsbs(values: np.ndarray, shift: int) -> np.ndarray:
    # arithmetic shift keeps two's-complement masking correct for negatives
    return (values >> shift) << shift


def synth_weight_tensor(shape: LayerShape, spec: SyntheticSpec,
                        rng: np.random.Generator) -> WeightTensor:
    """Draw one layer's weights; consumes the rng identically for every
    (density, unique_count) so cells sharing a seed stay nested."""
    dims = (shape.m_out, shape.n_in, shape.k_rows, shape.k_cols)
    half = 1 << (spec.bit_width - 1)
    raw = rng.integers(-half, half, size=dims, dtype=np.int64)
    keep = rng.random(size=dims) < spec.density
    values = np.where(keep, _mask_lsbs(raw, spec.lsb_zeros), 0)
    return WeightTensor(values, np.zeros(shape.m_out, np.int64))


def gen_synthetic_weights(spec: SyntheticSpec, layers: list[LayerShape]) -> list[WeightTensor]:
    rng = np.random.default_rng(spec.seed)
    return [synth_weight_tensor(shape, spec, rng) for shape in layers]


def synth_input_features(shape: LayerShape, seed: int, layer_index: int,
                         bit_width: int = 8) -> np.ndarray:
    """Deterministic input features for a layer, independent of the weights."""
    rng = np.random.default_rng([seed, layer_index, 0xF00D])
    half = 1 << (bit_width - 1)
    return rng.integers(-half, half, size=(shape.n_in, shape.in_rows, shape.in_cols),
                        dtype=np.int64)
