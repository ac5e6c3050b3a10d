"""Offline weight transformation: tiling, linearization, and unification.

A layer's weights are partitioned into tiles of ``t_n`` input and
``t_pu * t_m`` output channels. The weights of one input channel inside a
tile are linearized into a weight vector (``t_m * k_rows * k_cols`` lanes,
output-channel major, then kernel row major). Each vector is then
densified (zeros dropped), sorted ascending, and unified: equal values
merge into one entry carrying a repetition count and the ascending list of
lane indexes. Consecutive sorted values are stored as their differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conv import LayerShape, WeightTensor
from .errors import ConfigError, CorruptionError


@dataclass(frozen=True)
class TilingConfig:
    """Tile extents of the simulated architecture.

    Defaults match the reference hardware configuration: 8 processing
    units, 4x4 channel tiles, 8x8 output tiles fed from 20x20 input tiles,
    64 multipliers per processing unit.
    """

    t_pu: int = 8
    t_m: int = 4
    t_n: int = 4
    t_ro: int = 8
    t_co: int = 8
    t_ri: int = 20
    t_ci: int = 20
    mults_per_pu: int = 64

    def __post_init__(self):
        for name in ("t_pu", "t_m", "t_n", "t_ro", "t_co", "t_ri", "t_ci", "mults_per_pu"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    def validate_for(self, shape: LayerShape) -> None:
        """Reject configs whose input tile cannot cover an output tile's halo."""
        need_r = (self.t_ro - 1) * shape.stride + shape.k_rows
        if self.t_ri < need_r:
            raise ConfigError(
                f"t_ri={self.t_ri} is too small: needs {need_r} rows for "
                f"t_ro={self.t_ro}, stride={shape.stride}, k_rows={shape.k_rows}")
        need_c = (self.t_co - 1) * shape.stride + shape.k_cols
        if self.t_ci < need_c:
            raise ConfigError(
                f"t_ci={self.t_ci} is too small: needs {need_c} cols for "
                f"t_co={self.t_co}, stride={shape.stride}, k_cols={shape.k_cols}")

    def vector_length(self, shape: LayerShape) -> int:
        return self.t_m * shape.k_rows * shape.k_cols

    def to_dict(self) -> dict:
        return {"t_pu": self.t_pu, "t_m": self.t_m, "t_n": self.t_n,
                "t_ro": self.t_ro, "t_co": self.t_co,
                "t_ri": self.t_ri, "t_ci": self.t_ci,
                "mults_per_pu": self.mults_per_pu}

    @classmethod
    def from_dict(cls, d: dict) -> "TilingConfig":
        allowed = {"t_pu", "t_m", "t_n", "t_ro", "t_co", "t_ri", "t_ci", "mults_per_pu"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown tiling fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SpatialTile:
    """One output tile: origin in output coordinates plus its valid extent."""

    row0: int
    col0: int
    rows: int
    cols: int


@dataclass(frozen=True)
class TilePlan:
    """Deterministic enumeration of channel groups and spatial tiles."""

    shape: LayerShape
    cfg: TilingConfig
    n_channel_groups: int
    n_input_groups: int
    spatial_tiles: tuple[SpatialTile, ...]

    @property
    def n_vectors(self) -> int:
        return self.n_channel_groups * self.cfg.t_pu * self.shape.n_in

    def vector_index(self, group: int, pu: int, channel: int) -> int:
        return (group * self.cfg.t_pu + pu) * self.shape.n_in + channel

    def vector_order(self):
        """Yield (group, pu, channel) in canonical stream order."""
        for g in range(self.n_channel_groups):
            for pu in range(self.cfg.t_pu):
                for n in range(self.shape.n_in):
                    yield g, pu, n

    def group_channels(self, group: int, pu: int) -> list[tuple[int, int]]:
        """Valid (m_local, m_global) pairs of one PU slot; masked lanes omitted."""
        base = (group * self.cfg.t_pu + pu) * self.cfg.t_m
        return [(ml, base + ml) for ml in range(self.cfg.t_m)
                if base + ml < self.shape.m_out]

    def input_group_channels(self, igroup: int) -> list[tuple[int, int]]:
        """Valid (n_local, n_global) pairs of one input-channel group."""
        base = igroup * self.cfg.t_n
        return [(nl, base + nl) for nl in range(self.cfg.t_n)
                if base + nl < self.shape.n_in]


def partition_into_tiles(shape: LayerShape, cfg: TilingConfig) -> TilePlan:
    cfg.validate_for(shape)
    lanes = cfg.t_pu * cfg.t_m
    n_groups = -(-shape.m_out // lanes)
    n_igroups = -(-shape.n_in // cfg.t_n)
    tiles = []
    for tr in range(-(-shape.out_rows // cfg.t_ro)):
        for tc in range(-(-shape.out_cols // cfg.t_co)):
            r0, c0 = tr * cfg.t_ro, tc * cfg.t_co
            tiles.append(SpatialTile(r0, c0,
                                     min(cfg.t_ro, shape.out_rows - r0),
                                     min(cfg.t_co, shape.out_cols - c0)))
    return TilePlan(shape, cfg, n_groups, n_igroups, tuple(tiles))


@dataclass
class WeightVector:
    """Linearized weights of one input channel across a tile's output channels.

    Lane index = m_local * (k_rows * k_cols) + kr * k_cols + kc. Lanes of
    masked-off output channels hold zero.
    """

    group: int
    pu: int
    channel: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)


def build_weight_vectors(weights: WeightTensor, plan: TilePlan) -> list[WeightVector]:
    shape, cfg = plan.shape, plan.cfg
    if weights.values.shape != (shape.m_out, shape.n_in, shape.k_rows, shape.k_cols):
        raise ConfigError(f"weight shape {weights.values.shape} does not match plan layer")
    kk = shape.k_rows * shape.k_cols
    vectors = []
    for g, pu, n in plan.vector_order():
        vec = np.zeros(cfg.t_m * kk, np.int64)
        for m_local, m in plan.group_channels(g, pu):
            vec[m_local * kk:(m_local + 1) * kk] = weights.values[m, n].reshape(-1)
        vectors.append(WeightVector(g, pu, n, vec))
    return vectors


@dataclass
class UnifiedStream:
    """Sorted, densified, unified form of one weight vector.

    ``first_value`` is the smallest non-zero value (stored absolute,
    signed); ``deltas`` are the non-negative gaps between consecutive
    sorted unique values. ``counts[j]`` repetitions of unique value j sit
    at ``indexes[j]`` (ascending lane positions). Streams straight out of
    ``unify_weight_vector`` have strictly increasing values; the codec may
    insert delta-zero dummy entries when a repetition count overflows its
    field.
    """

    first_value: int | None
    deltas: list[int]
    counts: list[int]
    indexes: list[list[int]]

    @property
    def unique_count(self) -> int:
        return len(self.counts)

    def values(self) -> list[int]:
        """Absolute values of every entry (dummies repeat their predecessor)."""
        if self.first_value is None:
            return []
        out = [self.first_value]
        for d in self.deltas:
            out.append(out[-1] + d)
        return out

    @classmethod
    def empty(cls) -> "UnifiedStream":
        return cls(None, [], [], [])


def unify_weight_vector(vector: WeightVector | np.ndarray) -> UnifiedStream:
    """Densify, sort, and unify one weight vector."""
    values = vector.values if isinstance(vector, WeightVector) else np.asarray(vector, np.int64)
    nz = np.flatnonzero(values)
    if nz.size == 0:
        return UnifiedStream.empty()
    vals = values[nz]
    order = np.lexsort((nz, vals))
    sorted_vals = vals[order]
    sorted_idx = nz[order]
    uniques: list[int] = []
    counts: list[int] = []
    indexes: list[list[int]] = []
    for v, i in zip(sorted_vals.tolist(), sorted_idx.tolist()):
        if uniques and v == uniques[-1]:
            counts[-1] += 1
            indexes[-1].append(i)
        else:
            uniques.append(v)
            counts.append(1)
            indexes.append([i])
    deltas = [uniques[j + 1] - uniques[j] for j in range(len(uniques) - 1)]
    return UnifiedStream(uniques[0], deltas, counts, indexes)


def reconstruct_weight_vector(stream: UnifiedStream, length: int) -> np.ndarray:
    """Inverse of unify_weight_vector; unmentioned positions are zero."""
    out = np.zeros(length, np.int64)
    seen = np.zeros(length, bool)
    for value, count, idxs in zip(stream.values(), stream.counts, stream.indexes):
        if len(idxs) != count:
            raise CorruptionError(f"entry with count {count} carries {len(idxs)} indexes")
        for i in idxs:
            if not 0 <= i < length:
                raise CorruptionError(f"index {i} outside vector of length {length}")
            if seen[i]:
                raise CorruptionError(f"index {i} assigned by more than one entry")
            seen[i] = True
            out[i] = value
    return out
