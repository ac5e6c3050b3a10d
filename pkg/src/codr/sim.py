"""Functional simulator of the compressed scalar-matrix dataflow.

Loop nest (outermost first): spatial output tiles, then output-channel
groups of t_pu * t_m channels (one Iteration per group), then input
channel groups of t_n (one Cycle each). Each Cycle loads t_n input tiles
into the shared Input RF; every PU's MPE n consumes the weight vector of
its (group, pu, channel) slot. An MPE walks the vector's unique entries
in sorted order, adds delta * input-tile into its matrix accumulator (so
the accumulator always holds value_j * tile), and routes one
t_ro x t_co window per stored index through the crossbar to the owning
APE. At the end of an Iteration each APE adds the bias, applies the
activation, saturates to W bits, and writes its output tile exactly once.

Counter semantics (bits are payload bits, events are counted as noted):

* dram: reads the encoded layer record plus the input features once and
  writes the output features once; events count whole transfers.
* weight_sram: written once with the exact structure bits, then re-read
  in full for every spatial tile (events: one per structure per vector).
* input_sram: written once per feature from DRAM; read once per valid
  feature per tile load (events per element).
* output_sram: written exactly once per output feature; read once per
  feature when draining to DRAM.
* input_rf: written per tile load, read once per element per multiply.
* weight_rf: loaded and consumed field by field; bits mirror the encoded
  structure bits, events count decoded fields.
* output_rf: accumulator traffic at 32 bits per element, read plus write
  per routed window element, read per element at drain.

alu_mults and alu_adds count element operations; crossbar_transfers
counts routed windows. Dummy entries are a storage artifact: the
simulator processes dummy-merged streams, so they cost storage and
weight traffic but no extra multiplies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conv import LayerShape, apply_activation, saturate
from .errors import ConfigError, CorruptionError
from .rle import EncodedLayer, decode_layer, vector_sizes
from .transform import TilingConfig, UnifiedStream, partition_into_tiles

ACCUMULATOR_BITS = 32

MEMORY_LEVELS = ("dram", "weight_sram", "input_sram", "output_sram",
                 "input_rf", "weight_rf", "output_rf")


@dataclass
class LevelCounter:
    read_events: int = 0
    write_events: int = 0
    read_bits: int = 0
    write_bits: int = 0

    def as_dict(self) -> dict:
        return {"read_events": self.read_events, "write_events": self.write_events,
                "read_bits": self.read_bits, "write_bits": self.write_bits}


@dataclass
class MemoryCounter:
    dram: LevelCounter = field(default_factory=LevelCounter)
    weight_sram: LevelCounter = field(default_factory=LevelCounter)
    input_sram: LevelCounter = field(default_factory=LevelCounter)
    output_sram: LevelCounter = field(default_factory=LevelCounter)
    input_rf: LevelCounter = field(default_factory=LevelCounter)
    weight_rf: LevelCounter = field(default_factory=LevelCounter)
    output_rf: LevelCounter = field(default_factory=LevelCounter)
    alu_mults: int = 0
    alu_adds: int = 0
    crossbar_transfers: int = 0

    def level(self, name: str) -> LevelCounter:
        return getattr(self, name)

    def as_dict(self) -> dict:
        d = {name: self.level(name).as_dict() for name in MEMORY_LEVELS}
        d["alu_mults"] = self.alu_mults
        d["alu_adds"] = self.alu_adds
        d["crossbar_transfers"] = self.crossbar_transfers
        return d

    def sram_bits(self) -> int:
        total = 0
        for name in ("weight_sram", "input_sram", "output_sram"):
            lvl = self.level(name)
            total += lvl.read_bits + lvl.write_bits
        return total


@dataclass
class AddressTrace:
    """Optional per-address event collection for access-law verification."""

    input_reads: dict = field(default_factory=dict)
    output_writes: dict = field(default_factory=dict)

    def count_input(self, n: int, r: int, c: int) -> None:
        key = (n, r, c)
        self.input_reads[key] = self.input_reads.get(key, 0) + 1

    def count_output(self, m: int, r: int, c: int) -> None:
        key = (m, r, c)
        self.output_writes[key] = self.output_writes.get(key, 0) + 1


@dataclass
class PUState:
    """Per-PU working state within one Iteration."""

    mlp_acc: np.ndarray        # (t_ri, t_ci) running value_j * tile
    running_value: int
    ape: np.ndarray            # (t_m, tile_rows, tile_cols) output accumulators


@dataclass
class SimReport:
    output: np.ndarray
    counters: MemoryCounter
    iterations: int
    cycles: int
    mult_passes: int
    layer_id: int = 0

    def to_dict(self) -> dict:
        return {"layer_id": self.layer_id,
                "output_shape": list(self.output.shape),
                "iterations": self.iterations,
                "cycles": self.cycles,
                "mult_passes": self.mult_passes,
                "counters": self.counters.as_dict()}


def load_input_tile(inp: np.ndarray, channel: int, row0_out: int, col0_out: int,
                    shape: LayerShape, cfg: TilingConfig, counters: MemoryCounter,
                    bit_width: int, trace: AddressTrace | None = None) -> np.ndarray:
    """Copy one t_ri x t_ci input window (halo included) into a tile buffer.

    The window origin is the padded-coordinate position of the tile's first
    output; pad cells and out-of-range cells read as zero and are not
    counted as SRAM traffic.
    """
    t_ri, t_ci = cfg.t_ri, cfg.t_ci
    r_origin = row0_out * shape.stride - shape.pad
    c_origin = col0_out * shape.stride - shape.pad
    buf = np.zeros((t_ri, t_ci), np.int64)
    r_lo, r_hi = max(0, r_origin), min(shape.in_rows, r_origin + t_ri)
    c_lo, c_hi = max(0, c_origin), min(shape.in_cols, c_origin + t_ci)
    if r_lo < r_hi and c_lo < c_hi:
        buf[r_lo - r_origin:r_hi - r_origin,
            c_lo - c_origin:c_hi - c_origin] = inp[channel, r_lo:r_hi, c_lo:c_hi]
        n_valid = (r_hi - r_lo) * (c_hi - c_lo)
        counters.input_sram.read_events += n_valid
        counters.input_sram.read_bits += n_valid * bit_width
        counters.input_rf.write_events += n_valid
        counters.input_rf.write_bits += n_valid * bit_width
        if trace is not None:
            for r in range(r_lo, r_hi):
                for c in range(c_lo, c_hi):
                    trace.count_input(channel, r, c)
    return buf


@dataclass
class _VectorPlan:
    """Pre-decoded per-vector data reused across spatial tiles."""

    stream: UnifiedStream
    multipliers: list[int]               # first value, then the deltas
    routes: list[list[tuple[int, int, int]]]  # per entry: (m_local, kr, kc)
    delta_bits: int
    count_bits: int
    index_bits: int
    n_fields: int


def _prepare_vectors(streams: list[UnifiedStream], encoded: EncodedLayer,
                     shape: LayerShape, cfg: TilingConfig) -> list[_VectorPlan]:
    kk = shape.k_rows * shape.k_cols
    plans = []
    for s in streams:
        mults = []
        routes = []
        if s.unique_count:
            mults.append(s.first_value)
            mults.extend(s.deltas)
            for group in s.indexes:
                decomposed = []
                for idx in group:
                    m_local, rem = divmod(idx, kk)
                    kr, kc = divmod(rem, shape.k_cols)
                    if m_local >= cfg.t_m:
                        raise CorruptionError(f"index {idx} addresses lane beyond t_m={cfg.t_m}")
                    decomposed.append((m_local, kr, kc))
                routes.append(decomposed)
        sizes = vector_sizes(s, encoded.params, encoded.vec_len)
        plans.append(_VectorPlan(s, mults, routes, sizes.delta_bits,
                                 sizes.count_bits, sizes.index_bits, sizes.n_fields))
    return plans


def mpe_process_weight_vector(plan_vec: _VectorPlan, tile: np.ndarray, pu: PUState,
                              tile_rows: int, tile_cols: int, stride: int,
                              counters: MemoryCounter, bit_width: int) -> None:
    """Run one weight vector against a loaded input tile.

    After entry j the matrix accumulator holds value_j * tile exactly;
    each stored index routes one window of it to the owning APE.
    """
    t_ri, t_ci = tile.shape
    w = bit_width
    pu.mlp_acc[:] = 0
    pu.running_value = 0
    for j, mult in enumerate(plan_vec.multipliers):
        pu.mlp_acc += mult * tile
        pu.running_value += mult
        counters.alu_mults += t_ri * t_ci
        counters.alu_adds += t_ri * t_ci
        counters.input_rf.read_events += t_ri * t_ci
        counters.input_rf.read_bits += t_ri * t_ci * w
        window_elems = tile_rows * tile_cols
        for (m_local, kr, kc) in plan_vec.routes[j]:
            window = pu.mlp_acc[kr:kr + stride * tile_rows:stride,
                                kc:kc + stride * tile_cols:stride]
            pu.ape[m_local, :tile_rows, :tile_cols] += window
            counters.crossbar_transfers += 1
            counters.alu_adds += window_elems
            counters.output_rf.read_events += window_elems
            counters.output_rf.read_bits += window_elems * ACCUMULATOR_BITS
            counters.output_rf.write_events += window_elems
            counters.output_rf.write_bits += window_elems * ACCUMULATOR_BITS
    # weight traffic: the vector's structures stream from SRAM through the RF
    total_bits = plan_vec.delta_bits + plan_vec.count_bits + plan_vec.index_bits
    counters.weight_sram.read_events += 3
    counters.weight_sram.read_bits += total_bits
    counters.weight_rf.write_events += 3
    counters.weight_rf.write_bits += total_bits
    counters.weight_rf.read_events += plan_vec.n_fields
    counters.weight_rf.read_bits += total_bits


def ape_accumulate_and_post(acc: np.ndarray, bias: int, activation: str,
                            bit_width: int) -> np.ndarray:
    """Finalize one output tile: bias, activation, saturation."""
    return saturate(apply_activation(acc + bias, activation), bit_width)


def drain_outputs(counters: MemoryCounter, encoded: EncodedLayer,
                  shape: LayerShape, bit_width: int) -> None:
    """Tally the layer's DRAM traffic: weights and inputs in, outputs out."""
    feature_bytes = bit_width // 8
    input_bytes = shape.n_in * shape.in_rows * shape.in_cols * feature_bytes
    output_bytes = shape.m_out * shape.out_rows * shape.out_cols * feature_bytes
    counters.dram.read_events += 2
    counters.dram.read_bits += (encoded.record_bytes + input_bytes) * 8
    counters.dram.write_events += 1
    counters.dram.write_bits += output_bytes * 8


IO_SRAM_CAPACITY_BYTES = 250 * 1024
WEIGHT_SRAM_CAPACITY_BYTES = 200 * 1024


def validate_capacity(shape: LayerShape, cfg: TilingConfig, encoded_bits: int,
                      bit_width: int,
                      io_capacity: int = IO_SRAM_CAPACITY_BYTES,
                      weight_capacity: int = WEIGHT_SRAM_CAPACITY_BYTES) -> None:
    """Reject layers whose Iteration working set cannot stay on chip.

    One Iteration touches every input channel's t_ri x t_ci tile and
    produces t_pu * t_m output tiles of t_ro x t_co features; the encoded
    layer must fit the weight SRAM it streams from. Spills are never
    modeled, so oversized configurations are refused up front.
    """
    feature_bytes = bit_width // 8
    input_bytes = shape.n_in * cfg.t_ri * cfg.t_ci * feature_bytes
    output_bytes = cfg.t_pu * cfg.t_m * cfg.t_ro * cfg.t_co * feature_bytes
    if input_bytes + output_bytes > io_capacity:
        raise ConfigError(
            f"iteration working set ({input_bytes} input + {output_bytes} output "
            f"bytes) exceeds the {io_capacity}-byte input/output SRAM")
    weight_bytes = (encoded_bits + 7) // 8
    if weight_bytes > weight_capacity:
        raise ConfigError(
            f"encoded layer ({weight_bytes} bytes) exceeds the "
            f"{weight_capacity}-byte weight SRAM")


def run_layer(encoded: EncodedLayer, inp: np.ndarray, shape: LayerShape,
              cfg: TilingConfig, bias: np.ndarray | None = None,
              activation: str = "none", trace: AddressTrace | None = None) -> SimReport:
    """Simulate one layer; output is bit-exact against the direct oracle."""
    plan = partition_into_tiles(shape, cfg)
    if encoded.vec_len != cfg.vector_length(shape):
        raise ConfigError(f"encoded vec_len {encoded.vec_len} does not match "
                          f"config length {cfg.vector_length(shape)}")
    if encoded.n_vectors != plan.n_vectors:
        raise ConfigError(f"encoded layer has {encoded.n_vectors} vectors, "
                          f"plan expects {plan.n_vectors}")
    inp = np.asarray(inp, dtype=np.int64)
    if inp.shape != (shape.n_in, shape.in_rows, shape.in_cols):
        raise ConfigError(f"input shape {inp.shape} does not match layer "
                          f"{(shape.n_in, shape.in_rows, shape.in_cols)}")
    if bias is None:
        bias = np.zeros(shape.m_out, np.int64)
    bias = np.asarray(bias, dtype=np.int64)
    if bias.shape != (shape.m_out,):
        raise ConfigError(f"bias shape {bias.shape} does not match {shape.m_out} channels")
    bit_width = encoded.params.w_full
    validate_capacity(shape, cfg, encoded.total_bits, bit_width)

    counters = MemoryCounter()
    streams = decode_layer(encoded)
    vectors = _prepare_vectors(streams, encoded, shape, cfg)

    # fill traffic: encoded weights and input features arrive on-chip once
    counters.weight_sram.write_events += 3
    counters.weight_sram.write_bits += encoded.total_bits
    n_features = shape.n_in * shape.in_rows * shape.in_cols
    counters.input_sram.write_events += n_features
    counters.input_sram.write_bits += n_features * bit_width

    out = np.zeros((shape.m_out, shape.out_rows, shape.out_cols), np.int64)
    iterations = 0
    cycles = 0
    mult_passes = 0
    pass_factor = -(-cfg.t_ri * cfg.t_ci // cfg.mults_per_pu)
    tile_buffers = [None] * cfg.t_n

    for tile in plan.spatial_tiles:
        for g in range(plan.n_channel_groups):
            iterations += 1
            pus = [PUState(np.zeros((cfg.t_ri, cfg.t_ci), np.int64), 0,
                           np.zeros((cfg.t_m, tile.rows, tile.cols), np.int64))
                   for _ in range(cfg.t_pu)]
            for igroup in range(plan.n_input_groups):
                cycles += 1
                channels = plan.input_group_channels(igroup)
                for n_local, n in channels:
                    tile_buffers[n_local] = load_input_tile(
                        inp, n, tile.row0, tile.col0, shape, cfg, counters,
                        bit_width, trace)
                for pu_i in range(cfg.t_pu):
                    for n_local, n in channels:
                        vec = vectors[plan.vector_index(g, pu_i, n)]
                        mpe_process_weight_vector(vec, tile_buffers[n_local], pus[pu_i],
                                                  tile.rows, tile.cols, shape.stride,
                                                  counters, bit_width)
                        mult_passes += len(vec.multipliers) * pass_factor
            for pu_i in range(cfg.t_pu):
                for m_local, m in plan.group_channels(g, pu_i):
                    final = ape_accumulate_and_post(pus[pu_i].ape[m_local],
                                                    int(bias[m]), activation, bit_width)
                    out[m, tile.row0:tile.row0 + tile.rows,
                        tile.col0:tile.col0 + tile.cols] = final
                    n_el = tile.rows * tile.cols
                    counters.output_rf.read_events += n_el
                    counters.output_rf.read_bits += n_el * ACCUMULATOR_BITS
                    counters.output_sram.write_events += n_el
                    counters.output_sram.write_bits += n_el * bit_width
                    if trace is not None:
                        for r in range(tile.rows):
                            for c in range(tile.cols):
                                trace.count_output(m, tile.row0 + r, tile.col0 + c)

    # outputs leave for DRAM once
    n_out = shape.m_out * shape.out_rows * shape.out_cols
    counters.output_sram.read_events += n_out
    counters.output_sram.read_bits += n_out * bit_width
    drain_outputs(counters, encoded, shape, bit_width)
    return SimReport(out, counters, iterations, cycles, mult_passes, encoded.layer_id)
