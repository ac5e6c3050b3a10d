"""Command-line driver: synthetic weights, encode, simulate, verify, sweep.

Layer configs are JSON: {"bit_width": 8, "layers": [{...LayerShape fields,
optional "activation"}]}. Tiling configs mirror TilingConfig fields.
Weight files hold alternating weight/bias tensor records per layer; input
files hold one record per layer. Exit status is 0 on success, 1 on a
verification mismatch, 2 on a validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import conv, rle, sim, synth, tensorio, transform
from .energy import CostTable, energy_from_report
from .errors import ConfigError, CorruptionError

DEFAULT_DENSITIES = (1.0, 0.55, 0.40, 0.25)
DEFAULT_UNIQUES = (256, 64, 16)
DESIGNS = ("codr", "ucnn", "scnn")


@dataclass
class RunConfig:
    layers: list[conv.LayerShape]
    activations: list[str]
    bit_width: int
    tiling: transform.TilingConfig
    costs: CostTable
    out_dir: Path | None
    fmt: str

    def validate(self) -> None:
        for i, shape in enumerate(self.layers):
            try:
                self.tiling.validate_for(shape)
            except ConfigError as e:
                raise ConfigError(f"layer {i}: {e}") from None


def load_run_config(args) -> RunConfig:
    with open(args.layers) as f:
        cfg = json.load(f)
    if "layers" not in cfg or not cfg["layers"]:
        raise ConfigError(f"{args.layers}: no layers defined")
    bit_width = cfg.get("bit_width", 8)
    if bit_width not in (8, 16):
        raise ConfigError(f"bit_width must be 8 or 16, got {bit_width}")
    layers, activations = [], []
    for entry in cfg["layers"]:
        activation = entry.pop("activation", "none")
        if activation not in conv.ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        layers.append(conv.LayerShape.from_dict(entry))
        activations.append(activation)
    tiling = transform.TilingConfig()
    if getattr(args, "tiling", None):
        with open(args.tiling) as f:
            tiling = transform.TilingConfig.from_dict(json.load(f))
    costs = CostTable()
    if getattr(args, "costs", None):
        costs = CostTable.from_json(args.costs)
    out_dir = Path(args.out) if getattr(args, "out", None) else None
    run = RunConfig(layers, activations, bit_width, tiling, costs,
                    out_dir, getattr(args, "format", "json"))
    run.validate()
    return run


def _read_weight_file(path, run: RunConfig) -> list[conv.WeightTensor]:
    """Read alternating weight/bias records; quantize float records."""
    records = tensorio.read_tensors(path)
    if len(records) != 2 * len(run.layers):
        raise ConfigError(f"{path}: expected {2 * len(run.layers)} tensor records "
                          f"(weights and bias per layer), found {len(records)}")
    tensors = []
    for i, shape in enumerate(run.layers):
        values, bias = records[2 * i], records[2 * i + 1]
        if values.dtype == np.float32:
            values, _ = conv.quantize_tensor(values, run.bit_width)
        if bias.dtype == np.float32:
            bias, _ = conv.quantize_tensor(bias, run.bit_width)
        wt = conv.WeightTensor(values, bias)
        expect = (shape.m_out, shape.n_in, shape.k_rows, shape.k_cols)
        if wt.values.shape != expect:
            raise ConfigError(f"layer {i}: weight shape {wt.values.shape} != {expect}")
        conv.check_range(wt.values, run.bit_width, f"layer {i} weights")
        conv.check_range(wt.bias, run.bit_width, f"layer {i} bias")
        tensors.append(wt)
    return tensors


def _read_input_file(path, run: RunConfig) -> list[np.ndarray]:
    records = tensorio.read_tensors(path)
    if len(records) != len(run.layers):
        raise ConfigError(f"{path}: expected {len(run.layers)} input records, "
                          f"found {len(records)}")
    out = []
    for i, (shape, rec) in enumerate(zip(run.layers, records)):
        if rec.dtype == np.float32:
            rec, _ = conv.quantize_tensor(rec, run.bit_width)
        arr = np.asarray(rec, np.int64)
        if arr.shape != (shape.n_in, shape.in_rows, shape.in_cols):
            raise ConfigError(f"layer {i}: input shape {arr.shape} != "
                              f"{(shape.n_in, shape.in_rows, shape.in_cols)}")
        conv.check_range(arr, run.bit_width, f"layer {i} inputs")
        out.append(arr)
    return out


def _encode_all(run: RunConfig, tensors: list[conv.WeightTensor]):
    """Tile, unify, choose parameters, and encode every layer."""
    encoded, stream_sets = [], []
    for i, (shape, wt) in enumerate(zip(run.layers, tensors)):
        plan = transform.partition_into_tiles(shape, run.tiling)
        vectors = transform.build_weight_vectors(wt, plan)
        streams = [transform.unify_weight_vector(v) for v in vectors]
        vec_len = run.tiling.vector_length(shape)
        params = rle.choose_encoding_params(streams, run.bit_width, vec_len)
        encoded.append(rle.encode_layer(streams, params, vec_len, layer_id=i))
        stream_sets.append(streams)
    return encoded, stream_sets


def _compression_row(run: RunConfig, i: int, encoded: rle.EncodedLayer,
                     streams, weights: conv.WeightTensor) -> dict:
    shape = run.layers[i]
    vec_len = run.tiling.vector_length(shape)
    dense = shape.weight_count * run.bit_width
    return {
        "layer": i,
        "dense_bits": dense,
        "codr_bits": encoded.total_bits,
        "ucnn_bits": rle.size_ucnn_baseline(streams, run.bit_width, vec_len),
        "scnn_bits": rle.size_scnn_baseline(weights.values, run.bit_width),
        "codr_bits_per_weight": round(encoded.total_bits / shape.weight_count, 4),
        "k_delta": encoded.params.k_delta,
        "k_count": encoded.params.k_count,
        "k_index": encoded.params.k_index,
    }


def _write_report(path: Path, rows: list[dict], fmt: str) -> None:
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


def cmd_gen_weights(args) -> int:
    run = load_run_config(args)
    spec = synth.SyntheticSpec(density=args.density, unique_count=args.unique,
                               seed=args.seed, bit_width=run.bit_width)
    if run.out_dir is None:
        raise ConfigError("gen-weights requires --out")
    tensors = synth.gen_synthetic_weights(spec, run.layers)
    inputs = [synth.synth_input_features(shape, args.seed, i, run.bit_width)
              for i, shape in enumerate(run.layers)]
    run.out_dir.mkdir(parents=True, exist_ok=True)
    dtype = tensorio.dtype_for_bit_width(run.bit_width)
    with open(run.out_dir / "weights.tnsr", "wb") as f:
        for wt in tensors:
            tensorio.write_tensor(f, wt.values.astype(dtype))
            tensorio.write_tensor(f, wt.bias.astype(dtype))
    with open(run.out_dir / "inputs.tnsr", "wb") as f:
        for arr in inputs:
            tensorio.write_tensor(f, arr.astype(dtype))
    print(f"wrote {run.out_dir / 'weights.tnsr'} and {run.out_dir / 'inputs.tnsr'}")
    return 0


def cmd_encode(args) -> int:
    run = load_run_config(args)
    if run.out_dir is None:
        raise ConfigError("encode requires --out")
    tensors = _read_weight_file(args.weights, run)
    encoded, stream_sets = _encode_all(run, tensors)
    rows = [_compression_row(run, i, enc, streams, wt)
            for i, (enc, streams, wt) in enumerate(zip(encoded, stream_sets, tensors))]
    run.out_dir.mkdir(parents=True, exist_ok=True)
    rle.write_codr_file(run.out_dir / "weights.codr", encoded)
    ext = "json" if run.fmt == "json" else "csv"
    _write_report(run.out_dir / f"encode_report.{ext}", rows, run.fmt)
    for row in rows:
        print(f"layer {row['layer']}: codr {row['codr_bits']} bits, "
              f"ucnn {row['ucnn_bits']}, scnn {row['scnn_bits']}, dense {row['dense_bits']}")
    return 0


def cmd_simulate(args) -> int:
    run = load_run_config(args)
    if run.out_dir is None:
        raise ConfigError("simulate requires --out")
    meta = [(run.tiling.vector_length(shape),
             transform.partition_into_tiles(shape, run.tiling).n_vectors)
            for shape in run.layers]
    encoded = rle.read_codr_file(args.weights, meta)
    if len(encoded) != len(run.layers):
        raise ConfigError(f"{args.weights}: {len(encoded)} layers, config has {len(run.layers)}")
    inputs = _read_input_file(args.input, run)
    reports = []
    for i, (shape, enc, inp) in enumerate(zip(run.layers, encoded, inputs)):
        reports.append(sim.run_layer(enc, inp, shape, run.tiling,
                                     activation=run.activations[i]))
    run.out_dir.mkdir(parents=True, exist_ok=True)
    totals = {
        "iterations": sum(r.iterations for r in reports),
        "cycles": sum(r.cycles for r in reports),
        "mult_passes": sum(r.mult_passes for r in reports),
        "alu_mults": sum(r.counters.alu_mults for r in reports),
        "alu_adds": sum(r.counters.alu_adds for r in reports),
        "crossbar_transfers": sum(r.counters.crossbar_transfers for r in reports),
        "sram_bits": sum(r.counters.sram_bits() for r in reports),
        "dram_bytes": sum((r.counters.dram.read_bits + r.counters.dram.write_bits) // 8
                          for r in reports),
    }
    sim_doc = {"layers": [r.to_dict() for r in reports], "totals": totals}
    (run.out_dir / "sim_report.json").write_text(
        json.dumps(sim_doc, indent=2, sort_keys=True) + "\n")
    energies = [energy_from_report(r.counters, run.costs) for r in reports]
    if run.fmt == "json":
        doc = [e.to_dict() for e in energies]
        (run.out_dir / "energy_report.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        with open(run.out_dir / "energy_report.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["layer", "component", "energy_pj", "percent"])
            for i, e in enumerate(energies):
                for name, pj, pct in e.csv_rows():
                    writer.writerow([i, name, f"{pj:.6f}", f"{pct:.3f}"])
    dtype = tensorio.dtype_for_bit_width(run.bit_width)
    with open(run.out_dir / "output.tnsr", "wb") as f:
        for r in reports:
            tensorio.write_tensor(f, r.output.astype(dtype))
    total = sum(e.total_pj for e in energies)
    print(f"simulated {len(reports)} layer(s); total energy {total:.1f} pJ")
    return 0


def cmd_verify(args) -> int:
    run = load_run_config(args)
    tensors = _read_weight_file(args.weights, run)
    inputs = _read_input_file(args.input, run)
    prebuilt = run.out_dir / "weights.codr" if run.out_dir else None
    try:
        if prebuilt is not None and prebuilt.exists():
            # verify an existing encoded artifact against the raw weights
            meta = [(run.tiling.vector_length(shape),
                     transform.partition_into_tiles(shape, run.tiling).n_vectors)
                    for shape in run.layers]
            encoded = rle.read_codr_file(prebuilt, meta)
        else:
            encoded, _ = _encode_all(run, tensors)
        for i, (shape, enc, inp, wt) in enumerate(zip(run.layers, encoded, inputs, tensors)):
            report = sim.run_layer(enc, inp, shape, run.tiling, bias=wt.bias,
                                   activation=run.activations[i])
            expect = conv.reference_output(inp, wt, shape, run.activations[i],
                                           run.bit_width)
            if not np.array_equal(report.output, expect):
                diff = np.argwhere(report.output != expect)
                m, r, c = diff[0]
                print(f"FAIL layer {i}: first mismatch at channel {m} row {r} col {c}: "
                      f"got {report.output[m, r, c]}, expected {expect[m, r, c]} "
                      f"({len(diff)} mismatching features)")
                return 1
    except CorruptionError as e:
        print(f"FAIL: corrupt encoded data: {e}")
        return 1
    print(f"PASS: {len(run.layers)} layer(s) match the direct convolution exactly")
    return 0


def _parse_grid(text: str | None, default: tuple, cast) -> list:
    if text is None:
        return list(default)
    return [cast(part) for part in text.split(",") if part]


def cmd_sweep(args) -> int:
    run = load_run_config(args)
    if run.out_dir is None:
        raise ConfigError("sweep requires --out")
    densities = _parse_grid(args.density, DEFAULT_DENSITIES, float)
    uniques = _parse_grid(args.unique, DEFAULT_UNIQUES, int)
    rows = []
    for d in densities:
        for u in uniques:
            spec = synth.SyntheticSpec(density=d, unique_count=u, seed=args.seed,
                                       bit_width=run.bit_width)
            tensors = synth.gen_synthetic_weights(spec, run.layers)
            encoded, stream_sets = _encode_all(run, tensors)
            for i, shape in enumerate(run.layers):
                inp = synth.synth_input_features(shape, args.seed, i, run.bit_width)
                report = sim.run_layer(encoded[i], inp, shape, run.tiling,
                                       activation=run.activations[i])
                energy = energy_from_report(report.counters, run.costs)
                vec_len = run.tiling.vector_length(shape)
                sizes = {
                    "codr": encoded[i].total_bits,
                    "ucnn": rle.size_ucnn_baseline(stream_sets[i], run.bit_width, vec_len),
                    "scnn": rle.size_scnn_baseline(tensors[i].values, run.bit_width),
                }
                for design in DESIGNS:
                    row = {"layer": i, "density": d, "unique": u, "design": design,
                           "bits": sizes[design],
                           "bits_per_weight": round(sizes[design] / shape.weight_count, 4),
                           "sram_bits": "", "dram_bytes": "", "alu_mults": "",
                           "alu_adds": "", "energy_pj": ""}
                    if design == "codr":
                        row.update({
                            "sram_bits": report.counters.sram_bits(),
                            "dram_bytes": (report.counters.dram.read_bits
                                           + report.counters.dram.write_bits) // 8,
                            "alu_mults": report.counters.alu_mults,
                            "alu_adds": report.counters.alu_adds,
                            "energy_pj": round(energy.total_pj, 3),
                        })
                    rows.append(row)
    rows.sort(key=lambda r: (r["layer"], -r["density"], -r["unique"],
                             DESIGNS.index(r["design"])))
    run.out_dir.mkdir(parents=True, exist_ok=True)
    if run.fmt == "json":
        (run.out_dir / "sweep.json").write_text(
            json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        with open(run.out_dir / "sweep.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    print(f"wrote {len(rows)} sweep rows to {run.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codr",
                                     description="Compressed-CNN codec and dataflow simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, weights=False, inp=False, out=True, grid=False, fmt=True):
        p.add_argument("--layers", required=True, help="layer config JSON")
        p.add_argument("--tiling", help="tiling config JSON (defaults built in)")
        p.add_argument("--costs", help="cost table JSON")
        if weights:
            p.add_argument("--weights", required=True, help="tensor or .codr file")
        if inp:
            p.add_argument("--input", required=True, help="input features tensor file")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if grid:
            p.add_argument("--seed", type=int, default=0, help="rng seed")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("gen-weights", help="generate seeded synthetic weights and inputs")
    common(p, grid=True, fmt=False)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--unique", type=int, default=256)
    p.set_defaults(func=cmd_gen_weights)

    p = sub.add_parser("encode", help="compress weights into a .codr file")
    common(p, weights=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("simulate", help="run the dataflow on a .codr file")
    common(p, weights=True, inp=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check the full pipeline against direct convolution")
    common(p, weights=True, inp=True, out=False, fmt=False)
    p.add_argument("--out", help="directory holding a weights.codr to verify "
                                 "(otherwise weights are encoded in memory)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="density/unique-count grid sweep")
    common(p, grid=True)
    p.add_argument("--density", help="comma-separated density list")
    p.add_argument("--unique", help="comma-separated unique-count list")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorruptionError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
