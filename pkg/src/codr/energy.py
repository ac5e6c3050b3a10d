"""Energy estimation from access counters.

Costs are per bit moved (DRAM per byte) so designs with different encoded
widths compare on traffic, not port counts. The DRAM constant of 160 pJ/B
is the only grounded value; the shipped SRAM/RF/ALU numbers are
illustrative placeholders meant to be replaced per technology.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .errors import ConfigError
from .sim import MemoryCounter

DRAM_PJ_PER_BYTE = 160.0

PJ_TO_UJ = 1e-6


@dataclass(frozen=True)
class CostTable:
    """Access costs: SRAM/RF in pJ per bit, DRAM in pJ per byte, ALU and
    crossbar in pJ per operation."""

    weight_sram: float = 0.65
    input_sram: float = 0.65
    output_sram: float = 0.65
    input_rf: float = 0.08
    weight_rf: float = 0.08
    output_rf: float = 0.08
    dram_per_byte: float = DRAM_PJ_PER_BYTE
    alu_mult_pj: float = 3.1
    alu_add_pj: float = 0.1
    crossbar_per_transfer_pj: float = 0.6

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"cost {f.name} must be >= 0")

    def scaled(self, factor: float) -> "CostTable":
        return CostTable(**{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "CostTable":
        d = {k: v for k, v in d.items() if not k.startswith("_")}
        allowed = {f.name for f in fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown cost fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "CostTable":
        with open(path) as f:
            return cls.from_dict(json.load(f))


COMPONENTS = ("dram", "weight_sram", "input_sram", "output_sram",
              "input_rf", "weight_rf", "output_rf", "alu", "crossbar")


@dataclass
class EnergyReport:
    """Per-component energy in picojoules."""

    components_pj: dict[str, float]

    @property
    def total_pj(self) -> float:
        return sum(self.components_pj.values())

    @property
    def total_uj(self) -> float:
        return self.total_pj * PJ_TO_UJ

    def microjoules(self) -> dict[str, float]:
        return {k: v * PJ_TO_UJ for k, v in self.components_pj.items()}

    def percentages(self) -> dict[str, float]:
        total = self.total_pj
        if total == 0:
            return {k: 0.0 for k in self.components_pj}
        return {k: 100.0 * v / total for k, v in self.components_pj.items()}

    def to_dict(self) -> dict:
        return {"components_pj": dict(self.components_pj),
                "total_pj": self.total_pj,
                "total_uj": self.total_uj,
                "percent": self.percentages()}

    def csv_rows(self) -> list[tuple[str, float, float]]:
        rows = [(k, v, self.percentages()[k]) for k, v in self.components_pj.items()]
        rows.append(("total", self.total_pj, 100.0 if self.total_pj else 0.0))
        return rows


def energy_from_report(counters: MemoryCounter, table: CostTable) -> EnergyReport:
    comp: dict[str, float] = {}
    comp["dram"] = (counters.dram.read_bits + counters.dram.write_bits) / 8 * table.dram_per_byte
    for level in ("weight_sram", "input_sram", "output_sram",
                  "input_rf", "weight_rf", "output_rf"):
        lvl = counters.level(level)
        comp[level] = (lvl.read_bits + lvl.write_bits) * getattr(table, level)
    comp["alu"] = (counters.alu_mults * table.alu_mult_pj
                   + counters.alu_adds * table.alu_add_pj)
    comp["crossbar"] = counters.crossbar_transfers * table.crossbar_per_transfer_pj
    return EnergyReport(comp)


def compare_designs(a: dict[str, float], b: dict[str, float]) -> dict[str, float | None]:
    """Per-key b/a ratios; zero denominators report as None, not infinity."""
    out: dict[str, float | None] = {}
    for key in sorted(set(a) & set(b)):
        out[key] = None if a[key] == 0 else b[key] / a[key]
    return out
