import json

import pytest

from codr.energy import (CostTable, EnergyReport, compare_designs,
                         energy_from_report)
from codr.errors import ConfigError
from codr.sim import MemoryCounter


def counter_with(**kwargs):
    c = MemoryCounter()
    for key, value in kwargs.items():
        if "." in key:
            level, field = key.split(".")
            setattr(c.level(level), field, value)
        else:
            setattr(c, key, value)
    return c


class TestCostTable:
    def test_dram_default_is_160(self):
        assert CostTable().dram_per_byte == 160.0

    def test_negative_cost_rejected(self):
        with pytest.raises(ConfigError):
            CostTable(alu_mult_pj=-1)

    def test_json_round_trip(self, tmp_path):
        table = CostTable(weight_sram=0.5, alu_mult_pj=2.0)
        path = tmp_path / "costs.json"
        path.write_text(json.dumps(table.to_dict()))
        assert CostTable.from_json(path) == table

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            CostTable.from_dict({"sram": 1.0})


class TestEnergyFromReport:
    def test_dram_constant(self):
        c = counter_with(**{"dram.read_bits": 1000 * 8})
        report = energy_from_report(c, CostTable())
        assert report.components_pj["dram"] == 160_000.0

    def test_zero_counters_zero_energy(self):
        report = energy_from_report(MemoryCounter(), CostTable())
        assert report.total_pj == 0.0
        assert all(v == 0 for v in report.components_pj.values())

    def test_linearity_doubling(self):
        c = counter_with(**{"dram.read_bits": 800, "weight_sram.read_bits": 100,
                            "input_sram.write_bits": 50, "output_rf.read_bits": 10,
                            "alu_mults": 7, "alu_adds": 3, "crossbar_transfers": 2})
        d = counter_with(**{"dram.read_bits": 1600, "weight_sram.read_bits": 200,
                            "input_sram.write_bits": 100, "output_rf.read_bits": 20,
                            "alu_mults": 14, "alu_adds": 6, "crossbar_transfers": 4})
        table = CostTable()
        one = energy_from_report(c, table)
        two = energy_from_report(d, table)
        assert two.total_pj == pytest.approx(2 * one.total_pj)
        for key in one.components_pj:
            assert two.components_pj[key] == pytest.approx(2 * one.components_pj[key])

    def test_scaling_table_scales_total_but_not_ratios(self):
        c = counter_with(**{"dram.read_bits": 800, "weight_sram.read_bits": 300,
                            "alu_mults": 5})
        d = counter_with(**{"dram.read_bits": 1600, "weight_sram.read_bits": 900,
                            "alu_mults": 25})
        table = CostTable()
        scaled = table.scaled(3.0)
        a1, b1 = energy_from_report(c, table), energy_from_report(d, table)
        a2, b2 = energy_from_report(c, scaled), energy_from_report(d, scaled)
        assert a2.total_pj == pytest.approx(3 * a1.total_pj)
        r1 = compare_designs(a1.components_pj, b1.components_pj)
        r2 = compare_designs(a2.components_pj, b2.components_pj)
        for key in r1:
            if r1[key] is None:
                assert r2[key] is None
            else:
                assert r2[key] == pytest.approx(r1[key])

    def test_percentages_sum_to_100(self):
        c = counter_with(**{"dram.read_bits": 800, "weight_sram.read_bits": 300,
                            "alu_mults": 5, "crossbar_transfers": 9})
        report = energy_from_report(c, CostTable())
        assert sum(report.percentages().values()) == pytest.approx(100.0)

    def test_csv_rows_include_total(self):
        report = EnergyReport({"dram": 100.0, "alu": 50.0})
        rows = report.csv_rows()
        assert rows[-1][0] == "total"
        assert rows[-1][1] == 150.0

    def test_microjoule_conversion(self):
        report = EnergyReport({"dram": 160_000.0, "alu": 40_000.0})
        assert report.total_uj == pytest.approx(0.2)
        assert report.microjoules()["dram"] == pytest.approx(0.16)


class TestCompareDesigns:
    def test_identical_reports_ratio_one(self):
        a = {"dram": 5.0, "alu": 2.0}
        assert compare_designs(a, dict(a)) == {"alu": 1.0, "dram": 1.0}

    def test_half_gives_two(self):
        a = {"dram": 5.0, "alu": 2.0}
        b = {"dram": 10.0, "alu": 4.0}
        assert compare_designs(a, b) == {"alu": 2.0, "dram": 2.0}

    def test_zero_denominator_undefined(self):
        assert compare_designs({"dram": 0.0}, {"dram": 3.0}) == {"dram": None}
