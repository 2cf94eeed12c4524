import io
import json

import numpy as np
import pytest

from parscale.measurements import (
    CSV_COLUMNS,
    Benchmark,
    MeasurementRecord,
    RecordError,
    SchemaError,
    derive,
    efficiency_surface,
    find_plateaus,
    gain_history,
    ingest,
    ingest_json,
    load_fixture,
    metrics_json,
    surface_overlay,
    write_metrics_csv,
)
from parscale.scaling import ParallelizationFraction, amdahl_efficiency

HEADER = ",".join(CSV_COLUMNS) + "\n"


def src(*lines):
    return io.StringIO(HEADER + "".join(l + "\n" for l in lines))


class TestIngest:
    def test_empty_source(self):
        with pytest.raises(SchemaError):
            ingest(io.StringIO(""))

    def test_header_mismatch(self):
        with pytest.raises(SchemaError):
            ingest(io.StringIO("name,year\nx,2000\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest(tmp_path / "none.csv")

    def test_header_only(self):
        res = ingest(src())
        assert res.records == [] and res.rejects == []

    def test_rejects_carry_row_and_reason(self):
        res = ingest(
            src(
                "Good,2010,100,,90,100,HPL",
                "Super,2010,100,,120,100,HPL",
                "Zero,2010,0,,1,2,HPL",
                "Short,2010,100",
                "Bench,2010,100,,1,2,LINPACKISH",
                "Measured,2010,100,200,1,2,HPL",
                "Text,20x0,100,,1,2,HPL",
            )
        )
        assert len(res.records) == 1
        assert len(res.records) + len(res.rejects) == res.rows == 7
        # rows are numbered from 1 after the header
        reasons = {r.row: r.reason for r in res.rejects}
        assert reasons[2] == "efficiency > 1"
        assert reasons[3] == "cores < 1"
        assert "fields" in reasons[4]
        assert "benchmark" in reasons[5]
        assert "cores_measured" in reasons[6]
        assert "year" in reasons[7]

    def test_units(self):
        rec = ingest(src("A,2015,10,,5,10,HPCG")).records[0]
        assert rec.r_max == 5e9 and rec.benchmark is Benchmark.HPCG

    def test_json(self):
        payload = json.dumps(
            [
                {"system_name": "A", "year": 2001, "cores": 8, "cores_measured": None,
                 "r_max_gflops": 4, "r_peak_gflops": 8, "benchmark": "HPL"},
                {"system_name": "B"},
            ]
        )
        res = ingest_json(io.StringIO(payload))
        assert len(res.records) == 1 and res.rejects[0].row == 2
        with pytest.raises(SchemaError):
            ingest_json(io.StringIO("{}"))

    def test_fixture(self):
        res = load_fixture()
        assert len(res.records) == 85
        assert res.rejects == []
        assert {r.benchmark for r in res.records} == {Benchmark.HPL, Benchmark.HPCG}


class TestDerive:
    def test_taihulight(self):
        rec = MeasurementRecord("TaihuLight", 2016, 10649600, 93.0146e15, 125.436e15)
        m = derive(rec)
        assert m.efficiency == pytest.approx(0.7415, abs=1e-4)
        assert amdahl_efficiency(m.alpha_eff, rec.cores) == pytest.approx(m.efficiency, rel=1e-12)
        assert not m.used_measured_cores
        assert m.performance_gain is None

    def test_measured_cores_used(self):
        full = derive(MeasurementRecord("X", 2000, 1000, 5e11, 1e12))
        part = derive(MeasurementRecord("X", 2000, 1000, 5e11, 1e12, cores_measured=500))
        assert part.used_measured_cores
        assert part.one_minus_alpha > full.one_minus_alpha

    def test_invalid_record(self):
        with pytest.raises(RecordError):
            MeasurementRecord("", 2000, 1, 1, 1)

    def test_metric_outputs(self):
        recs = load_fixture().records[:3]
        buf = io.StringIO()
        write_metrics_csv(recs, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].endswith("efficiency,alpha_eff,one_minus_alpha")
        assert len(lines) == 4
        assert len(json.loads(metrics_json(recs))) == 3

    def test_fixture_round_trip(self):
        for rec in load_fixture().records:
            m = derive(rec)
            back = amdahl_efficiency(m.alpha_eff, rec.effective_cores)
            assert abs(back - m.efficiency) / m.efficiency <= 1e-12


class TestSurface:
    def test_values(self):
        s = efficiency_surface([ParallelizationFraction.from_one_minus(1e-7), 0.5], [2, 10**6])
        assert s.efficiency.shape == (2, 2)
        # frozen from 50-digit evaluation
        assert s.efficiency[0, 1] == pytest.approx(0.90909099173554470, rel=1e-14)
        assert s.efficiency[1, 0] == pytest.approx(2 / 3, rel=1e-15)
        assert len(list(s.rows())) == 4

    def test_monotone(self):
        s = efficiency_surface(np.linspace(0.9, 1.0, 11), np.geomspace(2, 1e7, 20).astype(int))
        assert (np.diff(s.efficiency, axis=1) <= 0).all()
        assert (np.diff(s.efficiency, axis=0) >= 0).all()

    def test_bad_input(self):
        with pytest.raises(ValueError):
            efficiency_surface([], [2])
        with pytest.raises(ValueError):
            efficiency_surface([0.5], [1])

    def test_overlay(self):
        ov = surface_overlay(load_fixture().records[:2])
        assert len(ov) == 2 and all(0 < e <= 1 for _, _, e in ov)


class TestHistory:
    def test_plateau_detection(self):
        series = {2000: 1.0, 2001: 1.05, 2002: 1.02, 2003: 5.0, 2004: 10.0, 2005: 10.5}
        assert find_plateaus(series) == [(2000, 2002)]
        assert find_plateaus(series, min_years=2) == [(2000, 2002), (2004, 2005)]
        assert find_plateaus({}) == []

    def test_gap_breaks_plateau(self):
        assert find_plateaus({2000: 1.0, 2001: 1.0, 2003: 1.0}) == []

    def test_fixture_history(self):
        hist = gain_history(load_fixture().records)
        hpl = hist["HPL"]
        assert hpl.normalized
        assert any(b < 2000 for _, b in hpl.plateaus)
        assert any(a > 2010 for a, _ in hpl.plateaus)
        assert hpl.short_years  # the fixture lists only the leaders of each year

    def test_top_k_validation(self):
        with pytest.raises(ValueError):
            gain_history([], top_k=0)

    def test_unnormalized_uses_rmax(self):
        recs = [MeasurementRecord("A", 2000, 4, 2e9, 4e9), MeasurementRecord("B", 2000, 4, 3e9, 4e9)]
        h = gain_history(recs, top_k=1)["HPL"]
        assert not h.normalized
        assert [(r.system_name, r.gain) for r in h.rows] == [("B", 3e9)]
