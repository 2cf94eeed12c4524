"""Benchmark records (TOP500 style): ingestion, derived metrics, surface and history tables."""

from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .scaling import ParallelizationFraction, alpha_from_efficiency, as_fraction

GFLOPS = 1e9

CSV_COLUMNS = (
    "system_name",
    "year",
    "cores",
    "cores_measured",
    "r_max_gflops",
    "r_peak_gflops",
    "benchmark",
)
OPTIONAL_COLUMNS = ("single_gflops",)
METRIC_COLUMNS = ("efficiency", "alpha_eff", "one_minus_alpha")


class SchemaError(ValueError):
    """The source is unreadable or its header does not match the schema."""


class RecordError(ValueError):
    """A single record violates an invariant; ``str(err)`` is the reject reason."""


class Benchmark(str, Enum):
    HPL = "HPL"
    HPCG = "HPCG"
    HPL_AI = "HPL-AI"
    OTHER = "OTHER"


@dataclass(frozen=True)
class MeasurementRecord:
    """One benchmark result.  Performances are in flop/s."""

    system_name: str
    year: int
    cores: int
    r_max: float
    r_peak: float
    benchmark: Benchmark = Benchmark.HPL
    cores_measured: Optional[int] = None
    single_performance: Optional[float] = None
    benchmark_label: Optional[str] = None

    def __post_init__(self):
        if not self.system_name:
            raise RecordError("empty system_name")
        if not 1950 <= self.year <= 2100:
            raise RecordError(f"implausible year {self.year}")
        if self.cores < 1:
            raise RecordError("cores < 1")
        if self.cores_measured is not None and not 1 <= self.cores_measured <= self.cores:
            raise RecordError("cores_measured outside [1, cores]")
        if not self.r_max > 0 or not self.r_peak > 0:
            raise RecordError("r_max and r_peak must be positive")
        if self.r_max > self.r_peak:
            raise RecordError("efficiency > 1")
        if self.single_performance is not None and not self.single_performance > 0:
            raise RecordError("single performance must be positive")
        object.__setattr__(self, "benchmark", Benchmark(self.benchmark))

    @property
    def effective_cores(self) -> int:
        return self.cores_measured if self.cores_measured is not None else self.cores


@dataclass(frozen=True)
class DerivedMetrics:
    efficiency: float
    alpha_eff: ParallelizationFraction
    one_minus_alpha: float
    performance_gain: Optional[float]
    used_measured_cores: bool


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str
    raw: str = ""


@dataclass
class IngestResult:
    records: list = field(default_factory=list)
    rejects: list = field(default_factory=list)
    rows: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read {source}: {exc}") from exc
    return source


def _parse_int(text, what):
    try:
        v = float(text)
    except ValueError:
        raise RecordError(f"{what} is not a number: {text!r}") from None
    if v != int(v):
        raise RecordError(f"{what} is not an integer: {text!r}")
    return int(v)


def _parse_float(text, what):
    try:
        return float(text)
    except ValueError:
        raise RecordError(f"{what} is not a number: {text!r}") from None


def record_from_mapping(row: dict) -> MeasurementRecord:
    """Build a record from one CSV/JSON row keyed by the schema's column names."""
    bench = str(row.get("benchmark", "")).strip()
    if bench.upper() not in {b.value for b in Benchmark}:
        raise RecordError(f"unknown benchmark {bench!r}")
    cm = row.get("cores_measured")
    sp = row.get("single_gflops")
    return MeasurementRecord(
        system_name=str(row.get("system_name", "")).strip(),
        year=_parse_int(row["year"], "year"),
        cores=_parse_int(row["cores"], "cores"),
        cores_measured=None if cm in (None, "") else _parse_int(cm, "cores_measured"),
        r_max=_parse_float(row["r_max_gflops"], "r_max_gflops") * GFLOPS,
        r_peak=_parse_float(row["r_peak_gflops"], "r_peak_gflops") * GFLOPS,
        benchmark=Benchmark(bench.upper()),
        single_performance=None if sp in (None, "") else _parse_float(sp, "single_gflops") * GFLOPS,
    )


def ingest(source) -> IngestResult:
    """Parse a CSV source (path or text stream).

    Invalid rows are collected in ``rejects`` with their 1-based data row
    number and reason; they never abort the run.  A header mismatch does.
    """
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("empty source: header required") from None
        except (UnicodeDecodeError, csv.Error) as exc:
            raise SchemaError(f"unreadable source: {exc}") from exc
        if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS or any(
            h not in OPTIONAL_COLUMNS for h in header[len(CSV_COLUMNS):]
        ):
            raise SchemaError(f"header mismatch: expected {','.join(CSV_COLUMNS)}[,single_gflops], got {','.join(header)}")
        result = IngestResult()
        for i, cells in enumerate(reader, start=1):
            if not cells:
                continue
            result.rows += 1
            raw = ",".join(cells)
            if len(cells) != len(header):
                result.rejects.append(Reject(i, f"expected {len(header)} fields, got {len(cells)}", raw))
                continue
            try:
                result.records.append(record_from_mapping(dict(zip(header, cells))))
            except (RecordError, KeyError) as exc:
                result.rejects.append(Reject(i, str(exc), raw))
        return result
    finally:
        if fh is not source:
            fh.close()


def ingest_json(source) -> IngestResult:
    """JSON counterpart of :func:`ingest`: a list of objects with the CSV keys."""
    fh = _open_text(source)
    try:
        data = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"unreadable JSON: {exc}") from exc
    finally:
        if fh is not source:
            fh.close()
    if not isinstance(data, list):
        raise SchemaError("JSON source must be a list of records")
    result = IngestResult()
    for i, row in enumerate(data, start=1):
        result.rows += 1
        try:
            if not isinstance(row, dict):
                raise RecordError("record is not an object")
            missing = [c for c in CSV_COLUMNS if c not in row and c != "cores_measured"]
            if missing:
                raise RecordError(f"missing keys {missing}")
            result.records.append(record_from_mapping({k: "" if v is None else str(v) for k, v in row.items()}))
        except RecordError as exc:
            result.rejects.append(Reject(i, str(exc), json.dumps(row)))
    return result


def fixture_path():
    """Curated public TOP500/HPCG rows shipped with the package."""
    return resources.files("parscale").joinpath("data/top500_fixture.csv")


def load_fixture() -> IngestResult:
    with resources.as_file(fixture_path()) as p:
        return ingest(p)


def derive(record: MeasurementRecord) -> DerivedMetrics:
    """Efficiency, effective alpha and payload gain of one record.

    Uses ``cores_measured`` when present.  Superlinear or sub-serial
    efficiencies propagate from :func:`alpha_from_efficiency`.
    """
    e = record.r_max / record.r_peak
    n = record.effective_cores
    alpha = alpha_from_efficiency(e, n)
    gain = record.r_max / record.single_performance if record.single_performance else None
    return DerivedMetrics(e, alpha, alpha.one_minus, gain, record.cores_measured is not None)


def metrics_rows(records: Sequence[MeasurementRecord]) -> list[dict]:
    rows = []
    for r in records:
        m = derive(r)
        rows.append(
            {
                "system_name": r.system_name,
                "year": r.year,
                "cores": r.cores,
                "cores_measured": r.cores_measured,
                "r_max_gflops": r.r_max / GFLOPS,
                "r_peak_gflops": r.r_peak / GFLOPS,
                "benchmark": r.benchmark.value,
                "efficiency": m.efficiency,
                "alpha_eff": m.alpha_eff.value,
                "one_minus_alpha": m.one_minus_alpha,
            }
        )
    return rows


def write_metrics_csv(records: Sequence[MeasurementRecord], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS + METRIC_COLUMNS)
    for row in metrics_rows(records):
        w.writerow(["" if row[c] is None else _fmt(row[c]) for c in CSV_COLUMNS + METRIC_COLUMNS])


def metrics_json(records: Sequence[MeasurementRecord]) -> str:
    return json.dumps(metrics_rows(records), indent=2)


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class EfficiencySurface:
    """``efficiency[i, j]`` is the efficiency at ``one_minus_alpha[i]`` and ``n[j]``."""

    one_minus_alpha: np.ndarray
    n: np.ndarray
    efficiency: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.one_minus_alpha

    def __iter__(self):
        for i, u in enumerate(self.one_minus_alpha):
            for j, n in enumerate(self.n):
                yield (1.0 - u, int(n), float(self.efficiency[i, j]))

    def rows(self):
        for i, u in enumerate(self.one_minus_alpha):
            for j, n in enumerate(self.n):
                yield {"alpha": 1.0 - float(u), "one_minus_alpha": float(u), "n": int(n), "efficiency": float(self.efficiency[i, j])}


def efficiency_surface(alpha_range: Iterable, n_range: Iterable[int]) -> EfficiencySurface:
    """Amdahl efficiency on an (alpha, N) grid.

    ``alpha_range`` items may be floats or :class:`ParallelizationFraction`;
    pass fractions built with ``from_one_minus`` for the 1 - alpha ~ 1e-8 regime.
    """
    u = np.array([as_fraction(a).one_minus for a in alpha_range], dtype=float)
    n = np.array([int(x) for x in n_range], dtype=np.int64)
    if u.size == 0 or n.size == 0:
        raise ValueError("alpha_range and n_range must be nonempty")
    if (n < 2).any():
        raise ValueError("surface needs N >= 2")
    eff = 1.0 / (1.0 + np.outer(u, (n - 1).astype(float)))
    return EfficiencySurface(u, n, eff)


def surface_overlay(records: Sequence[MeasurementRecord]) -> list[tuple]:
    """``(alpha_eff, N, E)`` triples of measured records for plotting on the surface."""
    out = []
    for r in records:
        m = derive(r)
        out.append((m.alpha_eff, r.effective_cores, m.efficiency))
    return out


@dataclass(frozen=True)
class HistoryRow:
    year: int
    rank: int
    system_name: str
    gain: float


@dataclass
class GainHistory:
    benchmark: str
    rows: list
    plateaus: list
    short_years: list
    normalized: bool

    def max_gain_by_year(self) -> dict:
        out = {}
        for r in self.rows:
            out[r.year] = max(out.get(r.year, 0.0), r.gain)
        return out


def find_plateaus(series: dict, threshold: float = 0.10, min_years: int = 3) -> list[tuple[int, int]]:
    """Maximal runs of consecutive years whose values stay within ``threshold`` relative spread."""
    years = sorted(series)
    spans = []
    i = 0
    while i < len(years):
        lo = hi = series[years[i]]
        j = i
        while j + 1 < len(years) and years[j + 1] == years[j] + 1:
            v = series[years[j + 1]]
            nlo, nhi = min(lo, v), max(hi, v)
            if (nhi - nlo) >= threshold * nlo:
                break
            lo, hi = nlo, nhi
            j += 1
        if years[j] - years[i] + 1 >= min_years:
            spans.append((years[i], years[j]))
            i = j + 1
        else:
            i += 1
    return spans


def gain_history(
    records: Sequence[MeasurementRecord],
    top_k: int = 25,
    *,
    plateau_threshold: float = 0.10,
    plateau_min_years: int = 3,
) -> dict[str, GainHistory]:
    """Per benchmark and year, the ``top_k`` systems by R_max with their performance gain.

    The gain is ``r_max / single_performance`` when every record carries a
    single-unit performance, otherwise plain R_max.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    by_bench = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_bench[r.benchmark.value][r.year].append(r)
    out = {}
    for bench, years in sorted(by_bench.items()):
        normalized = all(r.single_performance for recs in years.values() for r in recs)
        rows, short = [], []
        for year in sorted(years):
            ranked = sorted(years[year], key=lambda r: (-r.r_max, r.system_name))[:top_k]
            if len(ranked) < top_k:
                short.append(year)
            for rank, r in enumerate(ranked, start=1):
                gain = r.r_max / r.single_performance if normalized else r.r_max
                rows.append(HistoryRow(year, rank, r.system_name, gain))
        hist = GainHistory(bench, rows, [], short, normalized)
        hist.plateaus = find_plateaus(hist.max_gain_by_year(), plateau_threshold, plateau_min_years)
        out[bench] = hist
    return out
