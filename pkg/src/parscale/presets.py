"""Calibration presets shipped with the package (see ``data/calibration.json``)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from .workloads import (
    CommModel,
    ConstantComm,
    IterativeComm,
    LinearComm,
    PeakResult,
    RooflineSpec,
    SerialFractionContribution,
    find_peak,
    roofline_from_measurement,
)


@dataclass(frozen=True)
class PeakPreset:
    name: str
    description: str
    contributions: tuple
    comm_model: CommModel
    target: dict

    def find_peak(self, n_max: int = 10_000, single_performance: float = 1.0) -> PeakResult:
        return find_peak(single_performance, self.contributions, self.comm_model, n_max)


@dataclass(frozen=True)
class RooflinePreset:
    name: str
    description: str
    spec: RooflineSpec
    uncertainty: Optional[str] = None


def comm_from_dict(d: dict) -> CommModel:
    kind = d["kind"]
    if kind == "constant":
        return ConstantComm(float(d["c"]))
    if kind == "linear":
        return LinearComm(float(d["c"]))
    if kind == "iterative":
        return IterativeComm(float(d["c"]), int(d["iterations"]))
    raise ValueError(f"unknown communication model kind {kind!r}")


@lru_cache(maxsize=None)
def load_calibration() -> dict:
    text = resources.files("parscale").joinpath("data/calibration.json").read_text(encoding="utf-8")
    return json.loads(text)


def peak_presets() -> dict[str, PeakPreset]:
    out = {}
    for name, d in load_calibration()["peak_presets"].items():
        contribs = tuple(SerialFractionContribution(c["label"], float(c["one_minus_alpha"])) for c in d["contributions"])
        out[name] = PeakPreset(name, d["description"], contribs, comm_from_dict(d["comm"]), d["target"])
    return out


def roofline_presets() -> dict[str, RooflinePreset]:
    out = {}
    for name, d in load_calibration()["rooflines"].items():
        if "measurement" in d:
            m = d["measurement"]
            spec = roofline_from_measurement(m["r_max_gflops"] / m["r_peak_gflops"], int(m["cores"]))
        else:
            spec = RooflineSpec(float(d["linear_coefficient"]), float(d["ceiling"]))
        out[name] = RooflinePreset(name, d["description"], spec, d.get("uncertainty"))
    return out
