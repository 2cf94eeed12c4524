"""Command-line front end.  Every subcommand emits plot-ready CSV or JSON.

Exit status: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bussim, measurements, scaling, workloads
from .presets import comm_from_dict, peak_presets, roofline_presets

TIMING_DEFAULTS = {"tb": "5ns", "td": "2ns", "tp": "10ns", "x": "0ps"}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _write(args, columns, rows, extra=None):
    """Rows as CSV (fixed column order) or JSON records (plus optional extra keys)."""
    if args.format == "json":
        payload = [dict(zip(columns, r)) for r in rows]
        if extra is not None:
            payload = dict(extra, rows=payload)
        text = json.dumps(payload, indent=2, sort_keys=extra is not None) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    _emit(args, text)


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _range(text, integer=False):
    """``lo:hi:count`` log-spaced, or a comma list."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            values = np.geomspace(float(lo), float(hi), int(count))
        else:
            values = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad range {text!r}: {exc}") from None
    if integer:
        return sorted({int(round(v)) for v in values})
    return [float(v) for v in values]


# -- law ---------------------------------------------------------------------

LAW_COLUMNS = (
    "n",
    "alpha",
    "one_minus_alpha",
    "amdahl_speedup",
    "amdahl_efficiency",
    "gustafson_speedup",
    "gustafson_efficiency",
    "gustafson_as_amdahl_alpha",
    "corrected_gustafson_time",
)


def cmd_law(args):
    n = args.n
    if args.alpha is not None:
        alpha = scaling.ParallelizationFraction(args.alpha)
    elif args.one_minus_alpha is not None:
        alpha = scaling.ParallelizationFraction.from_one_minus(args.one_minus_alpha)
    elif args.efficiency is not None:
        alpha = scaling.alpha_from_efficiency(args.efficiency, n)
    else:
        alpha = scaling.alpha_from_speedup(args.speedup, n)
    g2a = scaling.gustafson_to_amdahl(alpha, n).value if n >= 2 else alpha.value
    row = (
        n,
        alpha.value,
        alpha.one_minus,
        scaling.amdahl_speedup(alpha, n),
        scaling.amdahl_efficiency(alpha, n),
        scaling.gustafson_speedup(alpha, n),
        scaling.gustafson_efficiency(alpha, n),
        g2a,
        scaling.corrected_gustafson_time(alpha, n),
    )
    _write(args, LAW_COLUMNS, [row])


def cmd_surface(args):
    ns = _range(args.n_range, integer=True)
    us = _range(args.one_minus_range)
    fractions = [scaling.ParallelizationFraction.from_one_minus(u) for u in us]
    surf = measurements.efficiency_surface(fractions, ns)
    rows = [(r["alpha"], r["one_minus_alpha"], r["n"], r["efficiency"]) for r in surf.rows()]
    _write(args, ("alpha", "one_minus_alpha", "n", "efficiency"), rows)


# -- workload model args -----------------------------------------------------------


def _model(args):
    if args.preset:
        presets = peak_presets()
        if args.preset not in presets:
            raise InputError(f"unknown preset {args.preset!r}; choose from {', '.join(presets)}")
        p = presets[args.preset]
        return list(p.contributions), p.comm_model
    contribs = []
    for item in args.serial or []:
        label, _, value = item.partition("=")
        try:
            contribs.append(workloads.SerialFractionContribution(label, float(value)))
        except ValueError as exc:
            raise InputError(f"bad --serial {item!r}: {exc}") from None
    if args.comm == "none":
        comm = None
    else:
        comm = comm_from_dict({"kind": args.comm, "c": args.comm_c, "iterations": args.iterations})
    return contribs, comm


def _add_model_args(p):
    p.add_argument("--p-single", type=float, default=1e9, help="single-unit performance, op/s (default 1e9)")
    p.add_argument("--serial", action="append", metavar="LABEL=FRACTION", help="fixed serial-fraction contribution; repeatable")
    p.add_argument("--comm", choices=("none", "constant", "linear", "iterative"), default="none")
    p.add_argument("--comm-c", type=float, default=0.0, help="communication coefficient")
    p.add_argument("--iterations", type=int, default=1, help="iterations for --comm iterative")
    p.add_argument("--preset", help="calibrated preset (early_parallel, ipdata)")


def cmd_curve(args):
    contribs, comm = _model(args)
    ns = _range(args.n_range, integer=True)
    pts = workloads.performance_curve(args.p_single, contribs, comm, ns)
    rows = [(p.n, p.performance, p.performance / args.p_single, p.one_minus_alpha, p.saturated) for p in pts]
    _write(args, ("n", "performance", "gain", "one_minus_alpha", "saturated"), rows)


def cmd_peak(args):
    contribs, comm = _model(args)
    r = workloads.find_peak(args.p_single, contribs, comm, args.n_max)
    _write(args, ("n_peak", "performance", "gain", "at_boundary", "method", "note"), [(r.n_peak, r.performance, r.gain, r.at_boundary, r.method, r.note)])


def cmd_roofline(args):
    if args.preset:
        presets = roofline_presets()
        if args.preset not in presets:
            raise InputError(f"unknown roofline preset {args.preset!r}; choose from {', '.join(presets)}")
        preset = presets[args.preset]
        spec, note = preset.spec, preset.uncertainty
    else:
        if args.ceiling is None:
            raise InputError("roofline: give --preset or --ceiling")
        spec, note = workloads.RooflineSpec(args.coefficient, args.ceiling), None
    rows = [(x, workloads.roofline_gain(spec, x)) for x in _range(args.nominal)]
    extra = None
    if args.format == "json":
        extra = {"linear_coefficient": spec.linear_coefficient, "ceiling": spec.ceiling, "uncertainty": note}
    elif note:
        print(f"note: {note}", file=sys.stderr)
    _write(args, ("nominal", "gain"), rows, extra)


# -- simulate ----------------------------------------------------------------


def _read_config(path):
    cfg = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{i}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in TIMING_DEFAULTS:
            raise InputError(f"{path}:{i}: unknown key {key!r} (allowed: {', '.join(TIMING_DEFAULTS)})")
        cfg[key] = value.strip()
    return cfg


def cmd_simulate(args):
    values = dict(TIMING_DEFAULTS)
    if args.config:
        values.update(_read_config(args.config))
    for key in TIMING_DEFAULTS:
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    try:
        ps = {k: bussim.parse_duration(v) for k, v in values.items()}
        foreign_range = None
        if args.x_range:
            lo, _, hi = args.x_range.partition(":")
            foreign_range = (bussim.parse_duration(lo), bussim.parse_duration(hi))
        timing = bussim.BusTiming(ps["tb"], ps["td"], ps["tp"], ps["x"], foreign_range)
        grid = bussim.GridClock(bussim.parse_duration(args.grid_period), bussim.parse_duration(args.device_clock))
        topo = workloads.AnnTopology.parse(args.topology)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    sim = bussim.SimTopology(topo, args.wiring, per_layer_bus=args.per_layer_bus)
    report = bussim.simulate(
        sim,
        timing,
        grid,
        bussim.DropPolicy(args.max_busy_cycles),
        mode=args.mode,
        grid_sync=args.grid_sync,
        seed=args.seed,
        record_events=bool(args.events),
        max_neurons=args.max_neurons,
    )
    if args.events:
        Path(args.events).write_text(report.events_csv(), encoding="utf-8")
    if args.format == "json":
        _emit(args, report.to_json(per_neuron=not args.summary) + "\n")
    else:
        cols = ("stage", "senders", "receivers", "first_request_ps", "last_delivery_ps", "transfer_time_ps", "closed_form_ps")
        stages = report.to_dict(per_neuron=False)["stages"]
        _write(args, cols, [tuple(s[c] for c in cols) for s in stages])


# -- measurements ------------------------------------------------------------


def _ingest(path):
    if str(path).lower().endswith(".json"):
        return measurements.ingest_json(path)
    return measurements.ingest(path)


def _report_rejects(result):
    for r in result.rejects:
        print(f"reject row {r.row}: {r.reason}", file=sys.stderr)


def cmd_ingest(args):
    result = _ingest(args.source)
    _report_rejects(result)
    usable, failures = [], []
    for rec in result.records:
        try:
            measurements.derive(rec)
            usable.append(rec)
        except scaling.ScalingError as exc:
            failures.append(f"{rec.system_name} ({rec.year}, {rec.benchmark.value}): {exc}")
    for f in failures:
        print(f"cannot derive {f}", file=sys.stderr)
    if args.format == "json":
        _emit(args, measurements.metrics_json(usable) + "\n")
    else:
        buf = io.StringIO()
        measurements.write_metrics_csv(usable, buf)
        _emit(args, buf.getvalue())


def cmd_history(args):
    result = _ingest(args.source)
    _report_rejects(result)
    hist = measurements.gain_history(
        result.records, args.top_k, plateau_threshold=args.threshold, plateau_min_years=args.min_years
    )
    cols = ("benchmark", "year", "rank", "system_name", "gain")
    rows = [(b, r.year, r.rank, r.system_name, r.gain) for b, h in hist.items() for r in h.rows]
    extra = None
    if args.format == "json":
        extra = {
            "plateaus": {b: [list(p) for p in h.plateaus] for b, h in hist.items()},
            "short_years": {b: h.short_years for b, h in hist.items()},
            "normalized": {b: h.normalized for b, h in hist.items()},
        }
    else:
        for b, h in hist.items():
            spans = ", ".join(f"{a}-{z}" for a, z in h.plateaus) or "none"
            print(f"plateaus {b}: {spans}", file=sys.stderr)
    _write(args, cols, rows, extra)


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parscale", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(name, help, default_format="csv"):
        p = sub.add_parser(name, help=help)
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--out", metavar="FILE", help="write output to FILE instead of stdout")
        return p

    p = common("law", help="speedup, efficiency and alpha inversions")
    p.add_argument("--n", type=int, required=True, help="processor count")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=float)
    g.add_argument("--one-minus-alpha", type=float)
    g.add_argument("--efficiency", type=float, help="measured efficiency (R_max/R_peak)")
    g.add_argument("--speedup", type=float, help="measured speedup")
    p.set_defaults(func=cmd_law)

    p = common("surface", help="two-parameter efficiency surface")
    p.add_argument("--one-minus-range", default="1e-8:1e-1:8", help="1-alpha values, lo:hi:count (log) or list")
    p.add_argument("--n-range", default="2:1e7:8", help="processor counts, lo:hi:count (log) or list")
    p.set_defaults(func=cmd_surface)

    p = common("curve", help="payload performance versus N")
    _add_model_args(p)
    p.add_argument("--n-range", default="1:1e4:50")
    p.set_defaults(func=cmd_curve)

    p = common("peak", help="processor count of maximal payload performance")
    _add_model_args(p)
    p.add_argument("--n-max", type=int, default=10_000)
    p.set_defaults(func=cmd_peak)

    p = common("roofline", help="roofline gain evaluation")
    p.add_argument("--preset", help="hpl, hpcg or brain_simulation")
    p.add_argument("--coefficient", type=float, default=1.0)
    p.add_argument("--ceiling", type=float)
    p.add_argument("--nominal", default="1:1e8:9", help="nominal values, lo:hi:count (log) or list")
    p.set_defaults(func=cmd_roofline)

    p = common("simulate", help="shared-bus / direct-wiring event simulation", default_format="json")
    p.add_argument("--topology", required=True, help="n x m^h x k, e.g. 1x1000^2x1")
    p.add_argument("--wiring", choices=[w.value for w in bussim.Wiring], default="shared-bus")
    p.add_argument("--tb", help="bus reach/arbitration time, e.g. 5ns")
    p.add_argument("--td", help="physical delivery time")
    p.add_argument("--tp", help="payload processing time")
    p.add_argument("--x", help="foreign-traffic delay per acquisition")
    p.add_argument("--x-range", metavar="LO:HI", help="seeded uniform foreign delay instead of --x")
    p.add_argument("--mode", choices=("synchronized", "streaming"), default="synchronized")
    p.add_argument("--max-busy-cycles", type=int, help="drop queued messages after this many delivery cycles")
    p.add_argument("--grid-period", default="1ms")
    p.add_argument("--device-clock", default="1ns")
    p.add_argument("--grid-sync", action="store_true", help="start computations on grid ticks")
    p.add_argument("--per-layer-bus", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", metavar="FILE", help="export the event log as CSV")
    p.add_argument("--summary", action="store_true", help="omit per-neuron arrays from JSON")
    p.add_argument("--config", metavar="FILE", help="key=value timing defaults (tb, td, tp, x)")
    p.add_argument("--max-neurons", type=int, default=bussim.MAX_NEURONS)
    p.set_defaults(func=cmd_simulate)

    p = common("ingest", help="benchmark records to derived metrics")
    p.add_argument("source", help="CSV (or .json) file")
    p.set_defaults(func=cmd_ingest)

    p = common("history", help="performance-gain history and plateaus")
    p.add_argument("source", help="CSV (or .json) file")
    p.add_argument("--top-k", type=int, default=25)
    p.add_argument("--threshold", type=float, default=0.10, help="plateau relative spread")
    p.add_argument("--min-years", type=int, default=3)
    p.set_defaults(func=cmd_history)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (InputError, ValueError, measurements.SchemaError, bussim.SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - reported, not hidden
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
