"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Tolerances are the stated ones and are not relaxed
when a check fails.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from parscale.bussim import (
    BusTiming,
    GridClock,
    SimTopology,
    Wiring,
    apparent_processing_ratio,
    grid_performance_bound,
    simulate,
)
from parscale.cli import main
from parscale.measurements import Benchmark, derive, gain_history, load_fixture
from parscale.presets import peak_presets
from parscale.scaling import (
    alpha_from_efficiency,
    alpha_from_speedup,
    amdahl_efficiency,
    amdahl_speedup,
    corrected_gustafson_time,
    gustafson_speedup,
    gustafson_to_amdahl,
)
from parscale.workloads import (
    AnnLayered,
    AnnTopology,
    accelerator_apparent_speedup,
    message_count,
    transfer_fraction_for_speedup,
)

RTOL = 1e-12
WIDTHS = [2**i for i in range(11)]
DEPTHS = [1, 2, 4]
TIMING = BusTiming(t_bus_reach=5000, t_delivery=2000, t_process=10000, t_foreign=1000)
DEVICE_TICK = GridClock().device_clock


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def test_criterion_01_inversion_roundtrips():
    rng = np.random.default_rng(20240101)
    alphas = rng.uniform(0.0, 1.0, 100_000)
    ns = rng.integers(2, 10**7, 100_000, endpoint=True)
    worst = dict.fromkeys(("a->E->a", "a->S->a", "E->a->E", "S->a->S"), 0.0)
    bad = dict.fromkeys(worst, 0)
    t0 = time.perf_counter()
    for a, n in zip(alphas.tolist(), ns.tolist()):
        e = amdahl_efficiency(a, n)
        s = amdahl_speedup(a, n)
        ae = alpha_from_efficiency(e, n)
        as_ = alpha_from_speedup(s, n)
        errs = {
            "a->E->a": rel(ae.value, a),
            "a->S->a": rel(as_.value, a),
            "E->a->E": rel(amdahl_efficiency(ae, n), e),
            "S->a->S": rel(amdahl_speedup(as_, n), s),
        }
        for k, v in errs.items():
            worst[k] = max(worst[k], v)
            bad[k] += v > RTOL
    elapsed = time.perf_counter() - t0
    ok = not any(bad.values()) and elapsed < 5.0
    detail = ", ".join(f"{k} worst {worst[k]:.1e} ({bad[k]} over)" for k in worst)
    verdict(1, ok, f"{detail}; {elapsed:.2f}s")


def test_criterion_02_law_equivalence():
    rng = np.random.default_rng(2)
    worst = 0.0
    for a, n in zip(rng.uniform(0, 1, 10_000).tolist(), rng.integers(2, 10**7, 10_000, endpoint=True).tolist()):
        worst = max(worst, rel(amdahl_speedup(gustafson_to_amdahl(a, n), n), gustafson_speedup(a, n)))
    verdict(2, worst <= RTOL, f"worst relative error {worst:.2e} over 10^4 pairs")


def test_criterion_03_corrected_gustafson():
    rng = np.random.default_rng(3)
    pairs = zip(rng.uniform(0, 1, 1000).tolist(), rng.integers(1, 10**7, 1000, endpoint=True).tolist())
    misses = sum(corrected_gustafson_time(a, n) != n for a, n in pairs)
    verdict(3, misses == 0, f"{misses} of 1000 pairs differ from N")


def _sweep():
    out = {}
    for h in DEPTHS:
        for m in WIDTHS:
            t0 = time.perf_counter()
            rep = simulate(SimTopology(AnnTopology(1, h, m, 1), Wiring.SHARED_BUS), TIMING, record_events=False)
            out[h, m] = (rep, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def sweep():
    return _sweep()


def test_criterion_04_simulator_closed_form(sweep):
    worst_dev, slowest = 0, 0.0
    for (h, m), (rep, dt) in sweep.items():
        slowest = max(slowest, dt)
        for st in rep.stages:
            expected = st.senders * 2 * TIMING.t_bus_reach + TIMING.t_delivery + TIMING.t_foreign
            worst_dev = max(worst_dev, abs(st.duration - expected))
    ok = worst_dev <= DEVICE_TICK and slowest < 10.0
    verdict(4, ok, f"{len(sweep)} runs, max deviation {worst_dev} ps, slowest run {slowest:.2f}s")


def test_criterion_05_linear_contention(sweep):
    r2s = []
    for h in DEPTHS:
        m = np.array(WIDTHS, dtype=float)
        y = np.array([apparent_processing_ratio(sweep[h, w][0]).max for w in WIDTHS])
        slope, icpt = np.polyfit(m, y, 1)
        resid = y - (slope * m + icpt)
        r2s.append(1 - (resid @ resid) / ((y - y.mean()) @ (y - y.mean())))
    verdict(5, min(r2s) > 0.999, "R^2 per depth " + ", ".join(f"h={h}: {r:.6f}" for h, r in zip(DEPTHS, r2s)))


def test_criterion_06_calibrated_peaks():
    early = peak_presets()["early_parallel"].find_peak()
    ip = peak_presets()["ipdata"].find_peak()
    ok = (
        20 <= early.n_peak <= 30
        and abs(early.gain - 8) <= 0.2 * 8
        and ip.gain <= 30
        and abs(ip.n_peak - 90) <= 0.2 * 90
    )
    verdict(
        6, ok, f"early_parallel N={early.n_peak} gain={early.gain:.3f}; ipdata N={ip.n_peak} gain={ip.gain:.3f}"
    )


def test_criterion_07_grid_clock_ratio():
    bound = grid_performance_bound(GridClock(grid_period=10**9, device_clock=10**3), 10**9)
    verdict(7, bound.clock_ratio == 10**6, f"clock ratio {bound.clock_ratio!r}")


def test_criterion_08_quadratic_messages():
    ratios = []
    for h in (2, 3, 5, 10, 100):
        for m in (1000, 4096, 10**4, 10**5, 10**6):
            c1 = message_count(AnnLayered(AnnTopology(1, h, m, 1)))
            c2 = message_count(AnnLayered(AnnTopology(1, h, 2 * m, 1)))
            ratios.append(c2 / c1)
    ok = all(3.9 < r <= 4.0 for r in ratios)
    verdict(8, ok, f"ratio range [{min(ratios):.6f}, {max(ratios):.6f}] over {len(ratios)} cases")


def test_criterion_09_measurement_pipeline():
    records = load_fixture().records
    worst = 0.0
    for r in records:
        d = derive(r)
        worst = max(worst, rel(amdahl_efficiency(d.alpha_eff, r.effective_cores), d.efficiency))
    identity_ok = worst <= RTOL

    hpl = {r.system_name: derive(r).efficiency for r in records if r.benchmark is Benchmark.HPL}
    hpcg = {r.system_name: derive(r).efficiency for r in records if r.benchmark is Benchmark.HPCG}
    ratios = {name: hpl[name] / e for name, e in hpcg.items() if name in hpl}
    best = max(ratios, key=ratios.get)
    bracket_ok = any(200 <= v <= 500 for v in ratios.values())

    plateaus = gain_history(records)["HPL"].plateaus
    plateau_ok = any(b < 2000 for _, b in plateaus) and any(a > 2010 for a, _ in plateaus)

    detail = (
        f"identity worst {worst:.1e} [{'ok' if identity_ok else 'bad'}]; "
        f"HPL/HPCG efficiency ratio max {ratios[best]:.1f} ({best}) over {len(ratios)} systems "
        f"[{'ok' if bracket_ok else 'outside 200-500'}]; "
        f"plateaus {plateaus} [{'ok' if plateau_ok else 'bad'}]"
    )
    verdict(9, identity_ok and bracket_ok and plateau_ok, detail)


def test_criterion_10_accelerator():
    k = 4.0
    below = all(
        accelerator_apparent_speedup(tt, 1.0, k) < k for tt in np.geomspace(1e-9, 1e3, 200).tolist()
    )
    f = transfer_fraction_for_speedup(3.01, k)
    s = accelerator_apparent_speedup(f, 1 - f, k)
    ok = below and abs(s - 3.01) <= 1e-6
    verdict(10, ok, f"S<k for all tested T_t: {below}; transfer fraction {f:.12f} gives S={s:.12f}")


def test_criterion_11_determinism(tmp_path, capsys):
    commands = [
        ["simulate", "--topology", "1x64^2x1", "--wiring", "shared-bus"],
        ["simulate", "--topology", "1x32^3x2", "--mode", "streaming", "--max-busy-cycles", "2", "--tp", "30ns"],
        ["simulate", "--topology", "2x16^2x1", "--x-range", "0ns:4ns", "--seed", "11", "--mode", "streaming"],
        ["simulate", "--topology", "1x8^4x1", "--wiring", "direct", "--grid-sync", "--grid-period", "100ns"],
    ]
    identical = 0
    for i, argv in enumerate(commands):
        outs = []
        for j in range(2):
            ev = tmp_path / f"ev{i}_{j}.csv"
            assert main(argv + ["--events", str(ev)]) == 0
            outs.append(capsys.readouterr().out.encode() + ev.read_bytes())
        identical += outs[0] == outs[1]
    verdict(11, identical == len(commands), f"{identical}/{len(commands)} commands byte-identical (report + events)")
