"""Workload communication models, payload-performance curves, peaks and rooflines."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .scaling import ParallelizationFraction, ScalingError, SystemShape, payload_performance

# counts beyond this no longer fit the signed 64-bit columns of the outputs
MAX_COUNT = 2**63 - 1


class SaturationError(ScalingError):
    """The composed serial fraction reached 1: the system is fully serialized."""


@dataclass(frozen=True)
class AnnTopology:
    n_inputs: int
    hidden_layers: int
    hidden_width: int
    n_outputs: int

    def __post_init__(self):
        for name in ("n_inputs", "hidden_layers", "hidden_width", "n_outputs"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @classmethod
    def parse(cls, text: str) -> "AnnTopology":
        """Parse the ``n x m^h x k`` shorthand, e.g. ``1x1000^2x1``; ``^h`` defaults to 1."""
        m = re.fullmatch(r"\s*(\d+)\s*x\s*(\d+)\s*(?:\^\s*(\d+))?\s*x\s*(\d+)\s*", text)
        if m is None:
            raise ValueError(f"topology {text!r} does not match 'n x m^h x k'")
        n, width, depth, k = m.groups()
        return cls(int(n), int(depth or 1), int(width), int(k))

    @property
    def n_neurons(self) -> int:
        return self.n_inputs + self.hidden_layers * self.hidden_width + self.n_outputs

    def layer_sizes(self) -> list[int]:
        return [self.n_inputs] + [self.hidden_width] * self.hidden_layers + [self.n_outputs]

    def __str__(self):
        return f"{self.n_inputs}x{self.hidden_width}^{self.hidden_layers}x{self.n_outputs}"


@dataclass(frozen=True)
class HplLike:
    fellow_cores: int


@dataclass(frozen=True)
class HpcgLike:
    fellow_cores: int
    iterations: int


@dataclass(frozen=True)
class AnnLayered:
    topology: AnnTopology


WorkloadKind = Union[HplLike, HpcgLike, AnnLayered]


def _check_kind(kind: WorkloadKind):
    if isinstance(kind, HplLike):
        counts = [kind.fellow_cores]
    elif isinstance(kind, HpcgLike):
        counts = [kind.fellow_cores, kind.iterations]
    elif isinstance(kind, AnnLayered):
        return
    else:
        raise TypeError(f"unknown workload kind {kind!r}")
    if any(isinstance(c, bool) or int(c) != c or c < 1 for c in counts):
        raise ValueError(f"workload counts must be positive integers: {kind!r}")


def message_count(kind: WorkloadKind) -> int:
    """Number of point-to-point messages one run of the workload issues."""
    _check_kind(kind)
    if isinstance(kind, HplLike):
        count = 2 * kind.fellow_cores
    elif isinstance(kind, HpcgLike):
        count = 2 * kind.iterations * kind.fellow_cores
    else:
        t = kind.topology
        m = t.hidden_width
        count = t.n_inputs * m + (t.hidden_layers - 1) * m * m + m * t.n_outputs
    if count > MAX_COUNT:
        raise OverflowError(f"message count {count} exceeds the 64-bit range")
    return count


@dataclass(frozen=True)
class OrderDescriptor:
    """Leading-order execution cost ``coefficient * repeat^repeat_power * m^m_power``.

    ``repeat`` is the iteration count for HPCG-like work and the hidden-layer
    count for layered networks.  Orders are compared, not converted to time.
    """

    coefficient: int
    m_power: int
    repeat_power: int = 0
    repeat_symbol: str = ""

    def evaluate(self, m: int, repeat: int = 1) -> int:
        return self.coefficient * repeat**self.repeat_power * m**self.m_power

    def __str__(self):
        parts = [] if self.coefficient == 1 else [str(self.coefficient)]
        if self.repeat_power:
            parts.append(self.repeat_symbol if self.repeat_power == 1 else f"{self.repeat_symbol}^{self.repeat_power}")
        if self.m_power:
            parts.append("m" if self.m_power == 1 else f"m^{self.m_power}")
        return "O(" + ("*".join(parts) or "1") + ")"


def execution_order(kind: WorkloadKind) -> OrderDescriptor:
    _check_kind(kind)
    if isinstance(kind, HplLike):
        return OrderDescriptor(2, 1)
    if isinstance(kind, HpcgLike):
        return OrderDescriptor(2, 1, 1, "N")
    return OrderDescriptor(1, 2, 1, "h")


@dataclass(frozen=True)
class SerialFractionContribution:
    label: str
    one_minus_alpha: float

    def __post_init__(self):
        if not (0.0 <= self.one_minus_alpha <= 1.0):
            raise ValueError(f"serial fraction of {self.label!r} must lie in [0, 1]")


CommModel = Callable[[int], float]


@dataclass(frozen=True)
class ConstantComm:
    """Communication serial fraction independent of N."""

    c: float

    def __call__(self, n):
        if np.ndim(n):
            return np.full(np.shape(n), self.c)
        return self.c


@dataclass(frozen=True)
class LinearComm:
    """``c*N``: the initiating node issues and collects one message per unit (HPL-like)."""

    c: float

    def __call__(self, n):
        return self.c * np.asarray(n, dtype=float) if np.ndim(n) else self.c * n


@dataclass(frozen=True)
class IterativeComm:
    """``c*N*iterations``: the HPL pattern repeated every iteration (HPCG-like)."""

    c: float
    iterations: int

    def __call__(self, n):
        k = self.c * self.iterations
        return k * np.asarray(n, dtype=float) if np.ndim(n) else k * n


def _no_comm(n):
    return np.zeros(np.shape(n)) if np.ndim(n) else 0.0


def _base_serial(contributions: Iterable[SerialFractionContribution]) -> float:
    return math.fsum(c.one_minus_alpha for c in contributions)


def effective_alpha(
    base: Sequence[SerialFractionContribution],
    n: int,
    comm_model: CommModel | None = None,
) -> ParallelizationFraction:
    """Compose serial-fraction contributions: the fractions of wall time add."""
    comm = (comm_model or _no_comm)(n)
    if comm < 0:
        raise ValueError(f"communication model returned a negative fraction at N={n}")
    total = _base_serial(base) + comm
    if total >= 1.0:
        raise SaturationError(f"serial fraction {total:.6g} >= 1 at N={n}")
    return ParallelizationFraction.from_one_minus(total)


@dataclass(frozen=True)
class CurvePoint:
    n: int
    performance: float
    one_minus_alpha: float
    saturated: bool = False


def performance_curve(
    shape_base: SystemShape | float,
    contributions: Sequence[SerialFractionContribution],
    comm_model: CommModel | None,
    n_values: Sequence[int],
) -> list[CurvePoint]:
    """Payload performance at each N; saturated points carry zero performance."""
    p_single = shape_base.single_performance if isinstance(shape_base, SystemShape) else float(shape_base)
    if any(b < a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be sorted ascending")
    out = []
    for n in n_values:
        try:
            alpha = effective_alpha(contributions, n, comm_model)
        except SaturationError:
            out.append(CurvePoint(int(n), 0.0, 1.0, True))
            continue
        perf = payload_performance(SystemShape(int(n), p_single), alpha)
        out.append(CurvePoint(int(n), perf, alpha.one_minus))
    return out


def _gain_array(base: float, comm_model: CommModel, n: np.ndarray) -> np.ndarray:
    """Payload gain ``P/P_single`` over an integer array; saturated points give 0."""
    try:
        comm = np.asarray(comm_model(n), dtype=float)
        if comm.shape != n.shape:
            raise TypeError
    except (TypeError, ValueError):
        comm = np.array([comm_model(int(x)) for x in n], dtype=float)
    u = base + comm
    nf = n.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = nf / (1.0 + (nf - 1.0) * u)
    return np.where(u >= 1.0, 0.0, gain)


@dataclass(frozen=True)
class PeakResult:
    n_peak: int
    performance: float
    gain: float
    at_boundary: bool
    method: str

    @property
    def note(self) -> str:
        return "no interior peak in range" if self.at_boundary else "interior peak"


# dense scans up to this many points are cheap enough to always be exact
_SCAN_CHUNK = 1 << 20


def _scan(base, comm_model, lo, hi):
    best_n, best_g = lo, -1.0
    for start in range(lo, hi + 1, _SCAN_CHUNK):
        n = np.arange(start, min(start + _SCAN_CHUNK, hi + 1), dtype=np.int64)
        g = _gain_array(base, comm_model, n)
        i = int(np.argmax(g))
        if g[i] > best_g:
            best_n, best_g = int(n[i]), float(g[i])
    return best_n, best_g


def find_peak(
    single_performance: float,
    contributions: Sequence[SerialFractionContribution],
    comm_model: CommModel | None,
    n_max: int,
    *,
    sample_points: int = 4096,
) -> PeakResult:
    """Exact integer argmax of payload performance over ``1..n_max``.

    A geometric sample of the curve is checked for unimodality (at most one
    sign change of the discrete differences).  Unimodal curves are refined by
    integer ternary search inside the bracket around the sampled maximum;
    anything else falls back to a full scan.  Ties resolve to the smallest N.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    comm_model = comm_model or _no_comm
    base = _base_serial(contributions)

    grid = np.unique(np.geomspace(1, n_max, num=min(sample_points, n_max)).round().astype(np.int64))
    g = _gain_array(base, comm_model, grid)
    d = np.sign(np.diff(g))
    d = d[d != 0]
    sign_changes = int(np.count_nonzero(d[1:] != d[:-1]))

    if n_max <= _SCAN_CHUNK or sign_changes > 1 or (len(d) and d[0] < 0):
        n_peak, gain = _scan(base, comm_model, 1, n_max)
        method = "scan"
    else:
        i = int(np.argmax(g))
        lo = int(grid[max(i - 1, 0)])
        hi = int(grid[min(i + 1, len(grid) - 1)])
        f = lambda x: float(_gain_array(base, comm_model, np.array([x], dtype=np.int64))[0])
        while hi - lo > 64:
            m1 = lo + (hi - lo) // 3
            m2 = hi - (hi - lo) // 3
            if f(m1) < f(m2):
                lo = m1 + 1
            else:
                hi = m2
        n_peak, gain = _scan(base, comm_model, lo, hi)
        method = "ternary"
    return PeakResult(n_peak, gain * single_performance, gain, n_peak == n_max, method)


@dataclass(frozen=True)
class RooflineSpec:
    linear_coefficient: float
    ceiling: float

    def __post_init__(self):
        if not self.linear_coefficient > 0 or not self.ceiling > 0:
            raise ValueError("roofline coefficient and ceiling must be positive")

    @property
    def knee(self) -> float:
        """Nominal value where the linear part meets the ceiling."""
        return self.ceiling / self.linear_coefficient


def roofline_gain(spec: RooflineSpec, nominal: float) -> float:
    if nominal < 0:
        raise ValueError("nominal must be >= 0")
    return min(spec.linear_coefficient * nominal, spec.ceiling)


def roofline_from_measurement(efficiency: float, n: int) -> RooflineSpec:
    """Roofline whose ceiling is the saturation gain ``1/(1-alpha_eff)`` of one measurement."""
    from .scaling import alpha_from_efficiency

    return RooflineSpec(1.0, 1.0 / alpha_from_efficiency(efficiency, n).one_minus)


def accelerator_apparent_speedup(t_transfer: float, t_process: float, k_process: float) -> float:
    """Apparent speedup when only the processing part gets ``k_process`` times faster.

    ``(T_t + T_p) / (T_t + T_p/k)``; the transfer time is untouched.
    """
    if not t_transfer > 0 or not t_process > 0:
        raise ValueError("transfer and processing times must be positive")
    if not k_process > 0:
        raise ValueError("k_process must be positive")
    return (t_transfer + t_process) / (t_transfer + t_process / k_process)


def transfer_fraction_for_speedup(target: float, k_process: float, *, tol: float = 1e-15) -> float:
    """Bisect for the transfer share ``T_t/(T_t+T_p)`` at which the speedup equals ``target``."""
    if not 1.0 < target < k_process:
        raise ValueError("target speedup must lie strictly between 1 and k_process")

    def speedup(f):
        return accelerator_apparent_speedup(f, 1.0 - f, k_process)

    lo, hi = 0.0, 1.0  # speedup falls from k to 1 as the fraction grows
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= 0.0 or mid >= 1.0:
            break
        if speedup(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
