"""Scaling laws (Amdahl, Gustafson) and their inversions.

All formulas are written in terms of the serial fraction ``1 - alpha`` so that
supercomputer-scale inputs (``1 - alpha`` around 1e-7 and below) do not lose
precision to cancellation.  ``N*(1-alpha) + alpha`` is evaluated as
``1 + (N-1)*(1-alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

# relative tolerance of every round-trip identity in this package
ROUNDTRIP_RTOL = 1e-12

# slack (in ulps of 1.0) accepted when a measured value sits on a domain edge
_EDGE_SLACK = 8 * 2.0 ** -52


class ScalingError(ValueError):
    """Input outside the domain of a scaling formula."""


class SuperlinearError(ScalingError):
    """Efficiency above 1 (or speedup above N): a superlinear measurement."""


class InconsistentMeasurementError(ScalingError):
    """Measurement implies a negative parallel fraction (E < 1/N or S < 1)."""


@dataclass(frozen=True)
class ParallelizationFraction:
    """Parallelizable fraction ``alpha`` of the total time.

    ``one_minus`` holds ``1 - alpha`` with full relative precision; build with
    :meth:`from_one_minus` when the serial fraction is the known quantity.
    """

    value: float
    one_minus: float = field(default=math.nan, compare=False)

    def __post_init__(self):
        v = float(self.value)
        u = float(self.one_minus)
        if math.isnan(u):
            u = 1.0 - v
        if not (0.0 <= v <= 1.0) or not (0.0 <= u <= 1.0):
            raise ScalingError(f"alpha must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "one_minus", u)

    @classmethod
    def from_one_minus(cls, one_minus: float) -> "ParallelizationFraction":
        u = float(one_minus)
        if not (0.0 <= u <= 1.0):
            raise ScalingError(f"1 - alpha must lie in [0, 1], got {one_minus!r}")
        return cls(1.0 - u, u)

    @property
    def alpha(self) -> float:
        return self.value

    def __float__(self) -> float:
        return self.value


AlphaLike = Union[ParallelizationFraction, float]


def as_fraction(alpha: AlphaLike) -> ParallelizationFraction:
    if isinstance(alpha, ParallelizationFraction):
        return alpha
    return ParallelizationFraction(alpha)


@dataclass(frozen=True)
class SystemShape:
    """Processor count and single-unit performance (operations/second)."""

    n_processors: int
    single_performance: float

    def __post_init__(self):
        if int(self.n_processors) != self.n_processors or self.n_processors < 1:
            raise ScalingError(f"n_processors must be a positive integer, got {self.n_processors!r}")
        if not self.single_performance > 0:
            raise ScalingError(f"single_performance must be > 0, got {self.single_performance!r}")
        object.__setattr__(self, "n_processors", int(self.n_processors))

    @property
    def nominal_performance(self) -> float:
        return self.n_processors * self.single_performance


def _check_n(n, minimum=1):
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise ScalingError(f"processor count must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _denominator(u: float, n: int) -> float:
    # N*(1-alpha) + alpha, rearranged to avoid cancellation
    return 1.0 + (n - 1) * u


def amdahl_speedup(alpha: AlphaLike, n: int) -> float:
    """Strong-scaling speedup ``N / (N*(1-alpha) + alpha)``."""
    n = _check_n(n)
    return n / _denominator(as_fraction(alpha).one_minus, n)


def amdahl_efficiency(alpha: AlphaLike, n: int) -> float:
    """Efficiency ``S/N = 1 / (N*(1-alpha) + alpha)``; equals R_max/R_peak."""
    n = _check_n(n)
    return 1.0 / _denominator(as_fraction(alpha).one_minus, n)


def alpha_from_speedup(s: float, n: int) -> ParallelizationFraction:
    """Invert :func:`amdahl_speedup` for a measured speedup ``s`` on ``n`` units."""
    n = _check_n(n, 2)
    s = float(s)
    if math.isnan(s):
        raise ScalingError("speedup is NaN")
    if s > n * (1.0 + _EDGE_SLACK):
        raise SuperlinearError(f"speedup {s} exceeds processor count {n}")
    if s < 1.0 - _EDGE_SLACK:
        raise InconsistentMeasurementError(f"speedup {s} is below 1")
    s = min(max(s, 1.0), float(n))
    value = (n / (n - 1)) * (s - 1.0) / s
    one_minus = (n - s) / (s * (n - 1))
    return ParallelizationFraction(min(max(value, 0.0), 1.0), min(max(one_minus, 0.0), 1.0))


def alpha_from_efficiency(e: float, n: int) -> ParallelizationFraction:
    """Effective alpha from a measured efficiency (e.g. R_max/R_peak) on ``n`` units.

    Raises :class:`SuperlinearError` for ``e > 1`` and
    :class:`InconsistentMeasurementError` for ``e < 1/n``.
    """
    n = _check_n(n, 2)
    e = float(e)
    if math.isnan(e) or e <= 0.0:
        raise InconsistentMeasurementError(f"efficiency must be positive, got {e}")
    if e > 1.0 + _EDGE_SLACK:
        raise SuperlinearError(f"efficiency {e} > 1 (superlinear measurement)")
    if e * n < 1.0 - _EDGE_SLACK:
        raise InconsistentMeasurementError(f"efficiency {e} < 1/N for N={n}")
    e = min(e, 1.0)
    value = (e * n - 1.0) / (e * (n - 1))
    one_minus = (1.0 - e) / (e * (n - 1))
    return ParallelizationFraction(min(max(value, 0.0), 1.0), min(max(one_minus, 0.0), 1.0))


def gustafson_speedup(alpha: AlphaLike, n: int) -> float:
    """Weak-scaling speedup ``(1-alpha) + alpha*N``."""
    n = _check_n(n)
    a = as_fraction(alpha)
    return a.one_minus + a.value * n


def gustafson_efficiency(alpha: AlphaLike, n: int) -> float:
    n = _check_n(n)
    a = as_fraction(alpha)
    return a.value + a.one_minus / n


def gustafson_to_amdahl(alpha_g: AlphaLike, n: int) -> ParallelizationFraction:
    """The Amdahl alpha that yields the same speedup as Gustafson's law at ``alpha_g``."""
    n = _check_n(n, 2)
    return alpha_from_speedup(gustafson_speedup(alpha_g, n), n)


def corrected_gustafson_time(alpha: AlphaLike, n: int) -> float:
    """Time of the weak-scaling run once the idle time of N-1 units is counted.

    ``(1-alpha) + alpha*N + (1-alpha)*(N-1)``, in units of one serial run.
    Evaluated in rational arithmetic, so the result is exactly ``N``.
    """
    n = _check_n(n)
    a = Fraction(as_fraction(alpha).value)
    serial = 1 - a
    processing = serial + a * n
    idle = serial * (n - 1)
    return float(processing + idle)


def payload_performance(shape: SystemShape, alpha: AlphaLike) -> float:
    """Payload performance ``N*P_single / (N*(1-alpha) + alpha)`` in op/s."""
    u = as_fraction(alpha).one_minus
    n = shape.n_processors
    return n * shape.single_performance / _denominator(u, n)
