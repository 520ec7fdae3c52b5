"""Leading-order logical error estimate and threshold extraction.

Three chain families contribute at order ``p^((d+1)/2)``: (d+1)/2 flips in one
row, a chain broken across two adjacent rows, and a chain broken across two
consecutive time slices (one leg may be a syndrome flip).  Diagonal chains
created by CNOT propagation are not counted, so the estimate is a lower bound
in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arch import ArchitectureModel, cycle_error_rates


@dataclass(frozen=True)
class FlipRates:
    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def _check_d(d: int) -> None:
    if d < 3 or d % 2 == 0:
        raise ValueError(f"d must be odd and >= 3, got {d}")


def case1(d: int, p: float) -> float:
    _check_d(d)
    return d * math.comb(d, (d + 1) // 2) * p ** ((d + 1) // 2)


def w1(d: int) -> int:
    """Broken chains with exactly one flipped horizontal link, clasps excluded."""
    _check_d(d)
    num = (d * d - 1) * math.comb(d, (d - 1) // 2)
    if num % (d + 3):
        raise ArithmeticError(f"W1({d}) is not an integer")
    return num // (d + 3)


def w2(d: int) -> int:
    """Broken chains on vertical links only, excluding single-row chains."""
    _check_d(d)
    return (d - 1) // 2 * math.comb(d, (d - 1) // 2)


def w1_enumerated(d: int) -> int:
    """All one-horizontal-link chains minus clasps, summed explicitly."""
    h = (d - 1) // 2
    return (d - 1) * math.comb(d, h) - 2 * sum(math.comb(d - r, h - r) for r in range(1, h + 1))


def w2_enumerated(d: int) -> int:
    h = (d - 1) // 2
    return (d - 1) * math.comb(d - 1, h) - sum(math.comb(d - r, h) for r in range(2, h + 2))


def case2(d: int, p: float) -> float:
    # two orientations x 50% misidentification cancel; d - 1 adjacent row pairs
    return (d - 1) * (w1(d) + w2(d)) * p ** ((d + 1) // 2)


def case3(d: int, p: float, q: float) -> float:
    # the W1 leg carries one syndrome flip: q * p^((d-1)/2) avoids a q/p ratio
    h = (d - 1) // 2
    return d * (w1(d) * q * p ** h + w2(d) * p ** (h + 1))


def p_logical_cases(d: int, rates: FlipRates) -> float:
    """Sum of the three chain families, evaluated term by term."""
    return case1(d, rates.p) + case2(d, rates.p) + case3(d, rates.p, rates.q)


def p_logical_coefficients(d: int) -> tuple[Fraction, Fraction]:
    """Exact ``(a, b)`` with ``P = a p^((d+1)/2) + b q p^((d-1)/2)``."""
    _check_d(d)
    binom = math.comb(d, (d - 1) // 2)
    fixed = d + Fraction((d - 1) * (3 * d + 5) * (d - 1), 2 * (d + 3)) + Fraction(d * (d - 1), 2)
    syndrome = Fraction(d * (d * d - 1), d + 3)
    return binom * fixed, binom * syndrome


def p_logical(d: int, rates: FlipRates) -> float:
    """Closed bracketed form of the leading-order logical error per cycle."""
    a, b = p_logical_coefficients(d)
    p, q = rates.p, rates.q
    h = (d - 1) // 2
    # the syndrome term is written as q * p^h so that p = 0 is well defined
    return float(a) * p ** (h + 1) + float(b) * q * p ** h


def p_xl(d: int, rates: FlipRates) -> float:
    """Logical X per cycle from bit-flip rates ``(p_bf, q_bf)``."""
    return p_logical(d, rates)


def p_zl(d: int, rates: FlipRates) -> float:
    """Logical Z per cycle from phase-flip rates ``(p_pf, q_pf)``."""
    return p_logical(d, rates)


def architecture_rates(m: ArchitectureModel, d: int, T1: float) -> tuple[float, float]:
    """Analytic ``(P_XL, P_ZL)`` per cycle for an architecture at ``T1`` (seconds)."""
    r = cycle_error_rates(m, T1)
    return (p_xl(d, FlipRates(min(r.p_bf, 1.0), min(r.q_bf, 1.0))),
            p_zl(d, FlipRates(min(r.p_pf, 1.0), min(r.q_pf, 1.0))))


def p_step_from_bf(p_bf: float) -> float:
    """Per-timestep physical error rate of an 8-step cycle matching ``p_bf``."""
    if not 0.0 <= p_bf <= 1.0:
        raise ValueError("p_bf must lie in [0, 1]")
    return 1.5 * (p_bf / 8.0)


def p_bf_from_step(p_step: float) -> float:
    return p_step * 8.0 / 1.5


@dataclass(frozen=True)
class ThresholdResult:
    T1_cross: float | None
    bracket: tuple | None
    degenerate: bool = False


def find_threshold(t1_grid, curve_small, curve_large) -> ThresholdResult:
    """T1 at which the larger-distance curve drops below the smaller one.

    The sign change of ``log(large) - log(small)`` is bracketed on the grid
    and located by linear interpolation in T1.  Points where either rate is
    non-positive or not finite are skipped.  Returns ``T1_cross=None`` when the
    curves never cross; ``degenerate=True`` when they coincide.
    """
    t = np.asarray(t1_grid, dtype=float)
    a = np.asarray(curve_small, dtype=float)
    b = np.asarray(curve_large, dtype=float)
    if not (t.shape == a.shape == b.shape):
        raise ValueError("curves must be sampled on the common T1 grid")
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("T1 grid must be increasing with at least two points")
    ok = (a > 0) & (b > 0) & np.isfinite(a) & np.isfinite(b)
    t, a, b = t[ok], a[ok], b[ok]
    diff = np.log(b) - np.log(a)
    if len(diff) and np.all(diff == 0):
        return ThresholdResult(None, None, degenerate=True)
    for i in range(len(diff) - 1):
        if diff[i] >= 0 > diff[i + 1]:
            if diff[i] == 0:
                return ThresholdResult(float(t[i]), (float(t[i]), float(t[i + 1])))
            frac = diff[i] / (diff[i] - diff[i + 1])
            cross = t[i] + frac * (t[i + 1] - t[i])
            return ThresholdResult(float(cross), (float(t[i]), float(t[i + 1])))
    return ThresholdResult(None, None)


def analytic_curves(m: ArchitectureModel, d: int, t1_grid_us) -> tuple[np.ndarray, np.ndarray]:
    pts = [architecture_rates(m, d, t * 1e-6) for t in t1_grid_us]
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])
