"""Winding numbers, square-root monodromy and the half-density cocycle sign.

The derivative of the complexified orbit, dz/dt = dp/dxi + i dp/dx, is a
nonvanishing loop whose winding is +-1 for a simple closed orbit.  Continuing
a square root of such a loop around one period flips its sign exactly when the
winding is odd; covering the orbit with overlapping arcs and multiplying the
overlap transition signs of the local inverse-square-root branches reproduces
that sign.  This -1 is the source of the half-integer shift in the
quantization condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, symbols
from .errors import NumericalError
from .geometry import LevelCurve
from .symbols import SymbolDef

NONVANISHING_TOL = 1e-12
MAX_ARG_STEP = np.pi / 2
WINDING_RESIDUAL = 0.01


@dataclass(frozen=True)
class ComplexLoop:
    """Cyclically closed complex samples; last sample equals the first."""

    samples: np.ndarray
    times: np.ndarray

    def validate(self):
        s = self.samples
        if np.abs(s).min() < NONVANISHING_TOL:
            k = int(np.argmin(np.abs(s)))
            raise NumericalError("ZERO_CROSSING", f"loop modulus {np.abs(s[k]):.3g} at index {k}")
        inc = np.abs(np.angle(s[1:] / s[:-1]))
        if inc.max() >= MAX_ARG_STEP:
            raise NumericalError("SAMPLING_TOO_COARSE",
                                 f"argument increment {inc.max():.3g} >= pi/2")


def synthetic_loop(index: int, n: int = 256) -> ComplexLoop:
    """Unit-circle loop of prescribed winding, for calibration tests."""
    t = np.linspace(0.0, 1.0, n + 1)
    return ComplexLoop(samples=np.exp(2j * np.pi * index * t), times=t)


def winding_number(loop: ComplexLoop) -> int:
    """Certified integer winding: summed argument increments over 2*pi."""
    loop.validate()
    s = loop.samples
    total = float(np.sum(np.angle(s[1:] / s[:-1]))) / (2 * np.pi)
    k = int(np.rint(total))
    if abs(total - k) > WINDING_RESIDUAL:
        raise NumericalError("SAMPLING_TOO_COARSE",
                             f"winding residual {abs(total - k):.3g} exceeds {WINDING_RESIDUAL}")
    return k


def maslov_loop(sym: SymbolDef, curve: LevelCurve) -> ComplexLoop:
    """The loop t -> dp/dxi + i dp/dx along the orbit (the complexified velocity)."""
    sigma = geometry.velocity_samples(sym, curve)
    if np.abs(sigma).min() < NONVANISHING_TOL:
        raise NumericalError("ZERO_CROSSING", "complexified velocity vanishes on the curve")
    return ComplexLoop(samples=sigma, times=curve.times.copy())


def _continue_sqrt(values: np.ndarray, anchor: complex | None = None) -> np.ndarray:
    """Pointwise square root continued along a path; branch chosen by proximity.

    The chosen root must be at least 10x closer to the previous value than the
    rejected one, which makes monodromy detection unambiguous at the mandated
    sampling density.
    """
    out = np.empty(len(values), dtype=complex)
    out[0] = np.sqrt(values[0]) if anchor is None else anchor
    for k in range(1, len(values)):
        r = np.sqrt(values[k])
        d_plus, d_minus = abs(r - out[k - 1]), abs(-r - out[k - 1])
        win, d_win, d_lose = (r, d_plus, d_minus) if d_plus <= d_minus else (-r, d_minus, d_plus)
        if d_lose < 10 * d_win:
            raise NumericalError("AMBIGUOUS_CONTINUATION",
                                 f"square-root branches too close at index {k}")
        out[k] = win
    return out


def sqrt_holonomy(loop: ComplexLoop) -> int:
    """Sign relating the continued square root after one loop to its start."""
    loop.validate()
    roots = _continue_sqrt(loop.samples)
    ratio = roots[-1] / roots[0]
    sign = 1 if abs(ratio - 1) < abs(ratio + 1) else -1
    if abs(ratio - sign) > 1e-6:
        raise NumericalError("AMBIGUOUS_CONTINUATION",
                             f"holonomy ratio {ratio} not close to a sign")
    return sign


def build_arc_cover(n_total: int, m: int, overlap: float = 0.25):
    """Index windows of m equal-time arcs with fractional overlap into the next."""
    if m < 3:
        raise NumericalError("COVER_TOO_COARSE", "need at least 3 arcs")
    base = n_total // m
    if base * m != n_total:
        raise NumericalError("COVER_TOO_COARSE",
                             f"sample count {n_total} not divisible by cover size {m}")
    ext = max(2, int(round(overlap * base)))
    arcs = []
    for j in range(m):
        start = j * base
        arcs.append(np.arange(start, start + base + ext + 1))
    return arcs  # indices into a length-n_total cyclic array (take mod n_total)


def cocycle_product(sym: SymbolDef, curve: LevelCurve, m: int = 6) -> int:
    """Product of overlap transition signs of local inverse-square-root branches.

    Covers the curve with m overlapping arcs, fixes a continuous branch of
    (dzeta p_B)**(-1/2) on each, and multiplies the signs relating consecutive
    branches on the overlaps (including the wrap-around).
    """
    base = 128
    work = geometry.resample_curve(curve, m * base)
    sigma_open = geometry.velocity_samples(sym, work)[:-1]
    n_total = len(sigma_open)
    arcs = build_arc_cover(n_total, m)

    branches = []
    for arc in arcs:
        vals = sigma_open[arc % n_total]
        darg = np.abs(np.angle(vals[1:] / vals[:-1]))
        if float(np.sum(darg)) >= MAX_ARG_STEP:
            raise NumericalError("COVER_TOO_COARSE",
                                 f"arc argument variation {np.sum(darg):.3g} >= pi/2 with m={m}")
        branches.append(1.0 / _continue_sqrt(vals))

    product = 1
    for j in range(m):
        arc_j = arcs[j]
        arc_k = arcs[(j + 1) % m]
        start_k = arc_k[0] + (0 if j + 1 < m else n_total)
        # samples shared by arc j and the start of arc j+1
        shared = [i for i, idx in enumerate(arc_j) if idx >= start_k]
        if len(shared) < 2:
            raise NumericalError("COVER_TOO_COARSE", "adjacent arcs do not overlap")
        ratios = []
        for i in shared:
            kk = arc_j[i] - start_k
            ratios.append(branches[j][i] / branches[(j + 1) % m][kk])
        ratios = np.array(ratios)
        sign = 1 if abs(ratios[0] - 1) < abs(ratios[0] + 1) else -1
        if np.abs(ratios - sign).max() > 1e-6:
            raise NumericalError("AMBIGUOUS_CONTINUATION",
                                 f"overlap {j} transition not a constant sign")
        product *= sign
    return product
