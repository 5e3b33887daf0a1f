"""Quantization condition solving and comparison against a reference spectrum.

Predicted eigenvalues solve A(lam) = 2*pi*hbar*(k + 1/2): the half-integer
shift is the Maslov correction, and solving through the inverse action
realises the leading term of the eigenvalue expansion; the neglected terms
are O(hbar**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .geometry import ActionProfile, inverse_action

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class BsPrediction:
    k: int
    action_value: float     # 2*pi*hbar*(k + 1/2)
    lam: float
    hbar: float


@dataclass
class SpectrumReport:
    hbar: float
    pairs: list = field(default_factory=list)  # (k, lambda_bs, lambda_ref, abs_err)
    unmatched_bs: list = field(default_factory=list)
    unmatched_ref: list = field(default_factory=list)
    max_abs_err: float = 0.0


def bs_eigenvalues(profile: ActionProfile, hbar: float, e1: float, e2: float,
                   tol: float = 1e-11) -> list[BsPrediction]:
    """All predictions with 2*pi*hbar*(k+1/2) inside (A(e1), A(e2)), ascending."""
    if hbar <= 0:
        raise NumericalError("BAD_HBAR", f"hbar = {hbar}")
    a_lo, a_hi = profile.action_range
    slack = 1e-12 * (1 + abs(a_hi))
    a1, a2 = profile.action_at(e1), profile.action_at(e2)
    if a1 < a_lo - slack or a2 > a_hi + slack:
        raise NumericalError("PROFILE_RANGE",
                             f"window ({e1}, {e2}) maps outside the profile action range")
    k_min = int(math.floor(a1 / (TWO_PI * hbar) - 0.5)) - 1
    k_max = int(math.ceil(a2 / (TWO_PI * hbar) - 0.5)) + 1
    out = []
    for k in range(k_min, k_max + 1):
        target = TWO_PI * hbar * (k + 0.5)
        if not (a1 < target < a2):
            continue
        lam = inverse_action(profile, target, tol=tol)
        out.append(BsPrediction(k=k, action_value=target, lam=lam, hbar=hbar))
    out.sort(key=lambda p: p.lam)
    return out


def compare_spectra(bs: list[BsPrediction], ref, match_radius: float) -> SpectrumReport:
    """Greedy order-preserving nearest-neighbour pairing within match_radius."""
    ref = list(map(float, ref))
    if any(b - a < 0 for a, b in zip(ref, ref[1:])):
        raise NumericalError("UNSORTED_REFERENCE", "reference eigenvalues must ascend")
    hbar = bs[0].hbar if bs else 0.0
    report = SpectrumReport(hbar=hbar)
    used = [False] * len(ref)
    claims = {}
    for pred in sorted(bs, key=lambda p: p.lam):
        best, best_d = None, match_radius
        for j, r in enumerate(ref):
            d = abs(r - pred.lam)
            if not used[j] and d <= best_d:
                best, best_d = j, d
        if best is None:
            if any(abs(r - pred.lam) <= match_radius for r in ref):
                other = claims.get(min(range(len(ref)), key=lambda j: abs(ref[j] - pred.lam)))
                raise NumericalError("AMBIGUOUS_MATCH",
                                     f"predictions k={other} and k={pred.k} claim one reference value")
            report.unmatched_bs.append(pred.lam)
            continue
        used[best] = True
        claims[best] = pred.k
        report.pairs.append((pred.k, pred.lam, ref[best], best_d))
    report.unmatched_ref = [r for j, r in enumerate(ref) if not used[j]]
    # order preservation: matched reference values must ascend with lambda_bs
    matched = [p[2] for p in report.pairs]
    if any(b < a for a, b in zip(matched, matched[1:])):
        raise NumericalError("AMBIGUOUS_MATCH", "pairing is not order preserving")
    report.max_abs_err = max((p[3] for p in report.pairs), default=0.0)
    return report


def convergence_order(reports: list[SpectrumReport]) -> float:
    """Least-squares slope of log(max_abs_err) against log(hbar)."""
    if len(reports) < 3:
        raise NumericalError("DEGENERATE", "need at least 3 reports for an order fit")
    hs = np.array([r.hbar for r in reports], dtype=float)
    errs = np.array([r.max_abs_err for r in reports], dtype=float)
    if len(set(hs.tolist())) < len(hs):
        raise NumericalError("DEGENERATE", "hbar values must be distinct")
    if np.any(errs < 1e-13):
        raise NumericalError("DEGENERATE", "errors at rounding level; order undefined")
    x, y = np.log(hs), np.log(errs)
    slope = float(np.polyfit(x, y, 1)[0])
    return slope
