"""Closed energy curves, periods, actions and the action profile.

The Hamiltonian vector field (dp/dxi, -dp/dx) is integrated with an adaptive
embedded Runge-Kutta pair; the first return to a Poincare section through the
seed gives the period.  Loop integrals use uniform-in-time resampling and the
periodic trapezoid rule, which is spectrally accurate for the analytic closed
orbits handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from . import symbols
from .errors import NumericalError
from .symbols import GRADIENT_FLOOR, SymbolDef

DEFAULT_SAMPLES = 1024
RETURN_TOL = 1e-6
CLOSURE_TOL = 1e-7
DRIFT_TOL = 1e-9


@dataclass(frozen=True)
class LevelCurve:
    """One closed Hamiltonian orbit on {p = lam}, sampled uniformly in time."""

    lam: float
    points: np.ndarray      # shape (n+1, 2), first row == last row
    times: np.ndarray       # shape (n+1,), times[0] == 0, times[-1] == period
    period: float
    orientation: int = 1    # Hamiltonian flow direction

    @property
    def n(self) -> int:
        return len(self.times) - 1

    def z_samples(self) -> np.ndarray:
        """Projection of the curve to the Bargmann plane, z = (x - i xi)/sqrt2."""
        x, xi = self.points[:, 0], self.points[:, 1]
        return (x - 1j * xi) / symbols.SQRT2


def _scalar_poly(coeff: np.ndarray):
    """Pure-python Horner evaluator; much faster than numpy for scalars."""
    rows = [tuple(row) for row in coeff]

    def ev(x: float, xi: float) -> float:
        acc = 0.0
        for row in reversed(rows):
            r = 0.0
            for c in reversed(row):
                r = r * xi + c
            acc = acc * x + r
        return acc

    return ev


def _flow_functions(sym: SymbolDef):
    px = _scalar_poly(symbols._dx(sym).coeff_matrix())
    pxi = _scalar_poly(symbols._dxi(sym).coeff_matrix())

    def rhs(_t, y):
        return (pxi(y[0], y[1]), -px(y[0], y[1]))

    return rhs, px, pxi


def _find_seed(sym: SymbolDef, lam: float) -> np.ndarray:
    """Point on {p = lam}: bisection along rays from the potential-well minimum."""
    best = None
    for r in (4.0, 8.0, 16.0, 32.0, 64.0):
        ax = np.linspace(-r, r, 81)
        xg, xig = np.meshgrid(ax, ax, indexing="ij")
        pg = symbols.eval(sym, xg, xig)
        idx = np.unravel_index(np.argmin(pg), pg.shape)
        interior = 0 < idx[0] < 80 and 0 < idx[1] < 80
        best = (float(xg[idx]), float(xig[idx]), float(pg[idx]))
        if interior:
            break
    x0, xi0, p0 = best
    if p0 >= lam:
        raise NumericalError("NO_SEED", f"min p = {p0:.6g} >= lambda = {lam:.6g}")

    s = 1 / math.sqrt(2)
    rays = [(1, 0), (0, 1), (-1, 0), (0, -1), (s, s), (-s, s), (s, -s), (-s, -s)]
    for dx, dxi in rays:
        t = 0.1 * (1.0 + abs(x0) + abs(xi0))
        lo = 0.0
        found = False
        for _ in range(90):
            if symbols.eval(sym, x0 + t * dx, xi0 + t * dxi) > lam:
                found = True
                break
            lo, t = t, 2 * t
        if not found:
            continue
        hi = t
        for _ in range(110):
            mid = 0.5 * (lo + hi)
            if symbols.eval(sym, x0 + mid * dx, xi0 + mid * dxi) > lam:
                hi = mid
            else:
                lo = mid
        seed = np.array([x0 + 0.5 * (lo + hi) * dx, xi0 + 0.5 * (lo + hi) * dxi])
        gx, gxi = symbols.grad(sym, seed[0], seed[1])
        if math.hypot(gx, gxi) >= GRADIENT_FLOOR:
            return seed
    raise NumericalError("NO_SEED", f"no ray from ({x0:.3g}, {xi0:.3g}) crosses level {lam:.6g}")


def trace_level_curve(sym: SymbolDef, lam: float, tol: float = 1e-10,
                      n_samples: int = DEFAULT_SAMPLES,
                      max_time: float = 1000.0) -> LevelCurve:
    """Trace the closed orbit through a seed on {p = lam}.

    Raises NO_SEED, GRADIENT_VANISHES, NO_CLOSURE or ENERGY_DRIFT when the
    level is empty, irregular, non-returning, or traced too inaccurately.
    """
    seed = _find_seed(sym, lam)
    rhs, px, pxi = _flow_functions(sym)
    v0 = np.array(rhs(0.0, seed))
    speed = float(np.hypot(*v0))
    if speed < GRADIENT_FLOOR:
        raise NumericalError("GRADIENT_VANISHES", f"|grad p| < {GRADIENT_FLOOR} at seed")
    normal = v0 / speed

    rtol, atol = 1e-11, 1e-12

    # Short hop off the section so the terminal return event cannot fire at t=0.
    hop = 0.01 / max(speed, 1.0)
    sol_a = solve_ivp(rhs, (0.0, hop), seed, method="RK45", rtol=rtol, atol=atol)
    if not sol_a.success:
        raise NumericalError("NO_CLOSURE", "initial hop failed")
    y1 = sol_a.y[:, -1]

    def section(_t, y):
        return normal[0] * (y[0] - seed[0]) + normal[1] * (y[1] - seed[1])

    section.terminal = True
    section.direction = 1.0

    escape_r2 = (100.0 * (1.0 + np.hypot(*seed))) ** 2

    def escape(_t, y):
        return y[0] * y[0] + y[1] * y[1] - escape_r2

    escape.terminal = True
    escape.direction = 1.0

    t_ret = None
    y_from = y1
    t_base = hop
    for _ in range(64):  # keep integrating past stray section crossings
        sol_b = solve_ivp(rhs, (0.0, max_time - t_base), y_from, method="RK45",
                          rtol=rtol, atol=atol, events=[section, escape])
        if sol_b.t_events[1].size:
            raise NumericalError("NO_CLOSURE", "trajectory escaped to infinity")
        if not sol_b.t_events[0].size:
            raise NumericalError("NO_CLOSURE", f"no return within t = {max_time}")
        te = float(sol_b.t_events[0][0])
        ye = sol_b.y_events[0][0]
        if np.hypot(*(ye - seed)) <= RETURN_TOL * (1.0 + np.hypot(*seed)):
            t_ret = t_base + te
            break
        t_base += te
        y_from = ye
        if t_base >= max_time:
            raise NumericalError("NO_CLOSURE", f"no return within t = {max_time}")
    if t_ret is None:
        raise NumericalError("NO_CLOSURE", "section crossings never return to the seed")

    period = t_ret
    sol = solve_ivp(rhs, (0.0, period), seed, method="RK45", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise NumericalError("NO_CLOSURE", "dense re-integration failed")
    ts = np.linspace(0.0, period, n_samples + 1)
    pts = sol.sol(ts).T
    gap = np.hypot(*(pts[-1] - seed))
    if gap > CLOSURE_TOL * (1.0 + np.hypot(*seed)):
        raise NumericalError("NO_CLOSURE", f"closure gap {gap:.3g} after one period")
    pts[-1] = pts[0]

    gx, gxi = symbols.grad(sym, pts[:, 0], pts[:, 1])
    if np.hypot(gx, gxi).min() < GRADIENT_FLOOR:
        k = int(np.argmin(np.hypot(gx, gxi)))
        raise NumericalError("GRADIENT_VANISHES",
                             f"|grad p| < {GRADIENT_FLOOR} at {tuple(pts[k])}")
    drift = np.abs(symbols.eval(sym, pts[:, 0], pts[:, 1]) - lam).max()
    if drift > DRIFT_TOL * (1.0 + abs(lam)):
        raise NumericalError("ENERGY_DRIFT", f"energy drift {drift:.3g} on traced curve")

    _ = tol, px, pxi
    return LevelCurve(lam=float(lam), points=pts, times=ts, period=float(period))


def resample_curve(curve: LevelCurve, n: int) -> LevelCurve:
    """Trigonometric resampling to n uniform time samples (exact for analytic orbits)."""
    x = curve.points[:-1, 0]
    xi = curve.points[:-1, 1]
    m = len(x)
    xn = np.fft.irfft(np.fft.rfft(x), n) * (n / m)
    xin = np.fft.irfft(np.fft.rfft(xi), n) * (n / m)
    pts = np.empty((n + 1, 2))
    pts[:-1, 0], pts[:-1, 1] = xn, xin
    pts[-1] = pts[0]
    ts = np.linspace(0.0, curve.period, n + 1)
    return LevelCurve(lam=curve.lam, points=pts, times=ts, period=curve.period,
                      orientation=curve.orientation)


def velocity_samples(sym: SymbolDef, curve: LevelCurve) -> np.ndarray:
    """Complex flow velocity dz/dt = dp/dxi + i dp/dx along the curve."""
    gx, gxi = symbols.grad(sym, curve.points[:, 0], curve.points[:, 1])
    return gxi + 1j * gx


def action(sym: SymbolDef, curve: LevelCurve) -> float:
    """Loop integral of xi dx; equals the enclosed phase-space area (taken >= 0)."""
    xi = curve.points[:-1, 1]
    xdot = symbols.eval(symbols._dxi(sym), curve.points[:-1, 0], xi)
    val = float(np.sum(xi * xdot)) * curve.period / curve.n
    return abs(val)


def complex_action(sym: SymbolDef, curve: LevelCurve) -> complex:
    """Loop integral of zeta dz through the phase-space identification."""
    x = curve.points[:-1, 0]
    xi = curve.points[:-1, 1]
    zeta = (xi - 1j * x) / symbols.SQRT2
    zdot = velocity_samples(sym, curve)[:-1] / symbols.SQRT2
    val = complex(np.sum(zeta * zdot)) * curve.period / curve.n
    return val if val.real >= 0 else -val


@dataclass
class ActionProfile:
    """Tabulated action with monotone shape-preserving interpolant and inverse."""

    lambdas: np.ndarray
    actions: np.ndarray
    periods: np.ndarray
    interpolant: PchipInterpolator

    @property
    def action_range(self) -> tuple[float, float]:
        return float(self.actions[0]), float(self.actions[-1])

    def action_at(self, lam: float) -> float:
        return float(self.interpolant(lam))

    def period_at(self, lam: float) -> float:
        return float(self.interpolant.derivative()(lam))


def action_profile(sym: SymbolDef, lambda_grid, tol: float = 1e-10) -> ActionProfile:
    """Trace every level of a strictly increasing grid and tabulate A and T."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or (grid.size > 1 and np.any(np.diff(grid) <= 0)):
        raise NumericalError("BAD_GRID", "lambda grid must be strictly increasing")
    acts, pers = [], []
    for lam in grid:
        try:
            curve = trace_level_curve(sym, float(lam), tol=tol)
        except NumericalError as exc:
            raise NumericalError(exc.code, f"lambda = {lam:.8g}: {exc.detail}") from exc
        acts.append(action(sym, curve))
        pers.append(curve.period)
    acts = np.array(acts)
    pers = np.array(pers)
    if grid.size > 1 and np.any(np.diff(acts) <= 0):
        raise NumericalError("NON_MONOTONE", "tabulated action is not strictly increasing")
    if grid.size == 1:
        interp = PchipInterpolator(np.array([grid[0] - 1e-9, grid[0] + 1e-9]),
                                   np.array([acts[0] - pers[0] * 1e-9, acts[0] + pers[0] * 1e-9]))
    else:
        interp = PchipInterpolator(grid, acts)
    return ActionProfile(lambdas=grid, actions=acts, periods=pers, interpolant=interp)


def inverse_action(profile: ActionProfile, target: float, tol: float = 1e-11) -> float:
    """Solve A(lam) = target by Newton on the interpolant from a midpoint seed."""
    lo, hi = float(profile.lambdas[0]), float(profile.lambdas[-1])
    a_lo, a_hi = profile.action_range
    slack = 1e-12 * (1.0 + abs(a_hi))
    if target < a_lo - slack or target > a_hi + slack:
        raise NumericalError("OUT_OF_RANGE",
                             f"I = {target:.8g} outside [{a_lo:.8g}, {a_hi:.8g}]")
    if profile.lambdas.size == 1:
        return float(profile.lambdas[0])
    target = min(max(target, a_lo), a_hi)
    deriv = profile.interpolant.derivative()
    lam = 0.5 * (lo + hi)
    blo, bhi = lo, hi
    for _ in range(200):
        f = float(profile.interpolant(lam)) - target
        if abs(f) <= tol:
            return float(lam)
        if f > 0:
            bhi = lam
        else:
            blo = lam
        d = float(deriv(lam))
        step = f / d if d > 0 else None
        lam_new = lam - step if step is not None else 0.5 * (blo + bhi)
        if not (blo <= lam_new <= bhi):
            lam_new = 0.5 * (blo + bhi)
        lam = lam_new
    raise NumericalError("OUT_OF_RANGE", "inverse action iteration did not converge")


def action_angle_check(sym: SymbolDef, curve: LevelCurve, dlambda: float | None = None,
                       period_override: float | None = None, n_theta: int = 96) -> float:
    """Max deviation of |det d(x,xi)/d(theta,A)| from 1 on a band of nearby levels.

    theta is flow time over period; A comes from the action derivative A' = T.
    Passing period_override replaces T by a fixed value, which deliberately
    miscalibrates the check (control experiments).
    """
    lam = curve.lam
    if dlambda is None:
        dlambda = 1e-3 * (1.0 + abs(lam))
    c_mid = resample_curve(curve, n_theta)
    c_lo = resample_curve(trace_level_curve(sym, lam - dlambda), n_theta)
    c_hi = resample_curve(trace_level_curve(sym, lam + dlambda), n_theta)

    pts = c_mid.points[:-1]
    gx, gxi = symbols.grad(sym, pts[:, 0], pts[:, 1])
    # d(x,xi)/dtheta = T * (flow velocity); exact from the symbol
    t_mid = curve.period if period_override is None else period_override
    dx_dth = curve.period * gxi
    dxi_dth = curve.period * (-gx)
    dx_dlam = (c_hi.points[:-1, 0] - c_lo.points[:-1, 0]) / (2 * dlambda)
    dxi_dlam = (c_hi.points[:-1, 1] - c_lo.points[:-1, 1]) / (2 * dlambda)
    det = dx_dth * dxi_dlam - dxi_dth * dx_dlam
    return float(np.max(np.abs(np.abs(det) / t_mid - 1.0)))
