"""WKB quasimodes on the Bargmann side and the truncated-contour residual.

For an energy lam with closed orbit, the eikonal equation
p_B(z, zeta(lam, z)) = lam is solved branch-wise by Newton continuation from
the orbit (where zeta = -i conj(z) exactly).  The phase is the line integral
of zeta, the principal amplitude is a continued branch of
(d_zeta p_B)**(-1/2), and the quantized operator is applied through a
truncated contour integral over a disc |z - w| < delta, on which the combined
exponent has nonpositive real part  -(c r^2 / <r> + Im(phase) + Phi0)/hbar,
so the quadrature is overflow-free and concentrated at w = z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, symbols
from .errors import NumericalError
from .geometry import LevelCurve
from .symbols import SymbolDef

NEWTON_TOL = 1e-12
JACOBIAN_FLOOR = 1e-8
AMPLITUDE_FLOOR = 1e-8


def _newton_zeta(sym: SymbolDef, lam: complex, z, seed):
    """Vectorized Newton solve of p_B(z, zeta) = lam from a branch seed."""
    zeta = np.asarray(seed, dtype=complex).copy()
    z = np.asarray(z, dtype=complex)
    target = 1e-12 * (1.0 + abs(lam))
    for _ in range(60):
        f = symbols.eval_complex(sym, z, zeta) - lam
        if np.abs(f).max() <= target:
            return zeta
        df = symbols.dzeta_complex(sym, z, zeta)
        if np.abs(df).min() < JACOBIAN_FLOOR:
            raise NumericalError("JACOBIAN_SINGULAR",
                                 f"|d_zeta p_B| < {JACOBIAN_FLOOR} during Newton")
        zeta = zeta - f / df
    raise NumericalError("NEWTON_DIVERGED",
                         f"eikonal Newton stalled at |f| = {np.abs(f).max():.3g}")


def eikonal_solve(sym: SymbolDef, lam: complex, z: complex, seed: complex) -> complex:
    """Root of p_B(z, .) = lam on the branch of the seed."""
    df0 = symbols.dzeta_complex(sym, z, seed)
    if abs(df0) < JACOBIAN_FLOOR:
        raise NumericalError("JACOBIAN_SINGULAR", f"|d_zeta p_B| = {abs(df0):.3g} at seed")
    return complex(_newton_zeta(sym, lam, np.array([z]), np.array([seed]))[0])


def _cumulative_simpson(f: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral along the last axis on a uniform grid (4th order)."""
    n = f.shape[-1]
    out = np.zeros_like(f)
    for j in range(0, n - 2, 2):
        out[..., j + 1] = out[..., j] + h / 12.0 * (5 * f[..., j] + 8 * f[..., j + 1] - f[..., j + 2])
        out[..., j + 2] = out[..., j] + h / 3.0 * (f[..., j] + 4 * f[..., j + 1] + f[..., j + 2])
    if n % 2 == 0:  # trailing interval
        out[..., -1] = out[..., -2] + h / 2.0 * (f[..., -2] + f[..., -1])
    return out


def _continue_sqrt_rows(values: np.ndarray, anchor) -> np.ndarray:
    """Square root continued along the last axis, vectorized over leading axes."""
    out = np.empty_like(values, dtype=complex)
    out[..., 0] = anchor
    for j in range(1, values.shape[-1]):
        r = np.sqrt(values[..., j])
        prev = out[..., j - 1]
        d_plus = np.abs(r - prev)
        d_minus = np.abs(r + prev)
        pick = np.where(d_plus <= d_minus, r, -r)
        win = np.minimum(d_plus, d_minus)
        lose = np.maximum(d_plus, d_minus)
        if np.any(lose < 10 * win):
            raise NumericalError("AMBIGUOUS_CONTINUATION",
                                 "square-root branches collide along a ray")
        out[..., j] = pick
    return out


@dataclass
class EikonalBranch:
    """One branch of zeta(lam, .) anchored at a base point on the orbit."""

    sym: SymbolDef
    lam: complex
    curve: LevelCurve
    base_index: int = 0
    _curve_z: np.ndarray = field(default=None, repr=False)
    _curve_phase: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self._curve_z = self.curve.z_samples()
        self._curve_phase = None

    @property
    def base_point(self) -> complex:
        return complex(self._curve_z[self.base_index])

    @property
    def base_zeta(self) -> complex:
        return -1j * np.conj(self.base_point)

    def zeta_on_curve(self) -> np.ndarray:
        return -1j * np.conj(self._curve_z)

    def curve_phase(self) -> np.ndarray:
        """Phase at every curve sample: spectral antiderivative of zeta dz/dt,
        pinned to -i Phi0 at the base point."""
        if self._curve_phase is None:
            zs = self._curve_z[:-1]
            vel = geometry.velocity_samples(self.sym, self.curve)[:-1]
            f = (-1j * np.conj(zs)) * vel
            n = len(f)
            period = self.curve.period
            c = np.fft.fft(f) / n
            m = np.fft.fftfreq(n, d=1.0 / n)
            omega = 2 * np.pi / period
            spec = np.zeros_like(c)
            nz = m != 0
            spec[nz] = c[nz] / (1j * omega * m[nz])
            g = np.fft.ifft(spec) * n
            t = self.curve.times[:-1]
            prim = c[0] * t + (g - g[0])
            prim = np.append(prim, prim[0] + c[0] * period)
            prim = prim - prim[self.base_index]
            phi0_base = 0.5 * abs(self.base_point) ** 2
            self._curve_phase = prim - 1j * phi0_base
        return self._curve_phase

    def zeta_along(self, pts: np.ndarray, seed: complex) -> np.ndarray:
        """Marching continuation of zeta over an ordered point sequence."""
        out = np.empty(len(pts), dtype=complex)
        prev = seed
        for k, z in enumerate(pts):
            val = complex(_newton_zeta(self.sym, self.lam, np.array([z]), np.array([prev]))[0])
            if abs(val - prev) > 0.5 * (1.0 + abs(prev)):
                raise NumericalError("BRANCH_LEFT_TUBE",
                                     f"zeta jumped by {abs(val - prev):.3g} near z = {z:.4g}")
            out[k] = val
            prev = val
        return out


def phase(branch: EikonalBranch, path) -> complex:
    """Line integral of zeta along a polyline from the base point, minus
    i Phi0(base).  Each segment uses a uniform grid with cumulative Simpson."""
    pts = np.asarray(path, dtype=complex)
    if len(pts) < 1 or abs(pts[0] - branch.base_point) > 1e-8 * (1 + abs(branch.base_point)):
        raise NumericalError("BAD_PATH", "path must start at the branch base point")
    total = 0.0 + 0.0j
    seed = branch.base_zeta
    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        if abs(seg) == 0.0:
            continue
        n = max(32, int(abs(seg) / 0.01))
        n += n % 2
        nodes = a + seg * np.arange(n + 1) / n
        zeta = branch.zeta_along(nodes, seed)
        svals = _cumulative_simpson(zeta[None, :], abs(seg) / n)[0]
        total += svals[-1] * (seg / abs(seg))
        seed = complex(zeta[-1])
    return complex(total - 1j * 0.5 * abs(branch.base_point) ** 2)


def _curve_distance(curve_z: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Distance of each point to the closed polygonal curve image."""
    a = curve_z[:-1]
    b = curve_z[1:]
    ab = b - a
    denom = np.abs(ab) ** 2
    out = np.empty(len(pts))
    for k, z in enumerate(pts):
        t = np.clip(((z - a) * np.conj(ab)).real / denom, 0.0, 1.0)
        out[k] = np.abs(z - (a + t * ab)).min()
    return out


def _phase_at_points(branch: EikonalBranch, pts: np.ndarray) -> np.ndarray:
    """Phase off the curve: along-curve antiderivative plus a straight leg."""
    curve_z = branch._curve_z
    cphase = branch.curve_phase()
    out = np.empty(len(pts), dtype=complex)
    for k, z in enumerate(pts):
        k_star = int(np.argmin(np.abs(curve_z[:-1] - z)))
        zc = curve_z[k_star]
        seg = z - zc
        if abs(seg) < 1e-15:
            out[k] = cphase[k_star]
            continue
        n = 32
        nodes = zc + seg * np.arange(n + 1) / n
        zeta = branch.zeta_along(nodes, complex(-1j * np.conj(zc)))
        svals = _cumulative_simpson(zeta[None, :], abs(seg) / n)[0]
        out[k] = cphase[k_star] + svals[-1] * (seg / abs(seg))
    return out


def gauge_check(branch: EikonalBranch, pts) -> tuple[float, float]:
    """Min and max of (Im phase + Phi0) / dist(z, curve)^2 over off-curve samples."""
    pts = np.asarray(pts, dtype=complex)
    phi = _phase_at_points(branch, pts)
    f_gauge = phi.imag + 0.5 * np.abs(pts) ** 2
    d = _curve_distance(branch._curve_z, pts)
    scale = float(np.abs(branch._curve_z).max())
    mask = d > 1e-6 * scale
    if not mask.any():
        raise NumericalError("BAD_SAMPLES", "all gauge samples lie on the curve")
    ratios = f_gauge[mask] / d[mask] ** 2
    return float(ratios.min()), float(ratios.max())


def gauge_values(branch: EikonalBranch, pts) -> np.ndarray:
    """Im phase + Phi0 at the sample points (vanishes on the curve)."""
    pts = np.asarray(pts, dtype=complex)
    phi = _phase_at_points(branch, pts)
    return phi.imag + 0.5 * np.abs(pts) ** 2


def principal_amplitude(branch: EikonalBranch, pts, seed_zeta=None) -> np.ndarray:
    """Continued branch of (d_zeta p_B)**(-1/2) along an ordered point sequence."""
    pts = np.asarray(pts, dtype=complex)
    seed = branch.base_zeta if seed_zeta is None else seed_zeta
    zeta = branch.zeta_along(pts, seed)
    g = symbols.dzeta_complex(branch.sym, pts, zeta)
    if np.abs(g).min() < AMPLITUDE_FLOOR:
        raise NumericalError("ZERO_DERIVATIVE", "d_zeta p_B vanishes on the arc")
    roots = _continue_sqrt_rows(g[None, :], np.sqrt(g[0]))[0]
    return 1.0 / roots


def transport_residual(branch: EikonalBranch, n_lattice: int = 257,
                       arc_fraction: float = 0.25,
                       amplitude_exponent: float = -0.5) -> float:
    """Residual of the half-density transport equation along a curve arc.

    Uses 4th-order centered differences in flow time.  amplitude_exponent
    -0.5 is the transported branch; +0.5 is a deliberate control that must
    fail by an O(1) margin.
    """
    if n_lattice < 9:
        raise NumericalError("BAD_SAMPLES", "arc lattice too short")
    steps = n_lattice - 1
    n_curve = int(round(steps / arc_fraction))
    work = geometry.resample_curve(branch.curve, n_curve)
    shift = int(round(branch.base_index * n_curve / branch.curve.n)) % n_curve
    zs_all = work.z_samples()[:-1]
    zs = zs_all.take(shift + np.arange(n_lattice), mode="wrap")
    dt = work.period / n_curve

    sigma = symbols.dzeta_complex(branch.sym, zs, -1j * np.conj(zs))
    if np.abs(sigma).min() < AMPLITUDE_FLOOR:
        raise NumericalError("ZERO_DERIVATIVE", "d_zeta p_B vanishes on the arc")
    roots = _continue_sqrt_rows(sigma[None, :], np.sqrt(sigma[0]))[0]
    amp = roots ** (2 * amplitude_exponent)

    def d_dt(f):
        return (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dt)

    inner = slice(2, -2)
    resid = 0.5 * (d_dt(sigma) / sigma[inner]) * amp[inner] + d_dt(amp)
    rate = np.abs(d_dt(sigma) / sigma[inner]).max()
    scale = np.abs(amp).max() * max(rate, 1e-30)
    return float(np.abs(resid).max() / scale)


def partial_actions(sym: SymbolDef, curve: LevelCurve, m: int = 6):
    """Arc actions int zeta dz + i*(Phi0(z_j) - Phi0(z_{j+1})) and their sum.

    The sum telescopes to the full loop integral of zeta dz, so it must equal
    the action of the curve regardless of the cover size.
    """
    if m < 3:
        raise NumericalError("COVER_TOO_COARSE", "need at least 3 arcs")
    base = 256
    work = geometry.resample_curve(curve, m * base)
    zs = work.z_samples()
    vel = geometry.velocity_samples(sym, work) / symbols.SQRT2
    zeta = -1j * np.conj(zs)
    f = zeta * vel
    dt = work.times[1] - work.times[0]
    pieces = []
    for j in range(m):
        sl = slice(j * base, (j + 1) * base + 1)
        seg = f[sl]
        integral = dt * (seg.sum() - 0.5 * (seg[0] + seg[-1]))
        za, zb = zs[j * base], zs[(j + 1) * base]
        cobord = 1j * (0.5 * abs(za) ** 2 - 0.5 * abs(zb) ** 2)
        pieces.append(complex(integral + cobord))
    return pieces, complex(sum(pieces))


def quasimode_residual(sym: SymbolDef, lam: float, hbar: float, contour_c: float,
                       contour_delta: float, *, curve: LevelCurve | None = None,
                       n_points: int = 6, n_theta: int = 48, n_rad: int = 160,
                       lam_op: float | None = None, symbol_override=None,
                       verify_quadrature: bool = False) -> float:
    """Weighted residual of the truncated operator on the principal quasimode.

    Returns max over curve points z0 of |(P_{c,delta} - lam_op) u(z0)| weighted
    by exp(-Phi0(z0)/hbar), relative to the largest amplitude on the disc.
    The operator is evaluated on the contour
    zeta = -i (conj(z0)+conj(w))/2 + i c conj(z0-w)/<z0-w>,  |z0-w| < delta.
    """
    if curve is None:
        curve = geometry.trace_level_curve(sym, lam)
    if lam_op is None:
        lam_op = lam
    zs = curve.z_samples()
    idxs = [int(round(k * curve.n / n_points)) % curve.n for k in range(n_points)]
    worst = 0.0
    for idx in idxs:
        val = _residual_at_point(sym, lam, hbar, contour_c, contour_delta,
                                 complex(zs[idx]), n_theta, n_rad, lam_op,
                                 symbol_override)
        worst = max(worst, val)
    if verify_quadrature:
        refined = 0.0
        for idx in idxs:
            refined = max(refined, _residual_at_point(
                sym, lam, hbar, contour_c, contour_delta, complex(zs[idx]),
                int(1.5 * n_theta), int(1.5 * n_rad) + (int(1.5 * n_rad) % 2),
                lam_op, symbol_override))
        if abs(refined - worst) > 0.10 * max(worst, 1e-300):
            raise NumericalError("QUADRATURE_UNRESOLVED",
                                 f"refinement moved residual {worst:.3g} -> {refined:.3g}")
    return worst


def _residual_at_point(sym, lam, hbar, cc, delta, z0, n_theta, n_rad, lam_op,
                       symbol_override):
    zeta0 = -1j * np.conj(z0)
    r = np.linspace(0.0, delta, n_rad + 1)
    h = delta / n_rad
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    dirs = np.exp(1j * theta)
    w = z0 + dirs[:, None] * r[None, :]

    # eikonal branch and amplitude marched outward along every ray at once
    zeta = np.empty_like(w)
    zeta[:, 0] = zeta0
    for j in range(1, n_rad + 1):
        zeta[:, j] = _newton_zeta(sym, lam, w[:, j], zeta[:, j - 1])
    g = symbols.dzeta_complex(sym, w, zeta)
    if np.abs(g).min() < AMPLITUDE_FLOOR:
        raise NumericalError("ZERO_DERIVATIVE", "amplitude degenerates inside the disc")
    amp = 1.0 / _continue_sqrt_rows(g, np.sqrt(g[:, 0]))

    # phase relative to z0 along each ray
    phi_rel = _cumulative_simpson(zeta * dirs[:, None], h)

    diff = z0 - w
    s_br = np.sqrt(1.0 + r * r)[None, :]
    zeta_c = -0.5j * (np.conj(z0) + np.conj(w)) + 1j * cc * np.conj(diff) / s_br
    jac = 1.0 + 2.0 * cc / s_br - cc * (r * r)[None, :] / s_br ** 3
    mid = 0.5 * (z0 + w)
    pvals = (symbol_override(mid, zeta_c) if symbol_override is not None
             else symbols.eval_complex(sym, mid, zeta_c))

    expo = 1j * (zeta_c * diff + phi_rel) / hbar
    if expo.real.max() > 1e-6:
        raise NumericalError("QUADRATURE_UNRESOLVED",
                             f"contour exponent went positive: {expo.real.max():.3g}")
    simp = np.full(n_rad + 1, 2.0)
    simp[1::2] = 4.0
    simp[0] = simp[-1] = 1.0
    simp *= h / 3.0
    integrand = pvals * jac * amp * np.exp(expo) * r[None, :]
    val = (integrand @ simp).sum() * (2 * np.pi / n_theta) / (2 * np.pi * hbar)
    resid = abs(val - lam_op * amp[0, 0])
    return float(resid / np.abs(amp).max())
