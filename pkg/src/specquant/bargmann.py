"""Numerical Bargmann transform, weighted norms, and the sup-norm bound.

The transform maps line functions to entire functions square-integrable
against exp(-|z|^2 / hbar); with the (pi*hbar)^(-3/4) kernel normalization it
is unitary for the standard Lebesgue area element, and the isometry tests pin
that normalization.  The Gaussian factor exp(-(y - sqrt2*Re z)^2 / (2 hbar))
confines the kernel, so quadrature is restricted to a window of half-width
10*sqrt(hbar) around sqrt2*Re z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

DECAY_REQ = 1e-12
BOUNDARY_REQ = 1e-14
MAX_EXPONENT = 690.0


@dataclass(frozen=True)
class LineFunction:
    grid: np.ndarray          # uniform samples on [-L, L]
    values: np.ndarray        # complex samples
    half_width: float

    @property
    def n(self) -> int:
        return len(self.grid)


def sample_line(fn, half_width: float, n: int) -> LineFunction:
    if n < 16:
        raise NumericalError("BAD_LINE_GRID", f"need n >= 16, got {n}")
    grid = np.linspace(-half_width, half_width, n)
    vals = np.asarray(fn(grid), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("BAD_LINE_GRID", "non-finite samples")
    return LineFunction(grid=grid, values=vals, half_width=float(half_width))


def hermite_function(k: int, y: np.ndarray, hbar: float) -> np.ndarray:
    """Orthonormal oscillator eigenfunction (stable normalized recurrence)."""
    t = np.asarray(y, dtype=float) / math.sqrt(hbar)
    h_prev = np.zeros_like(t)
    h = (math.pi * hbar) ** -0.25 * np.exp(-0.5 * t * t)
    for j in range(k):
        h_next = math.sqrt(2.0 / (j + 1)) * t * h - math.sqrt(j / (j + 1.0)) * h_prev
        h_prev, h = h, h_next
    return h


@dataclass(frozen=True)
class ZGrid:
    re: np.ndarray
    im: np.ndarray

    def mesh(self) -> np.ndarray:
        return self.re[:, None] + 1j * self.im[None, :]

    @property
    def steps(self) -> tuple[float, float]:
        return float(self.re[1] - self.re[0]), float(self.im[1] - self.im[0])


def square_grid(radius: float, n: int = 161) -> ZGrid:
    ax = np.linspace(-radius, radius, n)
    return ZGrid(re=ax, im=ax.copy())


def default_grid_radius(lam_scale: float, hbar: float = 0.1) -> float:
    """Disc radius covering the curve image |z| = sqrt(lam/2) with a tail margin.

    3*max(1, sqrt(lam)) suffices at small hbar; the sqrt(hbar) term keeps the
    boundary mass below the truncation threshold when hbar is of order one.
    """
    lam = max(lam_scale, 0.0)
    return max(3.0 * max(1.0, math.sqrt(lam)),
               math.sqrt(2.0 * lam) + 6.5 * math.sqrt(hbar))


@dataclass
class BargmannField:
    zgrid: ZGrid
    values: np.ndarray        # shape (len(re), len(im)), complex
    hbar: float

    def weighted_modulus(self) -> np.ndarray:
        z = self.zgrid.mesh()
        return np.abs(self.values) * np.exp(-np.abs(z) ** 2 / (2 * self.hbar))


def bargmann_transform(v: LineFunction, hbar: float, zgrid: ZGrid) -> BargmannField:
    """Kernel quadrature of the transform on the rectangular lattice.

    The y-integral runs over the sample grid restricted to the Gaussian
    window; the uniform trapezoid rule there is spectrally accurate because
    the integrand is analytic and fully decayed at the window edges.
    """
    vmax = float(np.abs(v.values).max())
    if vmax == 0.0:
        return BargmannField(zgrid=zgrid, values=np.zeros((len(zgrid.re), len(zgrid.im)),
                                                          dtype=complex), hbar=hbar)
    edge = max(abs(v.values[0]), abs(v.values[-1]))
    if edge > DECAY_REQ * vmax:
        raise NumericalError("DOMAIN_TOO_SMALL",
                             f"boundary value {edge:.3g} exceeds {DECAY_REQ} * max")
    peak = (np.abs(zgrid.re).max() ** 2 + np.abs(zgrid.im).max() ** 2) / (2 * hbar)
    if peak > MAX_EXPONENT:
        raise NumericalError("OVERFLOW_RISK",
                             f"lattice needs exponent {peak:.0f}; shrink the grid or raise hbar")

    window = 10.0 * math.sqrt(hbar)
    dy = float(v.grid[1] - v.grid[0])
    pref = (math.pi * hbar) ** -0.75 * dy
    out = np.empty((len(zgrid.re), len(zgrid.im)), dtype=complex)
    im_row = zgrid.im[None, :]
    for i, xr in enumerate(zgrid.re):
        center = math.sqrt(2.0) * xr
        lo = np.searchsorted(v.grid, center - window)
        hi = np.searchsorted(v.grid, center + window)
        if hi - lo < 4:
            out[i, :] = 0.0
            continue
        y = v.grid[lo:hi][None, :]
        vals = v.values[lo:hi][None, :]
        z = xr + 1j * im_row.T          # (n_im, 1)
        expo = (-0.5 * z * z + math.sqrt(2.0) * y * z - 0.5 * y * y) / hbar
        out[i, :] = pref * np.sum(np.exp(expo) * vals, axis=1)
    return BargmannField(zgrid=zgrid, values=out, hbar=hbar)


def phi0_norm(field: BargmannField) -> float:
    """Weighted L2 norm: 2D trapezoid of |u|^2 exp(-|z|^2/hbar) over the lattice."""
    w = field.weighted_modulus() ** 2
    wmax = float(w.max())
    if wmax > 0.0:
        boundary = max(w[0, :].max(), w[-1, :].max(), w[:, 0].max(), w[:, -1].max())
        if boundary > BOUNDARY_REQ * wmax:
            raise NumericalError("TRUNCATION",
                                 f"boundary mass {boundary / wmax:.3g} of peak; enlarge the lattice")
    val = np.trapz(np.trapz(w, field.zgrid.im, axis=1), field.zgrid.re)
    return float(math.sqrt(max(val, 0.0)))


def phi0_inner(f1: BargmannField, f2: BargmannField) -> complex:
    """Weighted L2 pairing of two fields on a common lattice."""
    if f1.zgrid.re.shape != f2.zgrid.re.shape or f1.hbar != f2.hbar:
        raise NumericalError("GRID_MISMATCH", "fields live on different lattices")
    z = f1.zgrid.mesh()
    w = f1.values * np.conj(f2.values) * np.exp(-np.abs(z) ** 2 / f1.hbar)
    return complex(np.trapz(np.trapz(w, f1.zgrid.im, axis=1), f1.zgrid.re))


def uncertainty_check(field: BargmannField) -> float:
    """Max of |u(z)| exp(-|z|^2/(2 hbar)) over the sup-norm bound constant times the norm."""
    norm = phi0_norm(field)
    if norm == 0.0:
        return 0.0
    bound = 2.0 ** 0.25 / math.sqrt(math.pi * field.hbar)
    return float(field.weighted_modulus().max() / (bound * norm))


def cr_residual(field: BargmannField) -> float:
    """Largest centered-difference Cauchy-Riemann defect, relative to the local
    derivative magnitude (points with negligible derivative are skipped)."""
    u = field.values
    dx, dy = field.zgrid.steps
    du_dx = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dx)
    du_dy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dy)
    resid = np.abs(du_dx + 1j * du_dy)
    scale = np.abs(du_dx) + np.abs(du_dy)
    top = float(scale.max())
    if top == 0.0:
        return 0.0
    mask = scale > 1e-6 * top
    return float((resid[mask] / scale[mask]).max())
