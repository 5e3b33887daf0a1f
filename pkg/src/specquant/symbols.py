"""Polynomial Hamiltonian symbols p(x, xi) and their standing assumptions.

A symbol is a real-coefficient bivariate polynomial.  Restricting to
polynomials gives an exact holomorphic extension to complex arguments, which
the rest of the toolkit relies on: the Bargmann-side symbol is obtained by
substituting the canonical complex change of variables

    p_B(z, zeta) = p((z + i*zeta)/sqrt(2), (zeta + i*z)/sqrt(2)),

and the map kappa0(x, xi) = ((x - i*xi)/sqrt(2), (xi - i*x)/sqrt(2)) carries
the real phase space onto the graph {(z, -i*conj(z))} where p_B restricts to
the real symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationFailure

SQRT2 = math.sqrt(2.0)

# |grad p| floor below which a level curve counts as irregular (below the
# integrator noise floor).
GRADIENT_FLOOR = 1e-6


@dataclass(frozen=True)
class SymbolDef:
    """Real bivariate polynomial sum of coef * x**dx * xi**dxi terms."""

    terms: tuple[tuple[float, int, int], ...]
    total_degree: int
    name: str = "custom"

    def coeff_matrix(self) -> np.ndarray:
        """Dense coefficient array c[dx, dxi]."""
        c = np.zeros((self.total_degree + 1, self.total_degree + 1))
        for coef, dx, dxi in self.terms:
            c[dx, dxi] += coef
        return c


def make_symbol(terms, name: str = "custom") -> SymbolDef:
    clean = []
    for coef, dx, dxi in terms:
        coef = float(coef)
        if not math.isfinite(coef):
            raise ValidationFailure("BAD_SYMBOL", f"non-finite coefficient in {name}")
        if dx < 0 or dxi < 0 or dx != int(dx) or dxi != int(dxi):
            raise ValidationFailure("BAD_SYMBOL", "degrees must be nonnegative integers")
        if coef != 0.0:
            clean.append((coef, int(dx), int(dxi)))
    if not clean or all(dx + dxi == 0 for _, dx, dxi in clean):
        raise ValidationFailure("BAD_SYMBOL", "need at least one term of positive degree")
    degree = max(dx + dxi for _, dx, dxi in clean)
    return SymbolDef(terms=tuple(clean), total_degree=degree, name=name)


def harmonic_symbol() -> SymbolDef:
    return make_symbol([(1.0, 2, 0), (1.0, 0, 2)], name="harmonic")


def quartic_symbol() -> SymbolDef:
    return make_symbol([(1.0, 0, 2), (1.0, 4, 0)], name="quartic")


def schrodinger_symbol(potential_coeffs) -> SymbolDef:
    """xi**2 + V(x) with V given by ascending power coefficients."""
    terms = [(1.0, 0, 2)]
    terms += [(c, k, 0) for k, c in enumerate(potential_coeffs)]
    return make_symbol(terms, name="schrodinger")


SYMBOL_CATALOG = {
    "harmonic": harmonic_symbol,
    "quartic": quartic_symbol,
}


# ---------------------------------------------------------------------------
# evaluation


def eval(sym: SymbolDef, x, xi):
    """Evaluate p(x, xi); accepts scalars or numpy arrays."""
    c = sym.coeff_matrix()
    # Horner in x of polynomials that are Horner in xi.
    acc = 0.0
    for dx in range(c.shape[0] - 1, -1, -1):
        row = 0.0
        for dxi in range(c.shape[1] - 1, -1, -1):
            row = row * xi + c[dx, dxi]
        acc = acc * x + row
    return acc


def grad(sym: SymbolDef, x, xi):
    """Exact (dp/dx, dp/dxi) by term-wise differentiation."""
    return eval(_dx(sym), x, xi), eval(_dxi(sym), x, xi)


def _dx(sym: SymbolDef) -> SymbolDef:
    terms = [(coef * dx, dx - 1, dxi) for coef, dx, dxi in sym.terms if dx > 0]
    terms = terms or [(0.0, 0, 0), (0.0, 1, 0)]
    return SymbolDef(tuple(terms), max(1, sym.total_degree - 1), sym.name + "_dx")


def _dxi(sym: SymbolDef) -> SymbolDef:
    terms = [(coef * dxi, dx, dxi - 1) for coef, dx, dxi in sym.terms if dxi > 0]
    terms = terms or [(0.0, 0, 0), (0.0, 1, 0)]
    return SymbolDef(tuple(terms), max(1, sym.total_degree - 1), sym.name + "_dxi")


def eval_complex(sym: SymbolDef, z, zeta):
    """Bargmann-side symbol p_B(z, zeta) = p((z+i*zeta)/sqrt2, (zeta+i*z)/sqrt2)."""
    u = (z + 1j * zeta) / SQRT2
    v = (zeta + 1j * z) / SQRT2
    return eval(sym, u, v)


def dzeta_complex(sym: SymbolDef, z, zeta):
    """d/dzeta of the Bargmann-side symbol (chain rule through the rotation)."""
    u = (z + 1j * zeta) / SQRT2
    v = (zeta + 1j * z) / SQRT2
    px = eval(_dx(sym), u, v)
    pxi = eval(_dxi(sym), u, v)
    return (pxi + 1j * px) / SQRT2


def dz_complex(sym: SymbolDef, z, zeta):
    """d/dz of the Bargmann-side symbol."""
    u = (z + 1j * zeta) / SQRT2
    v = (zeta + 1j * z) / SQRT2
    px = eval(_dx(sym), u, v)
    pxi = eval(_dxi(sym), u, v)
    return (px + 1j * pxi) / SQRT2


def kappa0(x, xi):
    """Phase-space identification (x, xi) -> (z, zeta) on the graph Lambda."""
    return (x - 1j * xi) / SQRT2, (xi - 1j * x) / SQRT2


def order_function(sym: SymbolDef, x, xi):
    """Polynomial-growth order function <(x, xi)>**total_degree."""
    return (1.0 + x * x + xi * xi) ** (sym.total_degree / 2.0)


# ---------------------------------------------------------------------------
# standing assumptions


@dataclass(frozen=True)
class GridSpec:
    """Scan resolution for the assumption checks."""

    half_width: float = 20.0
    n: int = 81
    level_count: int = 5
    ratio_cap: float = 1e6
    min_n: int = 16


@dataclass
class AssumptionReport:
    h1_sublevel_compact: bool
    h2_regular_connected: bool
    h3_elliptic: bool
    witnesses: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.h1_sublevel_compact and self.h2_regular_connected and self.h3_elliptic


def validate_assumptions(sym: SymbolDef, e1: float, e2: float, delta: float,
                         grid: GridSpec | None = None) -> AssumptionReport:
    """Desk-scale check of the localisation / regularity / ellipticity assumptions.

    H1 is decided on a bounding box: the sublevel set {p <= e2+delta} must be
    nonempty and must not touch the box boundary.  H2 traces the level curve at
    sampled energies and demands a nonvanishing gradient along it plus a single
    closed component (every grid crossing of the level must lie on the traced
    curve).  H3 samples (C+p)/m and m/(C+p) with m = <(x, xi)>**deg on the box.
    """
    if grid is None:
        grid = GridSpec()
    if not (e1 < e2) or delta <= 0:
        raise ValidationFailure("BAD_WINDOW", f"need e1 < e2 and delta > 0, got ({e1}, {e2}, {delta})")
    if grid.n < grid.min_n:
        raise NumericalError("GRID_TOO_COARSE", f"grid n={grid.n} below floor {grid.min_n}")

    witnesses: list = []
    r = grid.half_width
    axis = np.linspace(-r, r, grid.n)
    xg, xig = np.meshgrid(axis, axis, indexing="ij")
    pg = eval(sym, xg, xig)

    # --- H1: bounded sublevel set inside the box
    boundary = np.zeros_like(pg, dtype=bool)
    boundary[0, :] = boundary[-1, :] = boundary[:, 0] = boundary[:, -1] = True
    ceiling = e2 + delta
    nonempty = bool(pg.min() <= ceiling)
    boundary_min = float(pg[boundary].min())
    h1 = nonempty and boundary_min > ceiling
    if not nonempty:
        witnesses.append((ceiling, "sublevel set empty on scan grid"))
    if boundary_min <= ceiling:
        idx = np.unravel_index(np.argmin(np.where(boundary, pg, np.inf)), pg.shape)
        witnesses.append(((float(xg[idx]), float(xig[idx])),
                          f"p={boundary_min:.6g} <= E2+delta on box boundary, sublevel not confined"))

    # --- H2: regular connected energy curves at sampled energies.
    # Scan a refined box sized to the sublevel set; the coarse H1 box is far
    # too coarse to decide whether a degenerate point sits on a level.
    sub = pg <= ceiling
    if sub.any():
        r2 = 1.5 * max(float(np.abs(xg[sub]).max()), float(np.abs(xig[sub]).max()),
                       2 * r / (grid.n - 1))
    else:
        r2 = r
    axis2 = np.linspace(-r2, r2, grid.n)
    xf, xif = np.meshgrid(axis2, axis2, indexing="ij")
    pf = eval(sym, xf, xif)
    gx, gxi = grad(sym, xf, xif)
    gnorm = np.hypot(gx, gxi)
    cell = 2 * r2 / (grid.n - 1)
    hess_scale = max(np.abs(np.diff(pf, 2, axis=0)).max(),
                     np.abs(np.diff(pf, 2, axis=1)).max()) / cell ** 2 + 1.0
    band = gnorm * cell + 2.0 * hess_scale * cell ** 2
    levels = np.linspace(e1 - delta, e2 + delta, grid.level_count)
    h2 = True
    for lam in levels:
        degenerate = (np.abs(pf - lam) <= band) & (gnorm < GRADIENT_FLOOR)
        if degenerate.any():
            idx = np.unravel_index(np.argmax(degenerate), degenerate.shape)
            witnesses.append(((float(xf[idx]), float(xif[idx])),
                              f"grad p vanishes on level {lam:.6g}"))
            h2 = False
            continue
        ok, wit = _level_connected(sym, lam, axis2, pf)
        if not ok:
            witnesses.append(wit)
            h2 = False

    # --- H3: two-sided comparability of C + p with the order function
    shift = max(1.0, -float(pg.min())) + 1.0
    mg = order_function(sym, xg, xig)
    val = shift + pg
    if (val <= 0).any():
        idx = np.unravel_index(np.argmin(val), val.shape)
        witnesses.append(((float(xg[idx]), float(xig[idx])), "C + p not positive on grid"))
        h3 = False
    else:
        hi = float((val / mg).max())
        lo = float((mg / val).max())
        h3 = max(hi, lo) <= grid.ratio_cap
        if not h3:
            worst = (val / mg) if hi >= lo else (mg / val)
            idx = np.unravel_index(np.argmax(worst), worst.shape)
            witnesses.append(((float(xg[idx]), float(xig[idx])),
                              f"ellipticity ratio {max(hi, lo):.3g} exceeds cap {grid.ratio_cap:.3g}"))

    return AssumptionReport(h1, h2, h3, witnesses)


def _level_connected(sym: SymbolDef, lam: float, axis: np.ndarray, pg: np.ndarray):
    """Trace the level curve and verify every grid crossing lies on it."""
    from . import geometry  # local import to avoid a module cycle

    crossings = _grid_crossings(sym, lam, axis, pg)
    if not crossings:
        return False, (lam, "level set not seen by scan grid")
    try:
        curve = geometry.trace_level_curve(sym, lam, tol=1e-10)
    except NumericalError as exc:
        return False, (lam, f"tracing failed: {exc.code}: {exc.detail}")
    pts = curve.points
    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]))
    tol = max(0.05 * span, 2 * (axis[1] - axis[0]) * 0.05)
    for cx, cxi in crossings:
        d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cxi).min()
        if d > tol:
            return False, ((cx, cxi), f"level {lam:.6g} has a component away from the traced curve")
    return True, None


def _grid_crossings(sym: SymbolDef, lam: float, axis: np.ndarray, pg: np.ndarray):
    """Sign-change points of p - lam along grid rows and columns, refined by bisection."""
    out = []
    f = pg - lam
    n = len(axis)
    for i in range(n):
        for j in range(n - 1):
            if f[i, j] == 0.0:
                out.append((float(axis[i]), float(axis[j])))
            if f[i, j] * f[i, j + 1] < 0:
                a, b = axis[j], axis[j + 1]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if (eval(sym, axis[i], m) - lam) * (eval(sym, axis[i], a) - lam) <= 0:
                        b = m
                    else:
                        a = m
                out.append((float(axis[i]), float(0.5 * (a + b))))
            if f[j, i] * f[j + 1, i] < 0:
                a, b = axis[j], axis[j + 1]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if (eval(sym, m, axis[i]) - lam) * (eval(sym, a, axis[i]) - lam) <= 0:
                        b = m
                    else:
                        a = m
                out.append((float(0.5 * (a + b)), float(axis[i])))
    return out
