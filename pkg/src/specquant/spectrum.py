"""Reference eigenvalues of the symmetrically quantized operator.

Two discretizations provide ground truth for the quantization-rule
predictions.  Split symbols g(xi) + V(x) use a Fourier pseudospectral matrix
on a periodic box (each factor is diagonal in its own representation, so the
only errors are box truncation and grid aliasing).  General polynomial
symbols use a Galerkin matrix in an hbar-scaled Hermite basis whose entries
are phase-space pairings of the symbol with cross-Wigner functions, computed
by Gauss-Hermite quadrature that is exact for polynomial data.

Eigenvalues come from a cyclic Jacobi eigensolver (deterministic sweep order,
threshold pivoting); windowed values are certified by agreement between two
resolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import NumericalError
from .symbols import SymbolDef

CERTIFY_TOL = 1e-8


@dataclass(frozen=True)
class DiscretizationSpec:
    method: str = "pseudospectral"        # or "hermite_galerkin"
    box_halfwidth: float = 12.0
    grid_size: int = 512
    basis_size: int = 96
    hbar: float = 0.1
    quadrature_order: int = 0             # 0: choose the exactness order

    def __post_init__(self):
        if self.method not in ("pseudospectral", "hermite_galerkin"):
            raise NumericalError("BAD_METHOD", self.method)
        n = self.grid_size
        if n < 64 or (n & (n - 1)) != 0:
            raise NumericalError("BAD_GRID_SIZE", f"grid size {n} must be a power of two >= 64")
        if self.basis_size < 16:
            raise NumericalError("BAD_BASIS_SIZE", f"basis size {self.basis_size} < 16")
        if self.box_halfwidth <= 0 or self.hbar <= 0:
            raise NumericalError("BAD_DISCRETIZATION", "need positive box and hbar")


@dataclass
class ReferenceSpectrum:
    eigenvalues: np.ndarray          # sorted, restricted to the validity window
    validity_window: tuple
    spec: DiscretizationSpec


def symbols_eval_grid(sym: SymbolDef, axis: np.ndarray) -> np.ndarray:
    """p evaluated on the tensor grid axis x axis (x down rows, xi across)."""
    c = sym.coeff_matrix()
    out = np.zeros((len(axis), len(axis)))
    for dx in range(c.shape[0]):
        row = np.zeros_like(axis)
        for dxi in range(c.shape[1] - 1, -1, -1):
            row = row * axis + c[dx, dxi]
        out += np.outer(axis ** dx, row)
    return out


def split_symbol(sym: SymbolDef):
    """Coefficients (g in xi, V in x) of a split symbol; NOT_SPLIT otherwise."""
    g = np.zeros(sym.total_degree + 1)
    v = np.zeros(sym.total_degree + 1)
    for coef, dx, dxi in sym.terms:
        if dx > 0 and dxi > 0:
            raise NumericalError("NOT_SPLIT", f"mixed term x^{dx} xi^{dxi} in {sym.name}")
        if dxi > 0:
            g[dxi] += coef
        else:
            v[dx] += coef
    return g, v


def pseudospectral_matrix(g_coeffs, v_coeffs, spec: DiscretizationSpec) -> np.ndarray:
    """Fourier kinetic term plus diagonal potential on a periodic grid."""
    g = np.asarray(g_coeffs, dtype=float)
    if any(c != 0.0 for c in g[1::2]):
        raise NumericalError("NOT_SPLIT", "kinetic polynomial must be even in xi for a real matrix")
    n, ell, hbar = spec.grid_size, spec.box_halfwidth, spec.hbar
    x = -ell + (2 * ell / n) * np.arange(n)
    freq = 2 * np.pi * np.fft.fftfreq(n, d=2 * ell / n)
    gvals = np.polyval(g[::-1], hbar * freq)
    first = np.fft.ifft(gvals)
    if np.abs(first.imag).max() > 1e-12 * (1 + np.abs(first.real).max()):
        raise NumericalError("NOT_SPLIT", "kinetic matrix is not real")
    t = first.real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    h = t[idx]
    h[np.arange(n), np.arange(n)] += np.polyval(np.asarray(v_coeffs, dtype=float)[::-1], x)
    return 0.5 * (h + h.T)


def hermite_weyl_matrix(sym: SymbolDef, spec: DiscretizationSpec) -> np.ndarray:
    """Galerkin matrix <h_m, Op(p) h_n> through the cross-Wigner pairing.

    The cross-Wigner transform of two hbar-scaled Hermite functions is, with
    beta = (x + i xi)/sqrt(hbar), r = 2|beta|^2 and k = m - n >= 0,

        W(h_n, h_m) = (-1)^n (beta/|beta|)^k  psi_k[n](r) / (pi hbar),

    where psi_k[n] = sqrt(n!/(n+k)!) r^(k/2) e^(-r/2) L_n^k(r) are bounded
    radial functions generated by a forward-stable three-term recurrence in n
    (one run per diagonal k).  The pairing with a polynomial symbol uses 2D
    Gauss-Hermite quadrature, exact at the chosen order; weights are combined
    with the Gaussian in the log domain so every node contribution is O(1).
    """
    m_dim = spec.basis_size
    if m_dim > 200:
        raise NumericalError("BAD_BASIS_SIZE", "hermite basis capped at 200")
    if any(dxi % 2 for _, _, dxi in sym.terms):
        raise NumericalError("NOT_REPRESENTABLE",
                             "odd momentum degree gives a non-real Galerkin matrix")
    hbar = spec.hbar
    deg = sym.total_degree
    q = spec.quadrature_order or (m_dim + deg + 2)
    if q < m_dim + deg // 2 + 1:
        raise NumericalError("QUADRATURE_ORDER_TOO_LOW",
                             f"order {q} below exactness threshold {m_dim + deg // 2 + 1}")
    nodes, weights = np.polynomial.hermite.hermgauss(q)

    a = nodes[:, None]
    b = nodes[None, :]
    r = 2.0 * (a * a + b * b).ravel()
    absb = np.sqrt(0.5 * r)
    unit = np.ones_like(r, dtype=complex)
    nz = absb > 0
    unit[nz] = ((a + 1j * b).ravel()[nz]) / absb[nz]
    # bare quadrature weights exp(log w + x^2) stay finite at every order
    logw = np.log(weights)
    wbare = np.exp((logw + nodes ** 2)[:, None] + (logw + nodes ** 2)[None, :]).ravel()
    pvals = symbols_eval_grid(sym, math.sqrt(hbar) * nodes).ravel()
    wp = wbare * pvals / math.pi

    out = np.zeros((m_dim, m_dim))
    defect = 0.0
    sign = 1.0 - 2.0 * (np.arange(m_dim) % 2)
    for k in range(m_dim):
        count = m_dim - k
        with np.errstate(divide="ignore"):
            logseed = -0.5 * r + 0.5 * k * np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
        psi_prev = np.zeros_like(r)
        psi = np.exp(logseed - 0.5 * math.lgamma(k + 1))
        if k > 0:
            psi[r == 0.0] = 0.0
        phase = unit ** k
        wc = wp * phase.real
        ws = wp * phase.imag
        for n in range(count):
            val = sign[n] * float(psi @ wc)
            out[n, n + k] = val
            out[n + k, n] = val
            defect = max(defect, abs(sign[n] * float(psi @ ws)))
            if n + 1 < count:
                nxt = ((2 * n + k + 1 - r) * psi - math.sqrt(n * (n + k)) * psi_prev)
                nxt /= math.sqrt((n + 1) * (n + k + 1))
                psi_prev, psi = psi, nxt
    scale = float(np.abs(out).max()) + 1.0
    if defect > 1e-8 * scale:
        raise NumericalError("QUADRATURE_ORDER_TOO_LOW",
                             f"imaginary-part defect {defect:.3g} exceeds 1e-8 (order {q})")
    return 0.5 * (out + out.T)


@numba.njit(cache=True, fastmath=True)
def _off_mass(a):  # pragma: no cover - compiled
    n = a.shape[0]
    off = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            off += a[i, j] * a[i, j]
    return math.sqrt(2.0 * off)


@numba.njit(cache=True, fastmath=True)
def _jacobi_sweeps(a, tol, max_sweeps):  # pragma: no cover - compiled
    n = a.shape[0]
    skip = tol / (10.0 * n)
    sweeps = 0
    for _ in range(max_sweeps):
        off = _off_mass(a)
        if off <= tol:
            return sweeps, off
        # rotations below thresh are deferred to later sweeps (threshold pivoting)
        thresh = max(off / (n * 4.0), skip)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                cc = 1.0 / math.sqrt(t * t + 1.0)
                ss = t * cc
                for k in range(n):
                    t1 = a[p, k]
                    t2 = a[q, k]
                    a[p, k] = cc * t1 - ss * t2
                    a[q, k] = ss * t1 + cc * t2
                for k in range(n):
                    t1 = a[k, p]
                    t2 = a[k, q]
                    a[k, p] = cc * t1 - ss * t2
                    a[k, q] = ss * t1 + cc * t2
        sweeps += 1
    return sweeps, _off_mass(a)


def eigensolve_sym(matrix: np.ndarray, tol: float | None = None,
                   max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(matrix, dtype=float, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericalError("NOT_SYMMETRIC", "matrix must be square")
    asym = float(np.abs(a - a.T).max())
    if asym > 1e-8 * (1.0 + float(np.abs(a).max())):
        raise NumericalError("NOT_SYMMETRIC", f"asymmetry {asym:.3g} exceeds 1e-8")
    a = 0.5 * (a + a.T)
    if tol is None:
        tol = 1e-12 * (float(np.linalg.norm(a)) + 1.0)
    sweeps, off = _jacobi_sweeps(a, tol, max_sweeps)
    if off > tol:
        raise NumericalError("NO_CONVERGENCE",
                             f"off-diagonal mass {off:.3g} > {tol:.3g} after {sweeps} sweeps")
    return np.sort(np.diag(a))


def _matrix_for(sym: SymbolDef, spec: DiscretizationSpec) -> np.ndarray:
    if spec.method == "pseudospectral":
        g, v = split_symbol(sym)
        return pseudospectral_matrix(g, v, spec)
    return hermite_weyl_matrix(sym, spec)


def reference_spectrum(sym: SymbolDef, spec: DiscretizationSpec, e1: float, e2: float,
                       certify: bool = True) -> ReferenceSpectrum:
    """Windowed eigenvalues, certified by a resolution-doubling comparison."""
    eigs = eigensolve_sym(_matrix_for(sym, spec))
    windowed = eigs[(eigs > e1) & (eigs < e2)]
    if certify:
        if spec.method == "pseudospectral":
            finer = replace(spec, grid_size=2 * spec.grid_size)
        else:
            finer = replace(spec, basis_size=spec.basis_size + 32, quadrature_order=0)
        eigs2 = eigensolve_sym(_matrix_for(sym, finer))
        for lam in windowed:
            gap = float(np.abs(eigs2 - lam).min())
            if gap > CERTIFY_TOL:
                raise NumericalError("WINDOW_NOT_CERTIFIED",
                                     f"eigenvalue {lam:.10g} moves {gap:.3g} under refinement")
    return ReferenceSpectrum(eigenvalues=windowed, validity_window=(e1, e2), spec=spec)
