"""Exact truncated calculus of classical analytic symbols.

A formal symbol is a double series  sum_n sum_d  a[n][d] * hbar**n * u**d
with u = (lam - center), truncated at hbar-order N and degree D.  Coefficient
arithmetic is exact rational when the inputs are rational (Fractions, or
gmpy2 rationals when available) and 64-bit float otherwise; identities such as
the Lagrange-inversion round trip are then exact through the retained orders.

Growth bookkeeping follows the sup |a_n| <= C**(n+1) * n**n estimate: symbols
may carry a growth constant, resummation truncates at floor(1/(C*hbar)) terms,
and the coefficient sup-norms are taken over a reference disc (boundary
samples; sound for polynomials by the maximum principle).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import NumericalError

try:  # gmpy2 rationals are drop-in and considerably faster
    from gmpy2 import mpq as _RAT
except ImportError:  # pragma: no cover
    _RAT = Fraction

DEFAULT_N = 12
DEFAULT_D = 12
_RATIONAL_TYPES = (Fraction, int, type(_RAT(1)))


def rational(num, den: int = 1):
    """The exact rational scalar used throughout this module."""
    if isinstance(num, str):
        f = Fraction(num)
        return _RAT(f.numerator, f.denominator) * _RAT(1, den)
    return _RAT(num, den)


def is_rational_scalar(x) -> bool:
    return isinstance(x, _RATIONAL_TYPES)


def _zero(rat: bool):
    return _RAT(0) if rat else 0.0


def _to_float(x):
    return complex(x) if isinstance(x, complex) else float(x)


@dataclass(frozen=True)
class FormalSymbol:
    """Truncated double series; coeffs[n][d] multiplies hbar**n * (lam-center)**d."""

    center: object
    coeffs: tuple            # tuple of tuples, shape (N+1, D+1)
    rational: bool
    growth_c: float | None = None

    @property
    def order_n(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree_d(self) -> int:
        return len(self.coeffs[0]) - 1

    def row(self, n: int):
        return self.coeffs[n]

    def constant_term(self):
        return self.coeffs[0][0]

    def with_growth(self, c: float) -> "FormalSymbol":
        return replace(self, growth_c=float(c))


@dataclass(frozen=True)
class PseudonormValue:
    rho: float
    value: float
    finite: bool = True


def formal_symbol(coeffs, center=0, n_order: int | None = None,
                  degree: int | None = None) -> FormalSymbol:
    """Build a symbol from a coefficient table, padding to the requested caps."""
    rows = [list(r) for r in coeffs]
    rat = all(is_rational_scalar(c) for r in rows for c in r) and is_rational_scalar(center)
    n_order = (len(rows) - 1) if n_order is None else n_order
    degree = max(len(r) for r in rows) - 1 if degree is None else degree
    z = _zero(rat)
    table = []
    for n in range(n_order + 1):
        row = rows[n] if n < len(rows) else []
        row = list(row[:degree + 1]) + [z] * (degree + 1 - len(row))
        if rat:
            row = [_RAT(c) if not isinstance(c, type(_RAT(1))) else c for c in row]
        table.append(tuple(row))
    if rat:
        center = _RAT(center) if not isinstance(center, type(_RAT(1))) else center
    return FormalSymbol(center=center, coeffs=tuple(table), rational=rat)


def zero_symbol(n_order: int = DEFAULT_N, degree: int = DEFAULT_D, center=0,
                rat: bool = True) -> FormalSymbol:
    z = _zero(rat)
    return formal_symbol([[z] * (degree + 1) for _ in range(n_order + 1)],
                         center=center if rat else float(center))


def identity_symbol(center=0, n_order: int = DEFAULT_N, degree: int = DEFAULT_D) -> FormalSymbol:
    """The symbol u -> center + (u - center)."""
    rat = is_rational_scalar(center)
    sym = zero_symbol(n_order, degree, center=center, rat=rat)
    rows = [list(r) for r in sym.coeffs]
    one = _RAT(1) if rat else 1.0
    rows[0][0] = center
    rows[0][1] = one
    return replace(sym, coeffs=tuple(tuple(r) for r in rows))


# ---------------------------------------------------------------------------
# low-level truncated-ring arithmetic (lists of rows)


def _poly_mul(a, b, dcap: int, z):
    out = [z] * (dcap + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > dcap:
            continue
        top = min(len(b) - 1, dcap - i)
        for j in range(top + 1):
            bj = b[j]
            if bj != 0:
                out[i + j] = out[i + j] + ai * bj
    return out


def _table_mul(ta, tb, ncap: int, dcap: int, z):
    out = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    for n in range(ncap + 1):
        acc = out[n]
        for k in range(min(n, len(ta) - 1) + 1):
            m = n - k
            if m >= len(tb):
                continue
            part = _poly_mul(ta[k], tb[m], dcap, z)
            for d in range(dcap + 1):
                if part[d] != 0:
                    acc[d] = acc[d] + part[d]
    return out


def _table_recip(t, ncap: int, dcap: int, z, one):
    """Newton iteration for 1/t in the ring truncated at (ncap, dcap)."""
    lead = t[0][0]
    if lead == 0:
        raise NumericalError("NOT_INVERTIBLE", "series has vanishing leading coefficient")
    r = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    r[0][0] = one / lead if not isinstance(lead, float) else 1.0 / lead
    steps = max(1, math.ceil(math.log2(ncap + dcap + 2)))
    for _ in range(steps + 1):
        tr = _table_mul(t, r, ncap, dcap, z)
        two_minus = [[(one + one if n == 0 and d == 0 else z) - tr[n][d]
                      for d in range(dcap + 1)] for n in range(ncap + 1)]
        r = _table_mul(r, two_minus, ncap, dcap, z)
    return r


def _tables(sym: FormalSymbol):
    return [list(r) for r in sym.coeffs]


def _freeze(table, center, rat, growth=None):
    return FormalSymbol(center=center, coeffs=tuple(tuple(r) for r in table),
                        rational=rat, growth_c=growth)


def _common_mode(a: FormalSymbol, b: FormalSymbol):
    rat = a.rational and b.rational
    if rat:
        return a, b, True
    return _to_float_symbol(a), _to_float_symbol(b), False


def _to_float_symbol(s: FormalSymbol) -> FormalSymbol:
    if not s.rational:
        return s
    table = [[_to_float(c) for c in r] for r in s.coeffs]
    return _freeze(table, _to_float(s.center), False, s.growth_c)


# ---------------------------------------------------------------------------
# public operations


def product(a: FormalSymbol, b: FormalSymbol) -> FormalSymbol:
    """Cauchy product in hbar, polynomial product in (lam - center)."""
    a, b, rat = _common_mode(a, b)
    if not _centers_match(a.center, b.center, rat):
        raise NumericalError("CENTER_MISMATCH",
                             f"centers {a.center} and {b.center} differ")
    ncap = min(a.order_n, b.order_n)
    dcap = a.degree_d + b.degree_d
    z = _zero(rat)
    table = _table_mul(_tables(a), _tables(b), ncap, dcap, z)
    return _freeze(table, a.center, rat)


def _centers_match(ca, cb, rat, tol: float = 1e-9) -> bool:
    if rat:
        return ca == cb
    return abs(_to_float(ca) - _to_float(cb)) <= tol


def coefficient_sup(sym: FormalSymbol, n: int, disc_radius: float = 1.0,
                    n_boundary: int = 64) -> float:
    """Sup of |a_n| over the reference disc, via boundary samples."""
    row = np.array([_to_float(c) for c in sym.row(n)], dtype=complex)
    theta = np.linspace(0.0, 2 * np.pi, n_boundary, endpoint=False)
    pts = disc_radius * np.exp(1j * theta)
    vals = np.polyval(row[::-1], pts)
    return float(np.abs(vals).max())


def pseudonorm(sym: FormalSymbol, rho: float, disc_radius: float = 1.0) -> PseudonormValue:
    """Truncated Borel transform sum_k sup|a_k| rho**k / k!."""
    if rho <= 0:
        raise NumericalError("BAD_RHO", f"rho = {rho}")
    total = 0.0
    for k in range(sym.order_n + 1):
        total += coefficient_sup(sym, k, disc_radius) * rho ** k / math.factorial(k)
    return PseudonormValue(rho=float(rho), value=total, finite=math.isfinite(total))


def compose(outer: FormalSymbol, inner: FormalSymbol,
            center_tol: float = 1e-9) -> FormalSymbol:
    """Substitute the inner symbol into the outer one, hbar-graded and truncated.

    The outer symbol must be centered at the inner symbol's leading value
    inner(0, center); the result lives in the inner variable.
    """
    outer, inner, rat = _common_mode(outer, inner)
    lead = inner.constant_term()
    if rat:
        if lead != outer.center:
            raise NumericalError("CENTER_MISMATCH",
                                 f"outer center {outer.center} != inner value {lead}")
    elif abs(_to_float(lead) - _to_float(outer.center)) > center_tol:
        raise NumericalError("CENTER_MISMATCH",
                             f"|{lead} - {outer.center}| > {center_tol}")
    ncap = min(outer.order_n, inner.order_n)
    dcap = inner.degree_d
    z = _zero(rat)
    one = _RAT(1) if rat else 1.0

    # u = inner - outer.center, so u has vanishing (0,0) entry up to center slack
    u = _tables(inner)
    u[0][0] = u[0][0] - outer.center
    out = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    upow = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    upow[0][0] = one
    for d_out in range(outer.degree_d + 1):
        for m in range(min(outer.order_n, ncap) + 1):
            g = outer.coeffs[m][d_out]
            if g == 0:
                continue
            for n in range(ncap + 1 - m):
                prow = upow[n]
                dest = out[n + m]
                for d in range(dcap + 1):
                    if prow[d] != 0:
                        dest[d] = dest[d] + g * prow[d]
        if d_out < outer.degree_d:
            upow = _table_mul(upow, u, ncap, dcap, z)
    return _freeze(out, inner.center, rat)


def lagrange_invert(sym: FormalSymbol) -> FormalSymbol:
    """Formal inverse: coefficients from powers of L = u/S, then the hbar shift.

    S is the symbol minus its value at the center; the j-th inverse coefficient
    is (1/j) times the degree-(j-1) part of L**j.  The inverse is a symbol in
    the new variable centered at the original leading value, and composing back
    gives the identity through all retained orders (exactly, in rational mode).
    """
    rat = sym.rational
    z = _zero(rat)
    one = _RAT(1) if rat else 1.0
    ncap, dcap = sym.order_n, sym.degree_d
    s01 = sym.coeffs[0][1] if dcap >= 1 else z
    if s01 == 0:
        raise NumericalError("NOT_INVERTIBLE", "vanishing linear coefficient at the center")

    # The substituted variable (I - I0) - c(hbar) carries a pure-hbar tail at
    # degree zero, so inverse-series coefficients up to j = N + D contribute
    # inside the (N, D) window; L is therefore expanded to degree N + D - 1.
    jmax = ncap + dcap
    dint = max(dcap, jmax - 1)

    # T = S/u  (S = sym with its center column removed), a unit in the ring
    t = [[(sym.coeffs[n][d + 1] if d + 1 <= dcap else z) for d in range(dint + 1)]
         for n in range(ncap + 1)]
    ell = _table_recip(t, ncap, dint, z, one)

    # alpha_j = (1/j) [L**j]_{j-1}: hbar-series extracted from powers of L
    alphas = [None]  # 1-based
    lpow = ell
    for j in range(1, jmax + 1):
        col = [lpow[n][j - 1] for n in range(ncap + 1)]
        inv_j = (one / _RAT(j)) if rat else 1.0 / j
        alphas.append([c * inv_j for c in col])
        if j < jmax:
            lpow = _table_mul(lpow, ell, ncap, dint, z)

    # v = (I - I0) - c(hbar), with c the hbar-tail of the value at the center
    v = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    v[0][1] = one
    for n in range(1, ncap + 1):
        v[n][0] = -sym.coeffs[n][0]

    out = [[z] * (dcap + 1) for _ in range(ncap + 1)]
    out[0][0] = sym.center
    vpow = v
    for j in range(1, jmax + 1):
        aj = alphas[j]
        for m in range(ncap + 1):
            if aj[m] == 0:
                continue
            for n in range(ncap + 1 - m):
                prow = vpow[n]
                dest = out[n + m]
                for d in range(dcap + 1):
                    if prow[d] != 0:
                        dest[d] = dest[d] + aj[m] * prow[d]
        if j < jmax:
            vpow = _table_mul(vpow, v, ncap, dcap, z)
    return _freeze(out, sym.constant_term(), rat)


def resum(sym: FormalSymbol, hbar: float, c_const: float, lam) -> complex | float:
    """Sum the first floor(1/(c*hbar)) + 1 terms at the point lam."""
    if hbar <= 0:
        raise NumericalError("BAD_HBAR", f"hbar = {hbar}")
    if c_const <= 0:
        raise NumericalError("BAD_RESUM_CONSTANT", f"C = {c_const}")
    if sym.growth_c is not None and c_const < sym.growth_c * math.e - 1e-12:
        raise NumericalError("BAD_RESUM_CONSTANT",
                             f"C = {c_const} below certificate {sym.growth_c} * e")
    cut = math.floor(1.0 / (c_const * hbar))
    if cut > sym.order_n:
        raise NumericalError("TRUNCATION_EXCEEDED",
                             f"needs {cut + 1} terms, symbol holds {sym.order_n + 1}")
    u = _to_float(lam) - _to_float(sym.center)
    total = 0.0
    for n in range(cut + 1):
        row = sym.row(n)
        poly = 0.0
        for d in range(len(row) - 1, -1, -1):
            poly = poly * u + _to_float(row[d])
        total += poly * hbar ** n
    return total


def growth_estimate(sym: FormalSymbol, disc_radius: float = 1.0) -> float:
    """Smallest C with sup|a_n| <= C**(n+1) n**n for every retained order."""
    if sym.order_n < 2:
        raise NumericalError("TOO_SHORT", "growth estimate needs hbar-order >= 2")
    best = 0.0
    for n in range(sym.order_n + 1):
        sup = coefficient_sup(sym, n, disc_radius)
        if sup == 0.0:
            continue
        nn = 1.0 if n == 0 else float(n) ** n
        best = max(best, (sup / nn) ** (1.0 / (n + 1)))
    return best


# ---------------------------------------------------------------------------
# formal pseudodifferential action on one-variable symbols


@dataclass(frozen=True)
class PdoSymbol:
    """Polynomial operator symbol: terms (hbar_order, deg_z, deg_zeta, coef)."""

    terms: tuple

    def max_dz(self) -> int:
        return max((t[1] for t in self.terms), default=0)


def pdo_symbol(terms) -> PdoSymbol:
    clean = tuple((int(n), int(dz), int(dzeta), c) for n, dz, dzeta, c in terms if c != 0)
    return PdoSymbol(terms=clean)


def _diff_rows(table, times: int, z):
    """d/du applied `times` times to every coefficient polynomial."""
    for _ in range(times):
        new = []
        for row in table:
            new.append([row[d + 1] * (d + 1) for d in range(len(row) - 1)] + [z])
        table = new
    return table


def apply_formal_pdo(q: PdoSymbol, sym: FormalSymbol, quantization: str = "left") -> FormalSymbol:
    """Apply the graded differential-operator sum of a polynomial operator symbol.

    Left quantization: each zeta**k factor acts as (hbar/i * d/dz)**k.  Weyl
    quantization is reduced to the left one through the mixed-derivative
    exponential series  sum_j (1/j!) (hbar/(2i))**j d_z**j d_zeta**j.
    """
    if quantization not in ("left", "weyl"):
        raise NumericalError("BAD_QUANTIZATION", quantization)
    if _to_float(sym.center) != 0.0:
        raise NumericalError("PDO_CENTER", "operator action requires a symbol centered at 0")
    terms = list(q.terms)
    if quantization == "weyl":
        converted = []
        for n, dz, dzeta, coef in terms:
            for j in range(min(dz, dzeta) + 1):
                fall = 1
                for t in range(j):
                    fall *= (dz - t) * (dzeta - t)
                factor = (0.5 / 1j) ** j / math.factorial(j) * fall
                converted.append((n + j, dz - j, dzeta - j, coef * factor))
        terms = converted

    work = _to_float_symbol(sym)
    ncap = work.order_n
    dcap = work.degree_d + max((t[1] for t in terms), default=0)
    out = [[0.0] * (dcap + 1) for _ in range(ncap + 1)]
    base = [list(r) + [0.0] * (dcap - work.degree_d) for r in work.coeffs]
    for n_q, dz, dzeta, coef in terms:
        scaled = complex(coef) * (-1j) ** dzeta
        if scaled.imag == 0:
            scaled = scaled.real
        dered = _diff_rows(base, dzeta, 0.0)
        shift_n = n_q + dzeta
        for n in range(ncap + 1 - shift_n):
            row = dered[n]
            dest = out[n + shift_n]
            for d in range(dcap + 1 - dz):
                val = row[d]
                if val != 0:
                    dest[d + dz] = dest[d + dz] + scaled * val
    return _freeze(out, 0.0, False)


# ---------------------------------------------------------------------------
# file format


def symbol_to_json(sym: FormalSymbol) -> str:
    def enc(x):
        if isinstance(x, complex):
            raise NumericalError("NOT_SERIALIZABLE", "complex coefficients have no file form")
        return str(x)

    doc = {
        "center": enc(sym.center),
        "N": sym.order_n,
        "D": sym.degree_d,
        "rational": sym.rational,
        "coeffs": [enc(c) for row in sym.coeffs for c in row],
    }
    if sym.growth_c is not None:
        doc["growth_c"] = sym.growth_c
    return json.dumps(doc, indent=2)


def symbol_from_json(text: str) -> FormalSymbol:
    doc = json.loads(text)
    try:
        n_order, degree = int(doc["N"]), int(doc["D"])
        flat = list(doc["coeffs"])
        rat = bool(doc.get("rational", True))
        center_s = doc["center"]
    except (KeyError, TypeError, ValueError) as exc:
        raise NumericalError("BAD_SYMBOL_FILE", f"malformed symbol file: {exc}") from exc
    if len(flat) != (n_order + 1) * (degree + 1):
        raise NumericalError("BAD_SYMBOL_FILE",
                             f"expected {(n_order + 1) * (degree + 1)} coefficients, got {len(flat)}")
    conv = rational if rat else (lambda s: float(Fraction(str(s))))
    center = conv(str(center_s))
    rows = []
    for n in range(n_order + 1):
        rows.append([conv(str(c)) for c in flat[n * (degree + 1):(n + 1) * (degree + 1)]])
    out = formal_symbol(rows, center=center, n_order=n_order, degree=degree)
    if "growth_c" in doc:
        out = out.with_growth(float(doc["growth_c"]))
    return out
