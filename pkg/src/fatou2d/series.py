"""Exact-coefficient truncated power series.

Three containers are provided:

``TruncPoly2``
    bivariate polynomials in (x, y) truncated at a total degree.
``FracSeries1``
    series ``sum c_m z**(-m/r)`` in a fractional power of ``1/z``.
``FracSeries2``
    series in ``t = w**(-1/r_w)`` whose coefficients are ``FracSeries1``
    in a second variable.

Coefficients are Python ``complex`` by default; ``mpmath.mpc`` values work
unchanged for the high-precision mode.  Zero coefficients are pruned only
when they are exactly zero.  Values are treated as immutable.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd

import numpy as np

from .errors import NonUnitLeadingTerm, TruncationUnderflow

__all__ = [
    "TruncPoly2",
    "FracSeries1",
    "FracSeries2",
    "poly_compose",
    "binomial",
    "as_scalar",
]


def binomial(alpha, m):
    """Generalized binomial coefficient C(alpha, m) as an exact Fraction."""
    alpha = Fraction(alpha)
    out = Fraction(1)
    for i in range(m):
        out = out * (alpha - i) / (i + 1)
    return out


def as_scalar(q, like=None):
    """Convert a rational ``q`` into the scalar field of ``like``."""
    q = Fraction(q)
    if like is not None and type(like).__module__.startswith("mpmath"):
        import mpmath

        return mpmath.mpf(q.numerator) / q.denominator
    return complex(q.numerator / q.denominator) if q.denominator != 1 else complex(q.numerator)


def _prune(d):
    return {k: c for k, c in d.items() if c != 0}


# ---------------------------------------------------------------------------
# bivariate polynomials
# ---------------------------------------------------------------------------


class TruncPoly2:
    """Polynomial in (x, y) keeping monomials of total degree <= ``trunc_order``."""

    __slots__ = ("coeffs", "trunc_order")

    def __init__(self, coeffs=None, trunc_order=8):
        if trunc_order < 0:
            raise ValueError("trunc_order must be nonnegative")
        coeffs = coeffs or {}
        self.coeffs = {
            (int(i), int(j)): c
            for (i, j), c in coeffs.items()
            if i + j <= trunc_order and c != 0
        }
        self.trunc_order = int(trunc_order)

    @classmethod
    def x(cls, trunc_order=8):
        return cls({(1, 0): 1 + 0j}, trunc_order)

    @classmethod
    def y(cls, trunc_order=8):
        return cls({(0, 1): 1 + 0j}, trunc_order)

    @classmethod
    def constant(cls, c, trunc_order=8):
        return cls({(0, 0): c}, trunc_order)

    # -- structure -------------------------------------------------------
    def degree(self):
        return max((i + j for i, j in self.coeffs), default=-1)

    def low_degree(self):
        return min((i + j for i, j in self.coeffs), default=None)

    def homogeneous(self, d):
        return TruncPoly2(
            {k: c for k, c in self.coeffs.items() if sum(k) == d}, self.trunc_order
        )

    def drop_below(self, d):
        """Keep only monomials of total degree >= d."""
        return TruncPoly2(
            {k: c for k, c in self.coeffs.items() if sum(k) >= d}, self.trunc_order
        )

    def truncate(self, order):
        return TruncPoly2(self.coeffs, min(order, self.trunc_order))

    def is_zero(self):
        return not self.coeffs

    def max_abs(self):
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def __getitem__(self, key):
        return self.coeffs.get(key, 0)

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TruncPoly2):
            return other
        return TruncPoly2.constant(other, self.trunc_order)

    def __add__(self, other):
        other = self._coerce(other)
        order = min(self.trunc_order, other.trunc_order)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return TruncPoly2(_prune(out), order)

    __radd__ = __add__

    def __neg__(self):
        return TruncPoly2({k: -c for k, c in self.coeffs.items()}, self.trunc_order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncPoly2):
            return TruncPoly2(
                {k: c * other for k, c in self.coeffs.items()}, self.trunc_order
            )
        order = min(self.trunc_order, other.trunc_order)
        out = {}
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                i, j = i1 + i2, j1 + j2
                if i + j <= order:
                    out[(i, j)] = out.get((i, j), 0) + c1 * c2
        return TruncPoly2(_prune(out), order)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = TruncPoly2.constant(1 + 0j, self.trunc_order)
        for _ in range(n):
            out = out * self
        return out

    def __call__(self, x, y):
        return sum(c * x**i * y**j for (i, j), c in self.coeffs.items())

    def __eq__(self, other):
        if not isinstance(other, TruncPoly2):
            return NotImplemented
        return self.coeffs == other.coeffs and self.trunc_order == other.trunc_order

    def allclose(self, other, tol):
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self[k] - other[k]) <= tol for k in keys)

    def __repr__(self):
        terms = " + ".join(f"({c})*x^{i}y^{j}" for (i, j), c in sorted(self.coeffs.items()))
        return f"TruncPoly2[{self.trunc_order}]({terms or '0'})"


def poly_compose(f, g, order):
    """Compose two maps ``f o g`` given as pairs of ``TruncPoly2``.

    Coefficients are exact through total degree ``order``.  ``g`` must fix the
    origin, otherwise truncated composition is not well defined.
    """
    available = min(p.trunc_order for p in (*f, *g))
    if order > available:
        raise TruncationUnderflow(
            f"requested order {order} exceeds available truncation {available}"
        )
    for comp in g:
        if comp[(0, 0)] != 0:
            raise ValueError("inner map must vanish at the origin")
    g1, g2 = (c.truncate(order) for c in g)
    one = TruncPoly2.constant(1 + 0j, order)
    maxdeg = max(p.degree() for p in f)
    pow1, pow2 = [one], [one]
    for _ in range(max(maxdeg, 0)):
        pow1.append(pow1[-1] * g1)
        pow2.append(pow2[-1] * g2)
    out = []
    for comp in f:
        acc = TruncPoly2({}, order)
        for (i, j), c in comp.coeffs.items():
            if i + j > order:
                continue
            acc = acc + (pow1[i] * pow2[j]) * c
        out.append(acc)
    return tuple(out)


# ---------------------------------------------------------------------------
# series in z**(-1/r)
# ---------------------------------------------------------------------------


def _lcm(a, b):
    return a * b // gcd(a, b)


class FracSeries1:
    """``sum_m c_m z**(-m/r)`` with ``m <= trunc_m`` (``None`` = no truncation).

    Untruncated series are used for data known to be polynomial in
    ``z**(-1/r)``; inverting them needs a finite ``trunc_m``.
    """

    __slots__ = ("base_root", "coeffs", "trunc_m")

    def __init__(self, coeffs=None, base_root=1, trunc_m=None):
        if base_root < 1:
            raise ValueError("base_root must be positive")
        coeffs = coeffs or {}
        if any(m < 0 for m in coeffs):
            raise ValueError("exponent numerators must be nonnegative")
        self.base_root = int(base_root)
        self.trunc_m = None if trunc_m is None else int(trunc_m)
        self.coeffs = {
            int(m): c
            for m, c in coeffs.items()
            if c != 0 and (trunc_m is None or m <= trunc_m)
        }

    @classmethod
    def constant(cls, c, base_root=1, trunc_m=None):
        return cls({0: c}, base_root, trunc_m)

    def rebase(self, root):
        """Re-express over ``z**(-1/root)``; ``root`` must be a multiple of base_root."""
        if root % self.base_root:
            raise ValueError("rebase target must be a multiple of the base root")
        f = root // self.base_root
        tm = None if self.trunc_m is None else self.trunc_m * f
        return FracSeries1({m * f: c for m, c in self.coeffs.items()}, root, tm)

    def _align(self, other):
        if not isinstance(other, FracSeries1):
            other = FracSeries1.constant(other, self.base_root, self.trunc_m)
        r = _lcm(self.base_root, other.base_root)
        a = self.rebase(r) if r != self.base_root else self
        b = other.rebase(r) if r != other.base_root else other
        tms = [t for t in (a.trunc_m, b.trunc_m) if t is not None]
        return a, b, r, (min(tms) if tms else None)

    def __getitem__(self, m):
        return self.coeffs.get(m, 0)

    def is_zero(self):
        return not self.coeffs

    def max_m(self):
        return max(self.coeffs, default=-1)

    def __add__(self, other):
        a, b, r, tm = self._align(other)
        out = dict(a.coeffs)
        for m, c in b.coeffs.items():
            out[m] = out.get(m, 0) + c
        return FracSeries1(_prune(out), r, tm)

    __radd__ = __add__

    def __neg__(self):
        return FracSeries1({m: -c for m, c in self.coeffs.items()}, self.base_root, self.trunc_m)

    def __sub__(self, other):
        a, b, r, tm = self._align(other)
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, FracSeries1):
            return FracSeries1(
                {m: c * other for m, c in self.coeffs.items()}, self.base_root, self.trunc_m
            )
        a, b, r, tm = self._align(other)
        out = {}
        for m1, c1 in a.coeffs.items():
            for m2, c2 in b.coeffs.items():
                m = m1 + m2
                if tm is None or m <= tm:
                    out[m] = out.get(m, 0) + c1 * c2
        return FracSeries1(_prune(out), r, tm)

    __rmul__ = __mul__

    def shift(self, p):
        """Multiply by ``z**(-p/r)`` (p >= 0)."""
        return FracSeries1(
            {m + p: c for m, c in self.coeffs.items()}, self.base_root, self.trunc_m
        )

    def _unit_check(self):
        c0 = self[0]
        if c0 != 1:
            raise NonUnitLeadingTerm(f"constant term is {c0!r}, expected 1")

    def fracpow(self, alpha):
        """``self**alpha`` by the binomial series; the constant term must be 1."""
        self._unit_check()
        alpha = Fraction(alpha)
        small = self - 1
        if small.is_zero():
            return FracSeries1.constant(self[0], self.base_root, self.trunc_m)
        if self.trunc_m is None:
            if alpha.denominator == 1 and alpha >= 0:
                return self ** int(alpha)
            raise TruncationUnderflow("infinite series needs a finite trunc_m")
        like = next(iter(self.coeffs.values()))
        out = FracSeries1.constant(as_scalar(1, like), self.base_root, self.trunc_m)
        term = FracSeries1.constant(as_scalar(1, like), self.base_root, self.trunc_m)
        for p in range(1, self.trunc_m + 1):
            term = term * small
            if term.is_zero():
                break
            out = out + term * as_scalar(binomial(alpha, p), like)
        return out

    def reciprocal(self):
        return self.fracpow(-1)

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = FracSeries1.constant(1 + 0j, self.base_root, self.trunc_m)
            for _ in range(n):
                out = out * self
            return out
        return self.fracpow(n)

    def coefficient_array(self, dtype=complex):
        """Dense coefficients indexed by m, for fast numeric evaluation."""
        n = self.max_m() + 1
        arr = np.zeros(max(n, 1), dtype=dtype)
        for m, c in self.coeffs.items():
            arr[m] = complex(c)
        return arr

    def __call__(self, z):
        """Evaluate at z (scalar or array), principal branch of z**(-1/r)."""
        z = np.asarray(z, dtype=complex)
        s = z ** (-1.0 / self.base_root)
        arr = self.coefficient_array()
        acc = np.zeros_like(s)
        for c in arr[::-1]:
            acc = acc * s + c
        return acc if acc.ndim else complex(acc)

    def allclose(self, other, tol):
        a, b, _, _ = self._align(other)
        keys = set(a.coeffs) | set(b.coeffs)
        return all(abs(a[k] - b[k]) <= tol for k in keys)

    def __eq__(self, other):
        if not isinstance(other, FracSeries1):
            return NotImplemented
        a, b, _, _ = self._align(other)
        return a.coeffs == b.coeffs

    def __repr__(self):
        terms = " + ".join(f"({c})z^(-{m}/{self.base_root})" for m, c in sorted(self.coeffs.items()))
        return f"FracSeries1({terms or '0'})"


# ---------------------------------------------------------------------------
# series in t = w**(-1/r_w) with FracSeries1 coefficients
# ---------------------------------------------------------------------------


class FracSeries2:
    """``sum_n a_n(z) * w**(-n/base_root_v)`` with ``n <= trunc_n``."""

    __slots__ = ("outer", "base_root_v", "trunc_n", "inner_root", "inner_trunc")

    def __init__(self, outer=None, base_root_v=1, trunc_n=4, inner_root=1, inner_trunc=None):
        self.base_root_v = int(base_root_v)
        self.trunc_n = int(trunc_n)
        self.inner_root = int(inner_root)
        self.inner_trunc = inner_trunc
        self.outer = {}
        for n, a in (outer or {}).items():
            if n < 0:
                raise ValueError("v-exponent numerators must be nonnegative")
            if n > trunc_n:
                continue
            if not isinstance(a, FracSeries1):
                a = FracSeries1.constant(a, self.inner_root, inner_trunc)
            if a.base_root != self.inner_root:
                a = a.rebase(self.inner_root)
            if not a.is_zero():
                self.outer[int(n)] = a

    def _like(self, outer, trunc_n=None):
        return FracSeries2(
            outer,
            self.base_root_v,
            self.trunc_n if trunc_n is None else trunc_n,
            self.inner_root,
            self.inner_trunc,
        )

    def _check(self, other):
        if not isinstance(other, FracSeries2):
            return self._like({0: FracSeries1.constant(other, self.inner_root, self.inner_trunc)})
        if other.base_root_v != self.base_root_v or other.inner_root != self.inner_root:
            raise ValueError("mismatched base roots")
        return other

    def __getitem__(self, n):
        return self.outer.get(n, FracSeries1({}, self.inner_root, self.inner_trunc))

    def is_zero(self):
        return not self.outer

    def __add__(self, other):
        other = self._check(other)
        out = dict(self.outer)
        for n, a in other.outer.items():
            out[n] = out[n] + a if n in out else a
        return self._like(out, min(self.trunc_n, other.trunc_n))

    __radd__ = __add__

    def __neg__(self):
        return self._like({n: -a for n, a in self.outer.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FracSeries1):
            return self._like({n: a * other for n, a in self.outer.items()})
        if not isinstance(other, FracSeries2):
            return self._like({n: a * other for n, a in self.outer.items()})
        other = self._check(other)
        tn = min(self.trunc_n, other.trunc_n)
        out = {}
        for n1, a1 in self.outer.items():
            for n2, a2 in other.outer.items():
                n = n1 + n2
                if n <= tn:
                    prod = a1 * a2
                    out[n] = out[n] + prod if n in out else prod
        return self._like(out, tn)

    __rmul__ = __mul__

    def shift(self, p):
        """Multiply by ``w**(-p/base_root_v)``."""
        return self._like({n + p: a for n, a in self.outer.items()})

    def fracpow(self, alpha, max_terms=64):
        """Binomial series of ``self**alpha``; constant term must be exactly 1."""
        c0 = self[0]
        if c0[0] != 1:
            raise NonUnitLeadingTerm(f"constant term is {c0[0]!r}, expected 1")
        alpha = Fraction(alpha)
        small = self - 1
        like = c0[0]
        one = self._like({0: FracSeries1.constant(as_scalar(1, like), self.inner_root, self.inner_trunc)})
        out, term = one, one
        for p in range(1, max_terms + 1):
            term = term * small
            if term.is_zero():
                return out
            out = out + term * as_scalar(binomial(alpha, p), like)
        raise TruncationUnderflow("binomial series did not terminate; set finite truncations")

    def reciprocal(self):
        return self.fracpow(-1)

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = self._like({0: FracSeries1.constant(1 + 0j, self.inner_root, self.inner_trunc)})
            for _ in range(n):
                out = out * self
            return out
        return self.fracpow(n)

    def __call__(self, z, w):
        z = np.asarray(z, dtype=complex)
        t = np.asarray(w, dtype=complex) ** (-1.0 / self.base_root_v)
        acc = 0
        for n, a in self.outer.items():
            acc = acc + a(z) * t**n
        return acc

    def __repr__(self):
        return "FracSeries2(" + ", ".join(f"t^{n}: {a!r}" for n, a in sorted(self.outer.items())) + ")"
