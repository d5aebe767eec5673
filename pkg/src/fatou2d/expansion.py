"""Asymptotic data of the chart map, derived symbolically from a normal-form germ.

Everything is written in the two small variables

    s = u**(-1/k),        t = v**(-1/(k-1)),

so that x = alpha*beta*s*t and y = beta*t (see ``coords``).  Coefficients of
powers of t are exact polynomials in s, held as ``FracSeries1`` over the base
root k; the t-direction is a ``FracSeries2`` truncated at t**(2k-2), which is
the first order needed to isolate g_{k-1}.

With N = 1 + S + x^k/y + Q/y and S = x y R + y^(k-1) one has y1 = y N, so

    v1 = v * N**-(k-1),
    u1 = u * (N / (1 + S + P/x))**k .

The coefficients g_j of v1 - v - 1 come straight from the first identity.
For u1 the stored h follows the defining closed form

    h = k beta^k (s Qt - Pt / alpha),

which is exact up to O(1/v^2); the exact t^(2k-2) coefficient is kept
separately (``du_extra``) because the corrector closure needs it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import mpmath
import numpy as np

from .coords import ChartConstants
from .errors import FitDiverged, TruncationUnderflow
from .normal_form import NormalGerm
from .series import FracSeries1, FracSeries2

__all__ = [
    "Limits",
    "ExpansionPack",
    "build_expansion",
    "numeric_fit_gj",
    "eval_Fj",
    "write_coeff_csv",
    "chart_delta_mp",
]


@dataclass(frozen=True)
class Limits:
    """Truncation limits: ``trunc_n`` in powers of t, ``trunc_m`` in powers of s.

    ``trunc_n=None`` means the minimum 2k-2; ``trunc_m=None`` keeps the exact
    (finite) polynomials in s.
    """

    trunc_n: Optional[int] = None
    trunc_m: Optional[int] = None

    def resolve(self, k):
        tn = 2 * k - 2 if self.trunc_n is None else int(self.trunc_n)
        return tn, self.trunc_m


def _horner(coeffs, s):
    acc = np.zeros_like(s)
    for c in coeffs[::-1]:
        acc = acc * s + c
    return acc


@dataclass(frozen=True)
class ExpansionPack:
    k: int
    Rtilde: FracSeries1
    Ptilde: FracSeries2
    Qtilde: FracSeries2
    h_series: FracSeries2
    h_j: List[FracSeries1]
    g_j: List[FracSeries1]
    du_extra: FracSeries1
    limits: tuple = (None, None)
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    # -- numeric evaluation ------------------------------------------------
    def _arr(self, key, series):
        arr = self._arrays.get(key)
        if arr is None:
            arr = series.coefficient_array() if not series.is_zero() else np.zeros(1, complex)
            self._arrays[key] = arr
        return arr

    def s_of(self, u):
        u = np.asarray(u, dtype=complex)
        return np.exp(np.log(u) * (-1.0 / self.k))

    def _eval_s(self, key, series, s, deriv=False):
        c = self._arr(key, series)
        if not deriv:
            return _horner(c, s)
        # d/du s^m = -(m/k) s^(m+k)
        m = np.arange(len(c))
        return _horner(-(m / self.k) * c, s) * s**self.k

    def _eval(self, key, series, u, deriv=False):
        out = self._eval_s(key, series, self.s_of(u), deriv)
        return out if out.ndim else complex(out)

    # the *_s variants take s = u^(-1/k) directly, for hot loops
    def g_s(self, j, s):
        return self._eval_s(("g", j), self.g_j[j], s)

    def g_prime_s(self, j, s):
        return self._eval_s(("g", j), self.g_j[j], s, deriv=True)

    def uh_s(self, j, s):
        if j < 0 or j >= len(self.h_j) or self.h_j[j].is_zero():
            return np.zeros_like(s)
        return self._eval_s(("h", j), self.h_j[j], s) * s ** (-(self.k + 1))

    def du_extra_s(self, s):
        return self._eval_s(("x",), self.du_extra, s) * s ** (-(self.k + 1))

    def g(self, j, u):
        return self._eval(("g", j), self.g_j[j], u)

    def g_prime(self, j, u):
        return self._eval(("g", j), self.g_j[j], u, deriv=True)

    def h(self, j, u):
        return self._eval(("h", j), self.h_j[j], u)

    def uh(self, j, u):
        """u^((k+1)/k) h_j(u), the coefficient that multiplies phi' in G_j."""
        out = self.uh_s(j, self.s_of(u))
        return out if out.ndim else complex(out)

    def du_extra_value(self, u):
        """Exact t^(2k-2) coefficient of u1 - u beyond the closed-form h."""
        out = self.du_extra_s(self.s_of(u))
        return out if out.ndim else complex(out)

    def v_increment(self, u, v):
        """1 + sum_j g_j(u) t^j, the truncated prediction of v1 - v."""
        t = np.asarray(v, dtype=complex) ** (-1.0 / (self.k - 1))
        return 1 + sum(self.g(j, u) * t**j for j in range(self.k))


def _s_series(k, terms, trunc_m=None):
    return FracSeries1({m: c for m, c in terms.items() if c != 0}, k, trunc_m)


def _homog_at(poly, d, alpha):
    """P_d(alpha s, 1) as a dict m -> coefficient."""
    out = {}
    for (i, j), c in poly.coeffs.items():
        if i + j == d:
            out[i] = out.get(i, 0) + complex(c) * alpha**i
    return out


def _tseries(k, outer, tn, tm):
    return FracSeries2(outer, k - 1, tn, k, tm)


def build_expansion(ng: NormalGerm, limits: Limits = Limits()) -> ExpansionPack:
    k = ng.k
    tn, tm = limits.resolve(k)
    if tn < 2 * k - 2:
        raise TruncationUnderflow(
            f"t-truncation {tn} cannot isolate g_{k - 1}; need at least {2 * k - 2}"
        )
    c = ChartConstants(k)
    a, b, alpha, beta = c.a, c.b, c.alpha, c.beta
    S1 = lambda terms: _s_series(k, terms, tm)  # noqa: E731
    one = S1({0: 1 + 0j})
    s_var = S1({1: 1 + 0j})

    Rtilde = S1(_homog_at(ng.Rpoly, k - 3, alpha)) if k >= 3 else S1({})
    Pdeg = ng.Ppart.degree() if not ng.Ppart.is_zero() else 0
    Qdeg = ng.Qpart.degree() if not ng.Qpart.is_zero() else 0

    def tilde(part, top):
        outer = {}
        for d in range(k + 1, top + 1):
            n = d - k - 1
            if n > tn:
                break
            coef = S1(_homog_at(part, d, alpha))
            if not coef.is_zero():
                outer[n] = coef * beta**n
        return _tseries(k, outer, tn, tm)

    Ptilde = tilde(ng.Ppart, Pdeg)
    Qtilde = tilde(ng.Qpart, Qdeg)
    h_series = (Qtilde * s_var - Ptilde * (1 / alpha)) * (k * beta**k)
    h_j = [h_series[j] for j in range(k - 1)]

    # over-y quotients: A = x^k/y + Q/y, B = P/y, S = x y R + y^(k-1)
    def over_y(part, top):
        outer = {}
        for d in range(k + 1, top + 1):
            n = d - 1
            if n > tn:
                break
            coef = S1(_homog_at(part, d, alpha))
            if not coef.is_zero():
                outer[n] = coef * beta**n
        return _tseries(k, outer, tn, tm)

    S = _tseries(k, {k - 1: (one + s_var * Rtilde * alpha) * b}, tn, tm)
    A = _tseries(k, {k - 1: S1({k: a * b + 0j})}, tn, tm) + over_y(ng.Qpart, Qdeg)
    B = over_y(ng.Ppart, Pdeg)
    N = S + A + 1
    Y = N.fracpow(Fraction(-(k - 1))) - 1
    for n in range(k - 1):
        if not Y[n].is_zero():
            raise AssertionError(f"v-expansion has a t^{n} term; chart algebra is inconsistent")
    g_j = [Y[j + k - 1] for j in range(k)]
    g_j[0] = g_j[0] - 1

    inv1S = (S + 1).reciprocal()
    M = (N * inv1S) ** k
    HH = (M - 1) * s_var - M * B * inv1S * (k / alpha)
    du_extra = HH[2 * k - 2] - h_j[k - 2]

    return ExpansionPack(
        k=k,
        Rtilde=Rtilde,
        Ptilde=Ptilde,
        Qtilde=Qtilde,
        h_series=h_series,
        h_j=h_j,
        g_j=g_j,
        du_extra=du_extra,
        limits=(tn, tm),
    )


def eval_Fj(pack: ExpansionPack, j: int, u):
    """F_j(u) = ((k-1-j)/(k-1)) (1 + g_0(u))."""
    k = pack.k
    if not 0 <= j <= k - 1:
        raise ValueError(f"j must lie in 0..{k - 1}, got {j}")
    return (k - 1 - j) / (k - 1) * (1 + pack.g(0, u))


# -- independent numeric oracle ------------------------------------------------


def chart_delta_mp(ng: NormalGerm, u, v, dps=40):
    """v1 - v - 1 for one exact chart step, evaluated in mpmath."""
    k = ng.k
    with mpmath.workdps(dps):
        u = mpmath.mpc(u)
        v = mpmath.mpc(v)
        a = mpmath.mpf(-(k - 1)) / k
        b = mpmath.mpf(-1) / (k - 1)
        alpha = mpmath.root(-a, k) * mpmath.expjpi(mpmath.mpf(1) / k)
        beta = mpmath.root(-b, k - 1) * mpmath.expjpi(mpmath.mpf(1) / (k - 1))
        s = mpmath.power(u, mpmath.mpf(-1) / k)
        t = mpmath.power(v, mpmath.mpf(-1) / (k - 1))
        y = beta * t
        x = alpha * s * y

        def ev(poly):
            acc = mpmath.mpc(0)
            for (i, j), c in poly.coeffs.items():
                acc += mpmath.mpc(c) * x**i * y**j
            return acc

        y1 = ev(ng.base.comp2)
        v1 = b / y1 ** (k - 1)
        return v1 - v - 1


def numeric_fit_gj(ng: NormalGerm, u, jmax: int, v0=1e4, M=12, extra=3, dps=40):
    """Least-squares fit of v1 - v - 1 over a geometric v-ladder.

    Fits jmax + 1 + extra powers of t = v^(-1/(k-1)) and returns the first
    jmax + 1 coefficients (the extra columns absorb the truncation bias).
    """
    k = ng.k
    with mpmath.workdps(dps):
        vs = [mpmath.mpf(v0) * 2**m for m in range(M + 1)]
        deltas = [chart_delta_mp(ng, u, vm, dps) for vm in vs]
        ncol = min(jmax + 1 + extra, len(vs) - 1)
        A = mpmath.matrix(len(vs), ncol)
        rhs = mpmath.matrix(len(vs), 1)
        for r, vm in enumerate(vs):
            tt = mpmath.power(vm, mpmath.mpf(-1) / (k - 1))
            for j in range(ncol):
                A[r, j] = tt**j
            rhs[r] = deltas[r]
        coef, res = mpmath.qr_solve(A, rhs)
        scale = abs(deltas[0])
        if not res <= 1e-6 * max(scale, mpmath.mpf(10) ** (-dps // 2)):
            raise FitDiverged(f"fit residual {mpmath.nstr(res, 3)} vs |delta(v0)| {mpmath.nstr(scale, 3)}")
        return [complex(coef[j]) for j in range(jmax + 1)]


def write_coeff_csv(series_list, path):
    """CSV rows j, m, re, im for each term c u^(-m/k) of series_list[j]."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "m", "re", "im"])
        for j, ser in enumerate(series_list):
            for m in sorted(ser.coeffs):
                c = complex(ser.coeffs[m])
                w.writerow([j, m, repr(c.real), repr(c.imag)])
