"""Germs of (C^2, 0) tangent to the identity.

A germ is stored as the pair of its component polynomials, identity part
included.  The helpers here compute the order, the characteristic
directions with their eigenvalues, and the director of a direction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    DicriticalGerm,
    GermParseError,
    IdentityGerm,
    NotApplicable,
    NotTangentToIdentity,
)
from .series import TruncPoly2

LAMBDA_RTOL = 1e-10
CLUSTER_TOL = 1e-4
CLUSTER_TOL_WIDE = 0.05


class IllConditionedRoots(UserWarning):
    """Nearly coincident roots were merged by the clustering heuristic."""


@dataclass(frozen=True)
class GermMap:
    comp1: TruncPoly2
    comp2: TruncPoly2
    trunc_order: int

    def __post_init__(self):
        for n, comp in enumerate((self.comp1, self.comp2)):
            lin = {(1, 0): 0, (0, 1): 0}
            lin[(1, 0) if n == 0 else (0, 1)] = 1
            if comp[(0, 0)] != 0:
                raise NotTangentToIdentity("germ does not fix the origin")
            for key, want in lin.items():
                if comp[key] != want:
                    raise NotTangentToIdentity(
                        f"linear part of component {n + 1} is not the identity"
                    )

    @classmethod
    def from_parts(cls, parts1, parts2, trunc_order=None):
        """Build ``Id + (parts1, parts2)`` from dicts of nonlinear monomials."""
        deg = max([i + j for i, j in (*parts1, *parts2)] + [2])
        if trunc_order is None:
            trunc_order = max(deg, 6)
        c1 = {(1, 0): 1 + 0j}
        c2 = {(0, 1): 1 + 0j}
        c1.update({k: complex(c) for k, c in parts1.items()})
        c2.update({k: complex(c) for k, c in parts2.items()})
        return cls(TruncPoly2(c1, trunc_order), TruncPoly2(c2, trunc_order), trunc_order)

    @classmethod
    def from_polys(cls, p1, p2, tol=1e-12):
        """Wrap computed components, snapping a numerically-identity linear part."""
        order = min(p1.trunc_order, p2.trunc_order)
        c1, c2 = dict(p1.coeffs), dict(p2.coeffs)
        for comp, one, zero in ((c1, (1, 0), (0, 1)), (c2, (0, 1), (1, 0))):
            if abs(comp.get(one, 0) - 1) > tol or abs(comp.get(zero, 0)) > tol:
                raise NotTangentToIdentity("linear part is not the identity")
            if abs(comp.get((0, 0), 0)) > tol:
                raise NotTangentToIdentity("germ does not fix the origin")
            comp[one] = 1 + 0j
            comp.pop(zero, None)
            comp.pop((0, 0), None)
        return cls(TruncPoly2(c1, order), TruncPoly2(c2, order), order)

    def homogeneous(self, d):
        return self.comp1.homogeneous(d), self.comp2.homogeneous(d)

    def nonlinear(self):
        return self.comp1.drop_below(2), self.comp2.drop_below(2)

    def __call__(self, x, y):
        return self.comp1(x, y), self.comp2(x, y)

    def allclose(self, other, tol, upto=None):
        upto = self.trunc_order if upto is None else upto
        a = (self.comp1.truncate(upto), self.comp2.truncate(upto))
        b = (other.comp1.truncate(upto), other.comp2.truncate(upto))
        return a[0].allclose(b[0], tol) and a[1].allclose(b[1], tol)

    def max_coeff_diff(self, other, upto):
        out = 0.0
        for p, q in ((self.comp1, other.comp1), (self.comp2, other.comp2)):
            p, q = p.truncate(upto), q.truncate(upto)
            for key in set(p.coeffs) | set(q.coeffs):
                out = max(out, abs(p[key] - q[key]))
        return out


@dataclass
class CharDirection:
    dir: Tuple[complex, complex]
    lam: complex
    degenerate: bool
    director: Optional[complex] = None
    multiplicity: int = 1

    def chart(self):
        """Return ('x', x_d) for [x_d:1] or ('y', y_d) for [1:y_d]."""
        if self.dir[1] == 1:
            return "x", self.dir[0]
        return "y", self.dir[1]

    def __str__(self):
        v0, v1 = (_fmt_c(c) for c in self.dir)
        return f"[{v0}:{v1}]"


def _fmt_c(z, digits=6):
    z = complex(z)
    re = 0.0 if abs(z.real) < 10 ** -(digits + 2) else z.real
    im = 0.0 if abs(z.imag) < 10 ** -(digits + 2) else z.imag
    if im == 0:
        return f"{re:.{digits}g}"
    return f"{re:.{digits}g}{im:+.{digits}g}j"


def order_of(g: GermMap) -> int:
    for d in range(2, g.trunc_order + 1):
        p1, p2 = g.homogeneous(d)
        if not (p1.is_zero() and p2.is_zero()):
            return d
    raise IdentityGerm(f"no nonlinear terms through degree {g.trunc_order}")


# -- one-variable helpers ----------------------------------------------------


def _restrict(p: TruncPoly2, chart):
    """Coefficients (ascending) of p(x, 1) for chart 'x' or p(1, y) for chart 'y'."""
    d = p.degree()
    out = np.zeros(max(d, 0) + 1, dtype=complex)
    for (i, j), c in p.coeffs.items():
        out[i if chart == "x" else j] += c
    return out


def _polyval(c, z):
    return np.polynomial.polynomial.polyval(z, c)


def _polyder(c):
    return np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1, complex)


def _cluster_roots(roots, tol=CLUSTER_TOL):
    """Group numerically coincident roots; returns (centers, multiplicities, spread)."""
    groups = []
    for r in sorted(roots, key=lambda z: (abs(z), np.angle(z))):
        for grp in groups:
            c = np.mean(grp)
            if abs(r - c) <= tol * max(1.0, abs(c)):
                grp.append(r)
                break
        else:
            groups.append([r])
    centers = [complex(np.mean(grp)) for grp in groups]
    spread = max((max(abs(z - c) for z in grp) for grp, c in zip(groups, centers)), default=0.0)
    return centers, [len(grp) for grp in groups], spread


def _polish(c, z, m, iters=4):
    """Newton on the (m-1)-th derivative, where an m-fold root is simple."""
    p = np.asarray(c, dtype=complex)
    for _ in range(m - 1):
        p = _polyder(p)
    dp = _polyder(p)
    for _ in range(iters):
        den = _polyval(dp, z)
        if den == 0:
            break
        step = _polyval(p, z) / den
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return complex(z)


def _smear_radius(c, z, m, noise=1e-13):
    """Radius over which coefficient noise smears an m-fold root at z."""
    p = np.asarray(c, dtype=complex)
    size = float(np.sum(np.abs(p) * np.abs(z) ** np.arange(len(p))))
    dm = p
    for _ in range(m):
        dm = _polyder(dm)
    lead = abs(_polyval(dm, z)) / math.factorial(m)
    if lead == 0:
        return np.inf
    return (noise * size / lead) ** (1.0 / m)


def _chart_roots(hc, keep):
    """Distinct roots of an ascending coefficient array, with multiplicities.

    Roots are first grouped generously, then each group is accepted only if
    its spread is explained by coefficient noise at that multiplicity.
    """
    hc = np.trim_zeros(hc, "b")
    if len(hc) <= 1:
        return [], [], 0.0
    # strip exact zero roots first so numpy never perturbs them
    nz = 0
    while nz < len(hc) and hc[nz] == 0:
        nz += 1
    core = hc[nz:]
    rest = np.roots(core[::-1]) if len(core) > 1 else np.array([], complex)
    centers, mults, worst = [], [], 0.0
    for grp_c, grp_m, grp in _groups([complex(r) for r in rest], CLUSTER_TOL_WIDE):
        if grp_m > 1:
            z = _polish(core, grp_c, grp_m)
            rad = _smear_radius(core, z, grp_m)
            spread = max(abs(r - z) for r in grp)
            if spread <= 10 * rad:
                worst = max(worst, spread / (10 * rad))
                centers.append(z)
                mults.append(grp_m)
                continue
        centers.extend(grp)
        mults.extend([1] * len(grp))
    if nz:
        centers.append(0j)
        mults.append(nz)
    sel = [(c, m) for c, m in zip(centers, mults) if keep(c)]
    return [c for c, _ in sel], [m for _, m in sel], worst


def _groups(roots, tol):
    groups = []
    for r in sorted(roots, key=lambda z: (abs(z), np.angle(z))):
        for grp in groups:
            if abs(r - np.mean(grp)) <= tol * max(1.0, abs(np.mean(grp))):
                grp.append(r)
                break
        else:
            groups.append([r])
    return [(complex(np.mean(g)), len(g), g) for g in groups]


def characteristic_directions(g: GermMap, k: Optional[int] = None) -> List[CharDirection]:
    """All characteristic directions of g, with eigenvalues and multiplicities."""
    if k is None:
        k = order_of(g)
    p1, p2 = g.homogeneous(k)
    H = TruncPoly2.x(k + 1) * p2 - TruncPoly2.y(k + 1) * p1
    scale = max(p1.max_abs(), p2.max_abs())
    if H.max_abs() <= 1e-14 * scale:
        raise DicriticalGerm("x*P_k^2 - y*P_k^1 vanishes identically")
    out = []
    spreads = []
    xs, mx, sp = _chart_roots(_restrict(H, "x"), lambda z: abs(z) <= 1.0)
    spreads.append(sp)
    for x0, m in zip(xs, mx):
        lam = complex(p2(x0, 1.0))
        out.append(CharDirection((x0, 1 + 0j), lam, abs(lam) <= LAMBDA_RTOL * scale, None, m))
    ys, my, sp = _chart_roots(_restrict(H, "y"), lambda z: abs(z) < 1.0)
    spreads.append(sp)
    for y0, m in zip(ys, my):
        lam = complex(p1(1.0, y0))
        out.append(CharDirection((1 + 0j, y0), lam, abs(lam) <= LAMBDA_RTOL * scale, None, m))
    # directions sitting on |slot| == 1 boundaries can appear in both charts
    uniq = []
    for d in out:
        if any(_same_direction(d.dir, e.dir) for e in uniq):
            continue
        uniq.append(d)
    if max(spreads) > 0.5:
        # clusters that nearly touch the merge radius may be distinct roots
        warnings.warn(
            f"merged nearly coincident roots ({max(spreads):.2f} of merge radius)",
            IllConditionedRoots,
        )
    for d in uniq:
        if not d.degenerate:
            d.director = director_of(g, d, k)
    return uniq


def _same_direction(a, b, tol=1e-8):
    return abs(a[0] * b[1] - a[1] * b[0]) <= tol * max(1.0, abs(a[0]), abs(a[1]))


def director_of(g: GermMap, d: CharDirection, k: Optional[int] = None) -> complex:
    """g'(x_d) - 1 for the induced map of P_k on the projective line."""
    if d.degenerate:
        raise NotApplicable("director is defined only for non-degenerate directions")
    if k is None:
        k = order_of(g)
    p1, p2 = g.homogeneous(k)
    chart, z = d.chart()
    if chart == "x":
        num, den = _restrict(p1, "x"), _restrict(p2, "x")
    else:
        num, den = _restrict(p2, "y"), _restrict(p1, "y")
    dn, dd = _polyval(den, z), _polyval(num, z)
    deriv = (_polyval(_polyder(num), z) * dn - dd * _polyval(_polyder(den), z)) / dn**2
    return complex(deriv - 1)


def induced_chart_map(g: GermMap, d: CharDirection, k: Optional[int] = None):
    """The induced map of P_k in the affine chart containing d, as a callable."""
    if k is None:
        k = order_of(g)
    p1, p2 = g.homogeneous(k)
    chart, _ = d.chart()
    if chart == "x":
        return lambda z: p1(z, 1.0) / p2(z, 1.0)
    return lambda z: p2(1.0, z) / p1(1.0, z)


@dataclass
class HypothesisReport:
    passed: bool
    k: Optional[int] = None
    directions: List[CharDirection] = field(default_factory=list)
    reasons: List[str] = field(default_factory=list)

    @property
    def direction(self):
        return self.directions[0] if self.passed else None


def check_hypothesis(g: GermMap) -> HypothesisReport:
    """Unique characteristic direction, and that direction non-degenerate."""
    rep = HypothesisReport(False)
    try:
        rep.k = order_of(g)
        rep.directions = characteristic_directions(g, rep.k)
    except (IdentityGerm, DicriticalGerm) as exc:
        rep.reasons.append(f"{exc.tag}: {exc}")
        return rep
    if len(rep.directions) != 1:
        rep.reasons.append(f"{len(rep.directions)} characteristic directions (need exactly 1)")
    elif rep.directions[0].degenerate:
        rep.reasons.append("the characteristic direction is degenerate")
    else:
        rep.passed = True
    return rep


# -- text format -------------------------------------------------------------


def parse_germ(text: str, trunc_order: Optional[int] = None) -> GermMap:
    """Parse lines ``c i j re im``; the identity part is implicit."""
    parts = ({}, {})
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise GermParseError(f"expected 5 fields, got {len(fields)}", lineno)
        try:
            c, i, j = (int(f) for f in fields[:3])
        except ValueError:
            raise GermParseError("component and exponents must be integers", lineno) from None
        try:
            re, im = float(fields[3]), float(fields[4])
        except ValueError:
            raise GermParseError("coefficient parts must be real numbers", lineno) from None
        if c not in (1, 2):
            raise GermParseError(f"component must be 1 or 2, got {c}", lineno)
        if i < 0 or j < 0:
            raise GermParseError("exponents must be nonnegative", lineno)
        if i + j < 2:
            raise GermParseError(
                "constant and linear terms are implicit and must not appear", lineno
            )
        if (i, j) in parts[c - 1]:
            raise GermParseError(f"duplicate monomial x^{i} y^{j} in component {c}", lineno)
        parts[c - 1][(i, j)] = complex(re, im)
    return GermMap.from_parts(parts[0], parts[1], trunc_order)


def read_germ(path, trunc_order=None) -> GermMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_germ(fh.read(), trunc_order)


def format_germ(g: GermMap) -> str:
    lines = []
    for c, comp in ((1, g.comp1), (2, g.comp2)):
        for (i, j), v in sorted(comp.coeffs.items()):
            if i + j < 2:
                continue
            v = complex(v)
            lines.append(f"{c} {i} {j} {v.real!r} {v.imag!r}")
    return "\n".join(lines) + "\n"


def abate_1_11(trunc_order=None) -> GermMap:
    """The quadratic germ (x + xy, y + y^2 + x^2)."""
    return GermMap.from_parts({(1, 1): 1}, {(0, 2): 1, (2, 0): 1}, trunc_order)
