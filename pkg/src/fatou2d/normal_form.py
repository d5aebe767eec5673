"""Linear conjugation of a germ into the normal form

    f0(x, y) = (x (1 + x y R + y^(k-1)) + P,  y (1 + x y R + y^(k-1)) + x^k + Q)

with R homogeneous of degree k - 3 (zero when k <= 2) and P, Q of order
at least k + 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import NotTangentToIdentity, NotUniqueDirection
from .germ import (
    CharDirection,
    GermMap,
    _cluster_roots,
    check_hypothesis,
    order_of,
)
from .series import TruncPoly2, poly_compose

STRUCT_RTOL = 1e-10
TEMPLATE_RTOL = 1e-9


def linear_map(m, order):
    """The linear map with matrix m as a pair of TruncPoly2."""
    return (
        TruncPoly2({(1, 0): complex(m[0][0]), (0, 1): complex(m[0][1])}, order),
        TruncPoly2({(1, 0): complex(m[1][0]), (0, 1): complex(m[1][1])}, order),
    )


def conjugate(g: GermMap, m) -> GermMap:
    """Return m^-1 o g o m for an invertible 2x2 matrix m."""
    m = np.asarray(m, dtype=complex)
    order = g.trunc_order
    inner = poly_compose((g.comp1, g.comp2), linear_map(m, order), order)
    out = poly_compose(linear_map(np.linalg.inv(m), order), inner, order)
    return GermMap.from_polys(*out)


@dataclass
class LinearConj:
    move_dir: np.ndarray
    l_params: tuple
    choices: List[str] = field(default_factory=list)

    def __post_init__(self):
        a, c, d = self.l_params
        if a * d == 0:
            raise ValueError("l requires a*d != 0")

    @property
    def l_matrix(self):
        a, c, d = self.l_params
        return np.array([[a, 0], [c, d]], dtype=complex)

    @property
    def matrix(self):
        """L with f0 = L^-1 o g o L."""
        return np.asarray(self.move_dir, dtype=complex) @ self.l_matrix


@dataclass
class NormalGerm:
    base: GermMap
    k: int
    Rpoly: TruncPoly2
    Ppart: TruncPoly2
    Qpart: TruncPoly2
    conj: LinearConj

    @classmethod
    def from_template(cls, base: GermMap, conj=None):
        """Split a germ already in normal form (exactly) into its pieces."""
        k = order_of(base)
        Rpoly, Ppart, Qpart = _split(base, k)
        if conj is None:
            conj = LinearConj(np.eye(2, dtype=complex), (1 + 0j, 0j, 1 + 0j))
        return cls(base, k, Rpoly, Ppart, Qpart, conj)

    def template_residual(self):
        return _template_residual(self.base, self.k, self.Rpoly)


def move_direction_to_vertical(g: GermMap, d: CharDirection):
    """Conjugate so that d becomes [0:1]; returns (germ, matrix)."""
    v0, v1 = d.dir
    if v1 == 1 and v0 == 0:
        m = np.eye(2, dtype=complex)
        return g, m
    if v1 == 1:
        m = np.array([[1, v0], [0, 1]], dtype=complex)
    else:
        m = np.array([[0, 1], [1, v1]], dtype=complex)
    return conjugate(g, m), m


def extract_pk_structure(g: GermMap, k=None):
    """Return (a_0..a_{k-1}, b0) with P_k = (x S, y S + b0 x^k)."""
    if k is None:
        k = order_of(g)
    p1, p2 = g.homogeneous(k)
    a = [complex(p1[(k - j, j)]) for j in range(k + 1)]
    b = [complex(p2[(k - j, j)]) for j in range(k + 1)]
    scale = max(max(abs(z) for z in a + b), 1e-300)
    tol = STRUCT_RTOL * scale
    problems = []
    if abs(a[k]) > tol:
        problems.append("a_k != 0")
    if abs(b[k]) <= tol:
        problems.append("b_k == 0")
    if abs(b[0]) <= tol:
        problems.append("b_0 == 0")
    for j in range(1, k + 1):
        if abs(a[j - 1] - b[j]) > tol:
            problems.append(f"a_{j - 1} != b_{j}")
    if problems:
        raise NotUniqueDirection("P_k does not have the unique-direction form: " + ", ".join(problems))
    return a[:k], b[0]


def _principal_root(z, n):
    z = complex(z)
    if n == 1:
        return z
    return complex(np.exp(np.log(z) / n))


def solve_linear_params(a_list, b0, k):
    """Choose (a, c, d) normalizing P_k; returns ((a, c, d), choice log)."""
    a_list = [complex(z) for z in a_list]
    log = []
    d = _principal_root(1 / a_list[k - 1], k - 1)
    log.append(f"d = principal {k - 1}-th root of 1/a_(k-1)")
    a = _principal_root(d / b0, k)
    log.append(f"a = principal {k}-th root of d/b0")
    coeffs = [a_list[j] * a ** (k - 1 - j) for j in range(k)]  # ascending in c
    coeffs_t = np.trim_zeros(np.array(coeffs), "b")
    nz = 0
    while nz < len(coeffs_t) and coeffs_t[nz] == 0:
        nz += 1
    roots = [0j] * nz
    if len(coeffs_t) - nz > 1:
        roots += [complex(r) for r in np.roots(coeffs_t[nz:][::-1])]
    centers, mults, _ = _cluster_roots(roots)
    c = min(centers, key=lambda z: (round(abs(z), 12), np.angle(z)))
    log.append(f"c = minimal-magnitude root of sum_j a_j a^(k-1-j) c^j = 0 among {len(centers)} distinct")
    scale = max(abs(z) for z in coeffs)
    cond = [
        abs(b0 * a**k / d - 1),
        abs(a_list[k - 1] * d ** (k - 1) - 1),
        abs(sum(cf * c**j for j, cf in enumerate(coeffs))) / scale,
    ]
    if max(cond) > 1e-12 * 10:
        log.append(f"warning: normalization conditions residual {max(cond):.2e}")
    return (a, c, d), log


def _split(base: GermMap, k):
    p1k = base.comp1.homogeneous(k)
    Rc = {}
    for (i, j), c in p1k.coeffs.items():
        if (i, j) == (1, k - 1):
            continue
        if i < 2 or j < 1:
            raise NotUniqueDirection(f"degree-{k} part of component 1 has stray x^{i}y^{j}")
        Rc[(i - 2, j - 1)] = c
    Rpoly = TruncPoly2(Rc, max(k - 3, 0))
    if k <= 2 and not Rpoly.is_zero():
        raise NotUniqueDirection("R must vanish for k <= 2")
    Ppart = base.comp1.drop_below(k + 1)
    Qpart = base.comp2.drop_below(k + 1)
    return Rpoly, Ppart, Qpart


def _template(k, Rpoly, order):
    x, y = TruncPoly2.x(order), TruncPoly2.y(order)
    RR = TruncPoly2(Rpoly.coeffs, order)
    S = x * y * RR + y ** (k - 1)
    return x * S, y * S + x**k


def _template_residual(base, k, Rpoly):
    t1, t2 = _template(k, Rpoly, k)
    p1, p2 = base.homogeneous(k)
    return max(
        max((abs(p1[key] - t1[key]) for key in set(p1.coeffs) | set(t1.coeffs)), default=0.0),
        max((abs(p2[key] - t2[key]) for key in set(p2.coeffs) | set(t2.coeffs)), default=0.0),
    )


def normalize(g: GermMap) -> NormalGerm:
    rep = check_hypothesis(g)
    if not rep.passed:
        raise NotUniqueDirection("; ".join(rep.reasons))
    k = rep.k
    g1, m = move_direction_to_vertical(g, rep.direction)
    a_list, b0 = extract_pk_structure(g1, k)
    (a, c, d), choices = solve_linear_params(a_list, b0, k)
    conj = LinearConj(m, (a, c, d), choices)
    f0 = conjugate(g1, conj.l_matrix)
    Rpoly, _, _ = _split_loose(f0, k)
    resid = _template_residual(f0, k, Rpoly)
    if resid > TEMPLATE_RTOL * max(1.0, Rpoly.max_abs()):
        raise NotUniqueDirection(f"normal-form template residual {resid:.2e}")
    # store the degree-k part exactly in template form
    order = f0.trunc_order
    t1, t2 = _template(k, Rpoly, order)
    keep1 = f0.comp1.drop_below(k + 1) + TruncPoly2.x(order) + t1
    keep2 = f0.comp2.drop_below(k + 1) + TruncPoly2.y(order) + t2
    keep1 = keep1 + _low_terms(f0.comp1, k)
    keep2 = keep2 + _low_terms(f0.comp2, k)
    base = GermMap.from_polys(keep1, keep2)
    Rpoly, Ppart, Qpart = _split(base, k)
    return NormalGerm(base, k, Rpoly, Ppart, Qpart, conj)


def _low_terms(p, k):
    """Degree 2..k-1 terms; these vanish for a germ of order k but keep any noise visible."""
    return TruncPoly2({key: c for key, c in p.coeffs.items() if 2 <= sum(key) < k}, p.trunc_order)


def _split_loose(f0, k):
    """Like _split but reads R while ignoring stray degree-k monomials."""
    p1k = f0.comp1.homogeneous(k)
    Rc = {}
    for (i, j), c in p1k.coeffs.items():
        if i >= 2 and j >= 1:
            Rc[(i - 2, j - 1)] = c
    if k <= 2:
        Rc = {}
    return TruncPoly2(Rc, max(k - 3, 0)), None, None


def recompose(ng: NormalGerm) -> GermMap:
    """L o f0 o L^-1, which should reproduce the input germ."""
    return conjugate(ng.base, np.linalg.inv(ng.conj.matrix))
