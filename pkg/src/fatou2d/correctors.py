"""Corrector functions phi_j solving phi_j' + F_j phi_j = G_j along u0 -> u.

Each target u gets the straight segment from the real base point u0,
split into equal panels.  On a panel [a, b] the solution is advanced with
the integrating factor written relative to the panel start,

    phi(nu) = e^{-(A(nu) - A(a))} [ phi(a) + int_a^nu G e^{A - A(a)} ],

where A is the exact antiderivative of F_j (available in closed form since
g_0 is a polynomial in u^(-1/k)).  The inner integrals use Chebyshev-Lobatto
nodes and the spectral cumulative-integration matrix.  The same sweep
accumulates alpha_l(u) = int_{u0}^u phi_0^l.

Closure term
------------
With only the G_j written in the defining recursion, one step of w leaves
a residual of order phi_0'(u)/v, which makes w_n - n converge like
1/log n.  The order-t^(k-1) part of that residual is known exactly:

    E(u) = phi_0'(u) (1 + g_0(u) + X(u)) + phi_0''(u) / 2,

with X the exact t^(2k-2) coefficient of u1 - u beyond the closed-form h.
Subtracting E from G_{k-1} (``closure=True``, the default) removes it and
leaves an O(v^(-k/(k-1))) residual.  The resulting w differs from the plain
one by a function tending to a constant along orbits, so the Fatou
coordinate changes by an additive constant only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import QuadratureFailure
from .expansion import ExpansionPack

__all__ = ["QuadraturePolicy", "CorrectorSet", "solve_correctors"]


@dataclass(frozen=True)
class QuadraturePolicy:
    nodes: int = 32
    panel_length: float = 8.0
    tail_tol: float = 1e-12


def _cheb_matrices(n):
    """Lobatto nodes on [-1, 1] (ascending), values->coefficients map, cumulative integral map."""
    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    V = C.chebvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    Ic = np.zeros((n + 1, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        Ic[:, j] = C.chebint(e, lbnd=-1)
    Q = C.chebvander(x, n) @ Ic @ Vinv
    return x, Vinv, Q


@dataclass
class CorrectorSet:
    pack: ExpansionPack
    u0: float
    closure: bool = True
    policy: QuadraturePolicy = QuadraturePolicy()
    zero_phi0: bool = False
    _cheb: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self._cheb = _cheb_matrices(self.policy.nodes)
        k = self.pack.k
        g0 = self.pack.g_j[0]
        # antiderivative of 1 + g_0: nu + sum c_m nu^(1-m/k)/(1-m/k) (+ c_k log nu)
        self._g0_terms = [(m, complex(c)) for m, c in sorted(g0.coeffs.items())]
        self.e = [(k - 1 - j) / (k - 1) for j in range(k)]

    @property
    def k(self):
        return self.pack.k

    def _Phi(self, nu):
        k = self.k
        out = nu.copy()
        lg = np.log(nu)
        for m, c in self._g0_terms:
            if m == k:
                out = out + c * lg
            else:
                p = 1 - m / k
                out = out + c * np.exp(lg * p) / p
        return out

    # -- the sweep -------------------------------------------------------------
    def evaluate(self, u, want_alpha=False):
        """phi_j(u), phi_j'(u) for all j (arrays of shape (k, M)); alpha_l(u) if asked."""
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        M = u.shape[0]
        k = self.k
        pol = self.policy
        x, Vinv, Q = self._cheb
        n = len(x)
        seg = u - self.u0
        # every target gets its own panel count; sorting by it makes the
        # targets still in flight at panel p a prefix of the ordering
        counts = np.maximum(1, np.ceil(np.abs(seg) / pol.panel_length)).astype(np.int64)
        order = np.argsort(-counts, kind="stable")
        counts_o = counts[order]
        H = (seg / counts)[order]
        phi_a = np.zeros((k, M), dtype=complex)
        alpha = np.zeros((k + 1, M), dtype=complex)
        wlast = Q[-1]
        bad = np.zeros(M, dtype=bool)
        pack = self.pack
        P = int(counts_o[0]) if M else 0
        for p in range(P):
            m = int(np.sum(counts_o > p))
            Hm = H[:m]
            a = self.u0 + p * Hm
            nu = a[:, None] + (x[None, :] + 1) * (Hm[:, None] / 2)
            scale = Hm[:, None] / 2
            Phi_nu = self._Phi(nu)
            Phi_a = self._Phi(a.copy())
            s = pack.s_of(nu)
            g0 = pack.g_s(0, s)
            phis, dphis = [], []
            for j in range(k):
                G = -pack.g_s(j, s) if j > 0 else -g0
                for l in range(j):
                    G = G - (self.e[l] * phis[l] * pack.g_s(j - l, s) + dphis[l] * pack.uh_s(j - l - 1, s))
                if j == k - 1 and self.closure:
                    G = G - self._closure(s, g0, phis[0], dphis[0])
                F = self.e[j] * (1 + g0)
                if self.e[j] != 0:
                    E = np.exp(self.e[j] * (Phi_nu - Phi_a[:, None]))
                else:
                    E = np.ones_like(nu)
                integrand = G * E
                bad[:m] |= self._tail_bad(integrand, Vinv)
                cum = scale * (integrand @ Q.T)
                ph = (phi_a[j, :m][:, None] + cum) / E
                if j == 0 and self.zero_phi0:
                    ph = np.zeros_like(ph)
                    G = np.zeros_like(G)
                phis.append(ph)
                dphis.append(G - F * ph)
                phi_a[j, :m] = ph[:, -1]
            if want_alpha:
                pw = np.ones_like(nu)
                for l in range(1, k + 1):
                    pw = pw * phis[0]
                    alpha[l, :m] += scale[:, 0] * (pw @ wlast)
        inv = np.empty_like(order)
        inv[order] = np.arange(M)
        phi_a = phi_a[:, inv]
        alpha = alpha[:, inv]
        bad = bad[inv]
        if bad.any():
            raise QuadratureFailure(
                f"Chebyshev tail above tolerance for u = {u[bad][0]!r} ({int(bad.sum())} points)"
            )
        su = pack.s_of(u)
        g0u = pack.g_s(0, su)
        dphi = np.zeros_like(phi_a)
        # derivatives from the ODE at the targets themselves
        Gs = []
        for j in range(k):
            G = -pack.g_s(j, su)
            for l in range(j):
                G = G - (self.e[l] * phi_a[l] * pack.g_s(j - l, su) + dphi[l] * pack.uh_s(j - l - 1, su))
            if j == k - 1 and self.closure:
                G = G - self._closure(su, g0u, phi_a[0], dphi[0])
            if j == 0 and self.zero_phi0:
                G = np.zeros_like(G)
            Gs.append(G)
            dphi[j] = G - self.e[j] * (1 + g0u) * phi_a[j]
        out = {"phi": phi_a, "dphi": dphi, "G": np.array(Gs)}
        if want_alpha:
            out["alpha_l"] = alpha
            out["alpha"] = sum((-1) ** l * alpha[l] for l in range(1, k + 1))
        return out

    def _closure(self, s, g0, phi0, dphi0):
        pack = self.pack
        gp = pack.g_prime_s(0, s)
        # phi0'' = G0' - F0' phi0 - F0 phi0' with G0 = -g0, F0 = 1 + g0
        d2 = -gp - gp * phi0 - (1 + g0) * dphi0
        if self.zero_phi0:
            return np.zeros_like(s)
        return dphi0 * (1 + g0 + pack.du_extra_s(s)) + d2 / 2

    def _tail_bad(self, f, Vinv):
        c = f @ Vinv.T
        top = np.max(np.abs(c), axis=1)
        tail = np.max(np.abs(c[:, -3:]), axis=1)
        return tail > self.policy.tail_tol * np.maximum(top, 1e-300) + 1e-300

    # -- conveniences -----------------------------------------------------------
    def phi(self, j, u):
        r = self.evaluate(u)
        return r["phi"][j], r["dphi"][j]

    def F(self, j, u):
        return self.e[j] * (1 + self.pack.g(0, u))

    def G(self, j, u):
        return self.evaluate(u)["G"][j]

    def fd_derivative(self, u, rel_step=1e-3):
        """Five-point central difference of phi_j along the real direction (shape (k, M))."""
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        h = rel_step * np.abs(u)
        pts = np.concatenate([u - 2 * h, u - h, u + h, u + 2 * h])
        ph = self.evaluate(pts)["phi"].reshape(self.k, 4, -1)
        return (ph[:, 0] - 8 * ph[:, 1] + 8 * ph[:, 2] - ph[:, 3]) / (12 * h)

    def ode_residual(self, u, rel_step=1e-3):
        """|phi_j' + F_j phi_j - G_j| / (1 + |G_j|) with phi_j' by finite differences.

        The derivative comes from the quadrature values at nearby points, not
        from the equation itself, so this measures how well the sweep solves it.
        """
        r = self.evaluate(u)
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        d = self.fd_derivative(u, rel_step)
        out = []
        for j in range(self.k):
            res = d[j] + self.F(j, u) * r["phi"][j] - r["G"][j]
            out.append(np.abs(res) / (1 + np.abs(r["G"][j])))
        return np.array(out)

    def alpha(self, u):
        return self.evaluate(u, want_alpha=True)["alpha"]


def solve_correctors(pack: ExpansionPack, u0: float, closure=True, policy=None,
                     zero_phi0=False) -> CorrectorSet:
    """Set up phi_0..phi_{k-1} from the real base point u0."""
    if not np.isreal(u0) or u0 <= 0:
        raise ValueError("u0 must be a positive real number")
    return CorrectorSet(pack, float(u0), closure, policy or QuadraturePolicy(), zero_phi0)
