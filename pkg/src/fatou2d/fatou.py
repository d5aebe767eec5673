"""Fatou coordinate omega, the second coordinate tau, and their orbit extensions.

Orbits are always iterated with the exact chart map (``_kernels``), never
with the truncated expansion.  Limits are taken over checkpoints
n = n_min, 2 n_min, ..., n_max with the doubling-Cauchy stopping rule.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .coords import (
    ChartConstants,
    ChartSystem,
    SectorParams,
    default_params,
    in_region_tw,
    in_region_uv,
    psi0,
)
from .correctors import CorrectorSet, QuadraturePolicy, solve_correctors
from .errors import InvarianceViolation, InverseRecoveryFailure, OutOfRegion
from .expansion import ExpansionPack, Limits, build_expansion
from .germ import GermMap
from .normal_form import NormalGerm, normalize

__all__ = [
    "OrbitPolicy",
    "FatouContext",
    "PointValues",
    "build_context",
    "w_of",
    "omega",
    "omega_tau",
    "tau",
    "tau_uv",
    "alpha_of",
    "v_from_omega",
    "extend_along_orbit",
    "check_injectivity",
    "orbit_bound_violations",
    "asymptotic_profile",
    "closure_shift",
    "closure_shift_limit",
    "eta_values",
    "eta_envelope_shape",
    "mu_envelope_shape",
    "sample_region_tw",
    "f3_violations",
    "write_orbit_csv",
]


@dataclass(frozen=True)
class OrbitPolicy:
    n_min: int = 64
    n_max: int = 2**20
    eps_tail: float = 1e-9
    n_entry: int = 10_000
    branch_tol: float = 1e-6
    escape_radius: float = 10.0

    def checkpoints(self):
        out = []
        n = self.n_min
        while n < self.n_max:
            out.append(n)
            n *= 2
        out.append(self.n_max)
        return out


@dataclass(frozen=True)
class FatouContext:
    ng: NormalGerm
    pack: ExpansionPack
    correctors: CorrectorSet
    params: SectorParams
    chart: ChartSystem
    policy: OrbitPolicy = OrbitPolicy()

    @property
    def k(self):
        return self.ng.k

    def with_policy(self, **changes):
        fields = {f: getattr(self.policy, f) for f in self.policy.__dataclass_fields__}
        fields.update(changes)
        return FatouContext(self.ng, self.pack, self.correctors, self.params, self.chart,
                            OrbitPolicy(**fields))

    def step(self, u, v):
        """One exact f1 step (vectorized)."""
        return self.chart.f1_step(u, v)

    def kernel_args(self, check_region=True):
        return self.chart.step_args() + self.params.kernel_args() + (check_region,)


def build_context(germ, params: Optional[SectorParams] = None, policy=OrbitPolicy(),
                  seed=0, closure=True, zero_phi0=False, quadrature=None,
                  limits=Limits()) -> FatouContext:
    """Normalize (if needed), expand, certify the region and set up the correctors."""
    ng = germ if isinstance(germ, NormalGerm) else normalize(germ)
    chart = ChartSystem(ng)
    if params is None:
        params = default_params(chart, seed=seed).params
    pack = build_expansion(ng, limits)
    corr = solve_correctors(pack, 0.75 * params.R, closure=closure,
                            policy=quadrature or QuadraturePolicy(), zero_phi0=zero_phi0)
    return FatouContext(ng, pack, corr, params, chart, policy)


# -- w and its evaluation at orbit points -------------------------------------------


def _w_minus_n(ctx: FatouContext, u, v_hi, v_lo, n, want_alpha=False):
    """(w - n) at (u, v_hi + v_lo), keeping the large v - n cancellation exact."""
    k = ctx.k
    v = v_hi + v_lo
    r = ctx.correctors.evaluate(u, want_alpha=want_alpha)
    t = np.exp(np.log(v) * (-1.0 / (k - 1)))
    corr = np.zeros_like(v)
    tp = np.ones_like(v)
    for j in range(k):
        corr = corr + r["phi"][j] * tp
        tp = tp * t
    out = (v_hi - n) + v_lo + v * corr
    return out, r


def w_of(ctx: FatouContext, u, v):
    """w = v (1 + sum_j phi_j(u) v^(-j/(k-1)))."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if not in_region_uv(u, v, ctx.params).all():
        raise OutOfRegion("w_of needs points of the (u, v) region")
    w, _ = _w_minus_n(ctx, u, v, np.zeros_like(v), 0)
    return w


# -- limits along orbits -----------------------------------------------------------


@dataclass
class PointValues:
    """Per-point results of the orbit limits (all arrays of the batch length)."""

    omega: np.ndarray
    omega_gap: np.ndarray
    omega_confident: np.ndarray
    omega_richardson: np.ndarray
    omega_tail: np.ndarray
    n_used: np.ndarray
    step_residual: np.ndarray
    tau: Optional[np.ndarray] = None
    tau_gap: Optional[np.ndarray] = None
    tau_confident: Optional[np.ndarray] = None
    u_end: Optional[np.ndarray] = None


def _cauchy_shape(k, reu, rev, m):
    """Tail bound shape of the Fatou-coordinate proof (constant C dropped)."""
    m = np.maximum(m, 1.0)
    a = 12 * k * (reu + np.log1p((m - 1) / rev) / 6) ** (-1.0 / k)
    b = 2 * k * reu ** ((2 * k - 1) / k) * rev ** (-1.0 / (k - 1)) * (1 + (m - 1) / (2 * rev)) ** (-1.0 / k)
    return a + b


def omega_tau(ctx: FatouContext, u, v, want_tau=True, check_start=True) -> PointValues:
    """omega(u, v) (and tau(u, v)) for a batch of region points."""
    u = np.atleast_1d(np.asarray(u, dtype=complex)).copy()
    v = np.atleast_1d(np.asarray(v, dtype=complex)).copy()
    M = u.shape[0]
    pol = ctx.policy
    k = ctx.k
    if check_start and M and not in_region_uv(u, v, ctx.params).all():
        raise OutOfRegion("omega needs starting points inside the (u, v) region")
    uh, ul = u.copy(), np.zeros(M, complex)
    vh, vl = v.copy(), np.zeros(M, complex)
    status = np.zeros(M, np.int64)
    cps = pol.checkpoints()
    res = PointValues(
        omega=np.full(M, np.nan + 0j), omega_gap=np.full(M, np.inf),
        omega_confident=np.zeros(M, bool), omega_richardson=np.full(M, np.nan + 0j),
        omega_tail=np.full(M, np.inf), n_used=np.zeros(M, np.int64),
        step_residual=np.full(M, np.nan),
        tau=np.full(M, np.nan + 0j) if want_tau else None,
        tau_gap=np.full(M, np.inf) if want_tau else None,
        tau_confident=np.zeros(M, bool) if want_tau else None,
        u_end=np.full(M, np.nan + 0j),
    )
    prev_w = np.full(M, np.nan + 0j)
    prev_t = np.full(M, np.nan + 0j)
    active = np.arange(M)
    n_done = 0
    args = ctx.kernel_args(True)
    for c in cps:
        if active.size == 0:
            break
        idx = active
        a_h, a_l, b_h, b_l = uh[idx].copy(), ul[idx].copy(), vh[idx].copy(), vl[idx].copy()
        st = status[idx].copy()
        K.orbit_advance(a_h, a_l, b_h, b_l, st, c - n_done, *args)
        if (st != K.OK).any():
            badi = idx[st != K.OK][0]
            raise InvarianceViolation(
                f"orbit of (u, v) = ({u[badi]!r}, {v[badi]!r}) left the region before n = {c}"
            )
        uh[idx], ul[idx], vh[idx], vl[idx] = a_h, a_l, b_h, b_l
        n_done = c
        un = a_h + a_l
        wn, r = _w_minus_n(ctx, un, b_h, b_l, c, want_alpha=want_tau)
        gap = np.abs(wn - prev_w[idx])
        done = gap < pol.eps_tail
        if want_tau:
            tn = un - np.log(wn + c) + r["alpha"]
            tgap = np.abs(tn - prev_t[idx])
            done = done & (tgap < pol.eps_tail)
        res.omega[idx] = wn
        res.n_used[idx] = c
        res.u_end[idx] = un
        with np.errstate(invalid="ignore"):
            res.omega_gap[idx] = gap
            if c > cps[0]:
                q = 2.0 ** (-1.0 / k)
                res.omega_richardson[idx] = (wn - q * prev_w[idx]) / (1 - q)
                shape_n = _cauchy_shape(k, u[idx].real, v[idx].real, c)
                shape_h = _cauchy_shape(k, u[idx].real, v[idx].real, c // 2)
                res.omega_tail[idx] = gap * shape_n / np.maximum(shape_h - shape_n, 1e-300)
        res.omega_confident[idx] = gap < pol.eps_tail
        if want_tau:
            res.tau[idx] = tn
            res.tau_gap[idx] = tgap
            res.tau_confident[idx] = tgap < pol.eps_tail
            prev_t[idx] = tn
        prev_w[idx] = wn
        active = idx[~done]
    # per-step residual of w at the last checkpoint, for diagnostics
    u1, v1 = ctx.step(uh + ul, vh + vl)
    w0, _ = _w_minus_n(ctx, uh + ul, vh, vl, 0)
    w1, _ = _w_minus_n(ctx, u1, v1, np.zeros(M, complex), 0)
    res.step_residual = np.abs(w1 - w0 - 1)
    return res


def omega(ctx: FatouContext, u, v) -> PointValues:
    return omega_tau(ctx, u, v, want_tau=False)


def tau_uv(ctx: FatouContext, u, v) -> PointValues:
    return omega_tau(ctx, u, v, want_tau=True)


def alpha_of(ctx: FatouContext, u):
    """alpha(u) = sum_{l=1}^k (-1)^l int_{u0}^u phi_0^l."""
    return ctx.correctors.alpha(u)


def _invert_w(ctx: FatouContext, u, W, iters=30):
    """Solve w(u, v) = W for v at fixed u (Newton; the phi_j(u) are constants)."""
    k = ctx.k
    r = ctx.correctors.evaluate(u)
    phi = r["phi"]
    v = W / (1 + phi[0])
    for _ in range(iters):
        t = np.exp(np.log(v) * (-1.0 / (k - 1)))
        f = v * (1 + phi[0]) - W
        df = 1 + phi[0]
        tp = t
        for j in range(1, k):
            e = 1 - j / (k - 1)
            f = f + phi[j] * v * tp
            df = df + phi[j] * e * tp
            tp = tp * t
        dv = f / df
        v = v - dv
        if np.all(np.abs(dv) <= 1e-15 * np.abs(v)):
            break
    return v


def v_from_omega(ctx: FatouContext, u, om, tol=1e-10, max_iter=6):
    """Recover v with omega(u, v) = om; raises InverseRecoveryFailure otherwise."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    om = np.atleast_1d(np.asarray(om, dtype=complex))
    eta = np.zeros_like(om)
    for _ in range(max_iter):
        v = _invert_w(ctx, u, om - eta)
        if not in_region_uv(u, v, ctx.params).all():
            raise InverseRecoveryFailure("omega value is not attained inside the (u, v) region")
        vals = omega(ctx, u, v)
        err = vals.omega - om
        if np.max(np.abs(err) / np.maximum(1, np.abs(om))) <= tol:
            return v
        w0, _ = _w_minus_n(ctx, u, v, np.zeros_like(v), 0)
        eta = vals.omega - w0
    raise InverseRecoveryFailure(f"secant recovery of v stalled (error {np.max(np.abs(err)):.2e})")


def tau(ctx: FatouContext, u, om):
    """tau(u, omega): recover v on the fibre, then take the orbit limit."""
    v = v_from_omega(ctx, u, om)
    return tau_uv(ctx, u, v).tau


# -- extension along orbits ----------------------------------------------------------


@dataclass
class ExtendResult:
    status: np.ndarray  # _kernels codes: ENTERED, NOT_DETECTED, SINGULAR, ESCAPED
    n_entry: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    omega_confident: np.ndarray

    @property
    def attracted(self):
        return self.status == K.ENTERED


def entry_points(ctx: FatouContext, x, y, n_entry=None):
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    c = ChartConstants(ctx.k)
    pol = ctx.policy
    n_entry = pol.n_entry if n_entry is None else int(n_entry)
    return K.entry_scan(
        x, y, n_entry, ctx.k, c.a, c.b, c.alpha, c.beta, ctx.chart.f1, ctx.chart.f2,
        *ctx.params.kernel_args(), pol.branch_tol, pol.escape_radius,
    )


def extend_along_orbit(ctx: FatouContext, x, y, n_entry=None) -> ExtendResult:
    """Pull omega and tau back along the germ orbit to arbitrary points."""
    status, nent, u, v = entry_points(ctx, x, y, n_entry)
    M = status.shape[0]
    tau_out = np.full(M, np.nan + 0j)
    om_out = np.full(M, np.nan + 0j)
    conf = np.zeros(M, bool)
    hit = status == K.ENTERED
    if hit.any():
        vals = tau_uv(ctx, u[hit], v[hit])
        tau_out[hit] = vals.tau
        om_out[hit] = vals.omega - nent[hit]
        conf[hit] = vals.omega_confident
    return ExtendResult(status, nent, tau_out, om_out, conf)


# -- sampled checks ----------------------------------------------------------------


@dataclass
class InjectivityReport:
    which: str
    pairs: int
    violations: int
    min_separation: float
    worst: list = field(default_factory=list)


def separation_violations(val_a, val_b, in_a, in_b, rel=1e-3, sep=1e-8):
    """Indices of pairs whose inputs differ by >= rel |in| but whose values nearly coincide."""
    eligible = np.abs(in_a - in_b) >= rel * np.abs(in_a)
    close = np.abs(val_a - val_b) < sep
    return np.flatnonzero(eligible & close), eligible


def check_injectivity(ctx: FatouContext, which="psi1", samples=1000, seed=0, n_max=4096):
    """Sample fibre pairs and look for coinciding values (psi1: omega on u-fibres, psi2: tau on omega-fibres)."""
    from .coords import sample_region_uv

    small = ctx.with_policy(n_max=n_max, eps_tail=0.0)
    rng = np.random.default_rng(seed)
    u, v = sample_region_uv(ctx.params, samples, seed=seed, u_span=8.0, v_span=100.0)
    if which == "psi1":
        fac = np.exp(rng.uniform(np.log(1.002), np.log(4.0), samples)) * np.exp(
            1j * rng.uniform(-0.5, 0.5, samples) * ctx.params.theta_v)
        v2 = np.abs(v) * fac
        keep = in_region_uv(u, v2, ctx.params)
        u, v, v2 = u[keep], v[keep], v2[keep]
        a = omega(small, u, v).omega
        b = omega(small, u, v2).omega
        bad, eligible = separation_violations(a, b, v, v2)
    elif which == "psi2":
        om = omega(small, u, v).omega
        fac = np.exp(rng.uniform(np.log(1.002), np.log(1.5), len(u)))
        u2 = u.real * fac + 1j * u.imag
        keep = in_region_uv(u2, v, ctx.params)
        u, v, u2, om = u[keep], v[keep], u2[keep], om[keep]
        try:
            v2 = v_from_omega(small, u2, om, tol=1e-9)
        except InverseRecoveryFailure:
            v2 = _invert_w(small, u2, om)
        keep = in_region_uv(u2, v2, ctx.params)
        a = tau_uv(small, u[keep], v[keep]).tau
        b = tau_uv(small, u2[keep], v2[keep]).tau
        bad, eligible = separation_violations(a, b, u[keep], u2[keep])
    else:
        raise ValueError("which must be 'psi1' or 'psi2'")
    seps = np.abs(a - b)[eligible]
    return InjectivityReport(
        which, int(eligible.sum()), len(bad),
        float(seps.min()) if seps.size else float("inf"),
        [int(i) for i in bad[:10]],
    )


def orbit_bound_violations(ctx: FatouContext, u, v, n=10_000):
    """Count orbit points breaking the Re-inequalities for u_n and v_n (and the modulus forms)."""
    counts = {"v_upper": 0, "v_lower": 0, "u_upper": 0, "u_lower": 0,
              "absv": 0, "absu": 0}
    for u0, v0 in zip(np.atleast_1d(u), np.atleast_1d(v)):
        us, vs = ctx.chart.trace(u0, v0, n)
        m = np.arange(len(us))[1:]
        us, vs = us[1:], vs[1:]
        lg = np.log1p(m / v0.real)
        counts["v_upper"] += int(np.sum(vs.real > v0.real + 1.5 * m))
        counts["v_lower"] += int(np.sum(vs.real < v0.real + 0.5 * m))
        counts["u_upper"] += int(np.sum(us.real > u0.real + 3 * lg))
        counts["u_lower"] += int(np.sum(us.real < u0.real + lg / 6))
        av = np.abs(vs)
        counts["absv"] += int(np.sum((av > 2 * abs(v0) + 3 * m) | (av < (abs(v0) + m) / 2)))
        au = np.abs(us)
        counts["absu"] += int(np.sum((au > 2 * abs(u0) + 6 * lg) | (au < abs(u0) / 2 + lg / 6)))
    return counts


def asymptotic_profile(ctx: FatouContext, u, v, ns):
    """(n, w_n / n, u_n / log n) at the requested n (increasing)."""
    ns = sorted(int(n) for n in ns)
    uh = np.array([complex(u)])
    ul = np.zeros(1, complex)
    vh = np.array([complex(v)])
    vl = np.zeros(1, complex)
    st = np.zeros(1, np.int64)
    out = []
    done = 0
    args = ctx.kernel_args(True)
    for n in ns:
        K.orbit_advance(uh, ul, vh, vl, st, n - done, *args)
        if st[0] != K.OK:
            raise InvarianceViolation(f"orbit left the region before n = {n}")
        done = n
        wn, _ = _w_minus_n(ctx, uh + ul, vh, vl, 0)
        un = complex((uh + ul)[0])
        out.append((n, complex(wn[0]) / n, un / math.log(n)))
    return out


def closure_shift(ctx: FatouContext, u):
    """I(u) = phi_{k-1}(u) without the closure term minus phi_{k-1}(u) with it.

    Since v t^(k-1) = 1, the plain w equals the closed w plus I(u).
    """
    k = ctx.k
    c = ctx.correctors
    plain = CorrectorSet(c.pack, c.u0, False, c.policy, c.zero_phi0)
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    return plain.evaluate(u)["phi"][k - 1] - c.evaluate(u)["phi"][k - 1]


def closure_shift_limit(ctx: FatouContext, U=1000.0):
    """I(infinity) by Richardson over U, 4U, 16U (error terms U^(-1/k), U^(-2/k))."""
    k = ctx.k
    Us = np.array([U, 4 * U, 16 * U], dtype=complex)
    vals = closure_shift(ctx, Us)
    A = np.column_stack([np.ones(3), Us.real ** (-1.0 / k), Us.real ** (-2.0 / k)])
    return complex(np.linalg.solve(A, vals)[0])


def eta_values(ctx: FatouContext, u, v, om, shift_limit=None):
    """eta = omega - w for the plain (closure-free) w, whose bound the proof supplies.

    The plain limit converges only logarithmically, so it is obtained from the
    closed one: omega_plain - w_plain = (omega - w) - (I(u) - I(infinity)).
    """
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    w, _ = _w_minus_n(ctx, u, v, np.zeros_like(v), 0)
    eta = np.asarray(om) - w
    if ctx.correctors.closure:
        if shift_limit is None:
            shift_limit = closure_shift_limit(ctx)
        eta = eta - (closure_shift(ctx, u) - shift_limit)
    return eta


def eta_envelope_shape(k, u, v):
    """12k(Re u - 1)^(-1/k) + 4k (Re u)^((2k-1)/k) (Re v)^(-1/(k-1)), constant dropped."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return 12 * k * (u.real - 1) ** (-1.0 / k) + 4 * k * u.real ** ((2 * k - 1) / k) * v.real ** (-1.0 / (k - 1))


def mu_envelope_shape(k, u, om):
    """4k (Re u)^((k+1)/k) (Re omega)^(-1/(k-1)) + 24k (Re u - 1)^(-1/k), constant dropped."""
    u = np.asarray(u, dtype=complex)
    om = np.asarray(om, dtype=complex)
    return 4 * k * u.real ** ((k + 1) / k) * om.real ** (-1.0 / (k - 1)) + 24 * k * (u.real - 1) ** (-1.0 / k)


def sample_region_tw(p: SectorParams, n, seed=0, w_span=1e4):
    """Quasi-random (tau_hat, omega) pairs of the stored-form region."""
    from scipy.stats import qmc

    k = p.k
    pw = k / ((k - 1) * (k + 1))
    m = max(int(math.ceil(math.log2(max(n, 2)))), 1)
    sob = qmc.Sobol(d=4, scramble=True, seed=seed)
    out_t, out_w = [], []
    total = 0
    while total < n:
        q = sob.random_base2(m)
        argt = (2 * q[:, 0] - 1) * p.theta * 0.999
        # |tau| must exceed R/cos(arg) and stay below delta |omega|^pw
        reta = p.R * (1 + 1e-9) * np.exp(q[:, 1] * math.log(4.0))
        tau = reta * (1 + 1j * np.tan(argt))
        wmin = (np.abs(tau) / p.delta) ** (1 / pw)
        aw = wmin * np.exp(q[:, 2] * math.log(w_span)) * (1 + 1e-9)
        argw = (2 * q[:, 3] - 1) * p.theta_v * 0.999
        w = aw * np.exp(1j * argw)
        tau_hat = tau - np.log(w)
        keep = in_region_tw(tau_hat, w, p)
        out_t.append(tau_hat[keep])
        out_w.append(w[keep])
        total += int(keep.sum())
    return np.concatenate(out_t)[:n], np.concatenate(out_w)[:n]


def f3_violations(p: SectorParams, n=10_000, seed=0):
    """Count sampled (tau_hat, omega) whose image (tau_hat, omega + 1) leaves the region."""
    th, w = sample_region_tw(p, n, seed)
    return int(np.sum(~in_region_tw(th, w + 1, p))), len(th)


def write_orbit_csv(ctx: FatouContext, u0, v0, n, path):
    """Orbit rows n, re_u, im_u, re_v, im_v, re_w, im_w, step_residual."""
    us, vs = ctx.chart.trace(complex(u0), complex(v0), int(n) + 1)
    ws, _ = _w_minus_n(ctx, us, vs, np.zeros_like(vs), 0)
    resid = np.abs(np.diff(ws) - 1)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "re_u", "im_u", "re_v", "im_v", "re_w", "im_w", "step_residual"])
        for i in range(min(int(n) + 1, len(us) - 1)):
            row = (us[i].real, us[i].imag, vs[i].real, vs[i].imag, ws[i].real, ws[i].imag, resid[i])
            wr.writerow([i] + [repr(float(c)) for c in row])
    return len(us) - 1
