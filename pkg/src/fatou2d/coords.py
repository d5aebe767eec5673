"""The sector chart psi0, its inverse, the sector regions and their certification.

Branch convention
-----------------
On the sector region a/u and b/v sit next to the negative real axis, so a
literal principal root of a/u would jump across its cut there.  The roots
are realized instead as

    (a/u)**(1/k)     = alpha * u**(-1/k),     alpha = |a|**(1/k) e^{i pi/k}
    (b/v)**(1/(k-1)) = beta * v**(-1/(k-1)),  beta  = |b|**(1/(k-1)) e^{i pi/(k-1)}

with principal powers of u and v whenever Re u, Re v > 0.  In general the
roots use a logarithm whose cut lies on the negative imaginary axis; it is
continuous on the whole region, agrees with the principal root near 1 and
sends (u, v) = (a, b) to (x, y) = (1, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import _kernels as K
from .errors import CannotCertifyRegion, ChartSingular, ConfigError

__all__ = [
    "SectorParams",
    "ChartConstants",
    "ChartSystem",
    "psi0",
    "psi0_inverse",
    "in_region_uv",
    "in_region_u",
    "in_region_uw",
    "in_region_tw",
    "sample_region_uv",
    "certify_params",
    "default_params",
]


@dataclass(frozen=True)
class SectorParams:
    k: int
    R: float
    delta: float
    theta: float

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if not 0 < self.theta < math.pi / 4:
            raise ConfigError(f"theta must lie in (0, pi/4), got {self.theta}")
        if not 0 < self.delta <= 0.25:
            raise ConfigError(f"delta must lie in (0, 0.25], got {self.delta}")
        if not self.R >= 1:
            raise ConfigError(f"R must be >= 1, got {self.R}")

    @property
    def expo(self):
        """Exponent (k-1)(k+1)/k in the |u|-versus-|v| constraint."""
        return (self.k * self.k - 1) / self.k

    @property
    def theta_v(self):
        return (self.k - 1) * self.theta / self.k

    def kernel_args(self):
        return (self.R, self.delta, math.tan(self.theta), math.tan(self.theta_v), self.expo)


@dataclass(frozen=True)
class ChartConstants:
    k: int

    @property
    def a(self):
        return -(self.k - 1) / self.k

    @property
    def b(self):
        return -1.0 / (self.k - 1)

    @property
    def alpha(self):
        k = self.k
        return abs(self.a) ** (1.0 / k) * complex(math.cos(math.pi / k), math.sin(math.pi / k))

    @property
    def beta(self):
        k = self.k
        return abs(self.b) ** (1.0 / (k - 1)) * complex(
            math.cos(math.pi / (k - 1)), math.sin(math.pi / (k - 1))
        )


def psi0(x, y, k):
    """(u, v) = (a y^k / x^k, b / y^(k-1))."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.any(x * y == 0):
        raise ChartSingular("psi0 needs x*y != 0")
    c = ChartConstants(k)
    u = c.a * (y / x) ** k
    v = c.b / y ** (k - 1)
    return (u, v) if u.ndim else (complex(u), complex(v))


def cut_log(z):
    """Logarithm with arg in (-pi/2, 3pi/2]: the cut lies on the negative imaginary axis."""
    z = np.asarray(z, dtype=complex)
    ang = np.angle(z)
    ang = np.where(ang <= -np.pi / 2, ang + 2 * np.pi, ang)
    return np.log(np.abs(z)) + 1j * ang


def psi0_inverse(u, v, k):
    """Branch of psi0^-1 described in the module docstring."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if np.any(u == 0) or np.any(v == 0):
        raise ChartSingular("psi0_inverse needs u*v != 0")
    c = ChartConstants(k)
    y = np.exp(cut_log(c.b / v) / (k - 1))
    x = np.exp(cut_log(c.a / u) / k) * y
    return (x, y) if x.ndim else (complex(x), complex(y))


# -- regions -----------------------------------------------------------------


def in_region_u(u, p: SectorParams):
    u = np.asarray(u, dtype=complex)
    return (u.real > p.R) & (np.abs(np.angle(u)) < p.theta)


def in_region_uv(u, v, p: SectorParams):
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return (
        in_region_u(u, p)
        & (np.abs(u) ** p.expo < p.delta * np.abs(v))
        & (np.abs(np.angle(v)) < p.theta_v)
    )


def in_region_uw(u, w, p: SectorParams):
    """Same shape as the (u, v) region with the Fatou coordinate in place of v."""
    return in_region_uv(u, w, p)


def in_region_tw(tau_hat, w, p: SectorParams):
    """Membership of the stored pair (tau - log w, w)."""
    tau_hat = np.asarray(tau_hat, dtype=complex)
    w = np.asarray(w, dtype=complex)
    tau = tau_hat + np.log(w)
    pw = p.k / ((p.k - 1) * (p.k + 1))
    return (
        (tau.real > p.R)
        & (np.abs(tau) < p.delta * np.abs(w) ** pw)
        & (np.abs(np.angle(tau)) < p.theta)
        & (np.abs(np.angle(w)) < p.theta_v)
    )


def sample_region_uv(p: SectorParams, n, seed=0, u_span=64.0, v_span=1e4):
    """Low-discrepancy samples strictly inside the (u, v) region.

    Coordinates are (Arg u, log Re u, log |v| above its lower bound, Arg v);
    Re u ranges over [R, u_span R] and |v| over [vmin, v_span vmin].
    """
    m = max(int(math.ceil(math.log2(max(n, 2)))), 1)
    sob = qmc.Sobol(d=4, scramble=True, seed=seed)
    out_u, out_v = [], []
    total = 0
    while total < n:
        q = sob.random_base2(m)
        argu = (2 * q[:, 0] - 1) * p.theta * 0.999
        reu = p.R * np.exp(q[:, 1] * math.log(u_span)) * (1 + 1e-9)
        u = reu * (1 + 1j * np.tan(argu))
        vmin = np.abs(u) ** p.expo / p.delta
        av = vmin * np.exp(q[:, 2] * math.log(v_span)) * (1 + 1e-9)
        argv = (2 * q[:, 3] - 1) * p.theta_v * 0.999
        v = av * np.exp(1j * argv)
        keep = in_region_uv(u, v, p)
        out_u.append(u[keep])
        out_v.append(v[keep])
        total += int(keep.sum())
    return np.concatenate(out_u)[:n], np.concatenate(out_v)[:n]


# -- the conjugated map in the chart -----------------------------------------


def _triples(terms):
    if not terms:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.complex128))
    keys = sorted(terms)
    return (
        np.array([p for p, _ in keys], dtype=np.int64),
        np.array([q for _, q in keys], dtype=np.int64),
        np.array([complex(terms[key]) for key in keys], dtype=np.complex128),
    )


def _binoms(n):
    return np.array([float(math.comb(n, i)) for i in range(n + 1)] + [0.0], dtype=np.float64)


class ChartSystem:
    """Kernel-ready data of a normal-form germ: chart steps and germ steps."""

    def __init__(self, normal_germ):
        self.ng = normal_germ
        self.k = k = normal_germ.k
        self.const = ChartConstants(k)
        f0 = normal_germ.base
        ex, ey = {}, {}
        for (i, j), c in f0.comp1.coeffs.items():
            if i + j >= 2:
                ex[(i - 1, j)] = ex.get((i - 1, j), 0) + c
        for (i, j), c in f0.comp2.coeffs.items():
            if i + j >= 2:
                ey[(i, j - 1)] = ey.get((i, j - 1), 0) + c
        dd = dict(ey)
        for key, c in ex.items():
            dd[key] = dd.get(key, 0) - c
        dd = {key: c for key, c in dd.items() if c != 0}
        self.sx, self.sy, self.dd = _triples(ex), _triples(ey), _triples(dd)
        full1 = {key: c for key, c in f0.comp1.coeffs.items()}
        full2 = {key: c for key, c in f0.comp2.coeffs.items()}
        self.f1 = _triples(full1)
        self.f2 = _triples(full2)
        self.binom_k = _binoms(k)
        self.binom_km1 = _binoms(k - 1)

    def step_args(self):
        c = self.const
        return (self.k, c.alpha, c.beta, self.sx, self.sy, self.dd, self.binom_k, self.binom_km1)

    def f1_step(self, u, v):
        """One exact step of psi0 o f0 o psi0^-1 (vectorized)."""
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        v = np.atleast_1d(np.asarray(v, dtype=complex))
        return K.step_batch(u, v, *self.step_args())

    def f1_increments(self, u, v):
        """(u1 - u, v1 - v) computed directly, so tiny u-increments keep full precision."""
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        v = np.atleast_1d(np.asarray(v, dtype=complex))
        return K.increment_batch(u, v, *self.step_args())

    def f0_step(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        out = [K.germ_step(xi, yi, self.f1, self.f2) for xi, yi in zip(x, y)]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])

    def trace(self, u0, v0, nsteps):
        return K.orbit_trace(complex(u0), complex(v0), int(nsteps), *self.step_args())


# -- certification -------------------------------------------------------------


@dataclass
class Certificate:
    params: SectorParams
    passed: bool
    n_samples: int
    invariance_violations: int
    v_margin: float
    u_margin: float
    escalations: int = 0
    history: list = None


def certify_params(chart: ChartSystem, p: SectorParams, n_samples=10_000, seed=0,
                   margin=0.25):
    """Sample-check one-step invariance and the step remainder bounds.

    The remainders |v1 - v - 1| and |v (u1 - u) - 1| must stay below
    ``margin`` (half of what the orbit bounds need).
    """
    u, v = sample_region_uv(p, n_samples, seed=seed)
    du, dv = chart.f1_increments(u, v)
    u1, v1 = u + du, v + dv
    inside = in_region_uv(u1, v1, p) & np.isfinite(u1) & np.isfinite(v1)
    vm = np.abs(dv - 1)
    um = np.abs(v * du - 1)
    vmax = float(np.nanmax(vm)) if len(vm) else 0.0
    umax = float(np.nanmax(um)) if len(um) else 0.0
    ok = bool(inside.all()) and vmax <= margin and umax <= margin
    return Certificate(p, ok, len(u), int((~inside).sum()), vmax, umax)


def default_params(chart: ChartSystem, seed=0, n_samples=10_000, theta=math.pi / 8,
                   delta=0.05, R=32.0, max_escalations=20):
    """First (R, delta) in the doubling/halving ladder whose sample check passes."""
    history = []
    for esc in range(max_escalations + 1):
        p = SectorParams(chart.k, R, delta, theta)
        cert = certify_params(chart, p, n_samples, seed)
        history.append(cert)
        if cert.passed:
            cert.escalations = esc
            cert.history = history
            return cert
        R *= 2
        delta /= 2
    raise CannotCertifyRegion(
        f"no certified region after {max_escalations} escalations (last R={R / 2}, delta={delta * 2})"
    )
