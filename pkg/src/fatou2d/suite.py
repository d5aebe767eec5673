"""Sampled invariant checks shared by ``verify`` and the acceptance tests.

Every check returns a ``CheckResult`` whose ``value`` is the worst residual
(or violation count) seen, so a certificate can record how close each
claim came to its tolerance rather than a bare yes/no.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coords import certify_params, in_region_uv, sample_region_uv
from .errors import Fatou2dError
from .fatou import (
    FatouContext,
    alpha_of,
    closure_shift_limit,
    eta_envelope_shape,
    eta_values,
    f3_violations,
    mu_envelope_shape,
    omega,
    orbit_bound_violations,
    tau_uv,
)

__all__ = [
    "CheckResult",
    "check_region_invariance",
    "check_orbit_bounds",
    "check_abel",
    "check_tau_invariance",
    "check_f3",
    "check_ode_residual",
    "check_eta_envelope",
    "check_mu_envelope",
    "fit_envelope",
    "abel_samples",
    "run_suite",
]

ABEL_TOL = 1e-8
TAU_TOL = 1e-6
ODE_TOL = 1e-9
ENVELOPE_FACTOR = 1.5


@dataclass
class CheckResult:
    name: str
    value: float
    passed: bool
    samples: int
    seconds: float = 0.0
    note: str = ""
    error: str = ""

    def lines(self):
        out = {f"{self.name}_max_residual": repr(float(self.value)),
               f"{self.name}_samples": str(self.samples),
               f"{self.name}_pass": "true" if self.passed else "false"}
        if self.error:
            out[f"{self.name}_error"] = self.error
        return out


def _timed(name, fn):
    t0 = time.perf_counter()
    try:
        res = fn()
    except Fatou2dError as exc:
        res = CheckResult(name, float("inf"), False, 0, error=f"{exc.tag}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def abel_samples(ctx: FatouContext, n, seed):
    """Region points with moderate |v| so that 1e-8 is meaningful in double precision."""
    return sample_region_uv(ctx.params, n, seed=seed, u_span=4.0, v_span=10.0)


def check_region_invariance(ctx: FatouContext, n=10_000, seed=0):
    def run():
        cert = certify_params(ctx.chart, ctx.params, n, seed)
        return CheckResult("region_invariance", cert.invariance_violations,
                           cert.invariance_violations == 0, cert.n_samples,
                           note=f"remainder margins v {cert.v_margin:.3g}, u {cert.u_margin:.3g}")
    return _timed("region_invariance", run)


def check_orbit_bounds(ctx: FatouContext, n=100, steps=10_000, seed=0):
    def run():
        u, v = sample_region_uv(ctx.params, n, seed=seed, u_span=4.0, v_span=10.0)
        counts = orbit_bound_violations(ctx, u, v, steps)
        re_bad = sum(counts[key] for key in ("v_upper", "v_lower", "u_upper", "u_lower"))
        return CheckResult("orbit_bounds", re_bad, re_bad == 0, len(u),
                           note=", ".join(f"{k}={c}" for k, c in counts.items()))
    return _timed("orbit_bounds", run)


def check_abel(ctx: FatouContext, n=100, seed=0):
    def run():
        u, v = abel_samples(ctx, n, seed)
        u1, v1 = ctx.step(u, v)
        keep = in_region_uv(u1, v1, ctx.params)
        a = omega(ctx, u[keep], v[keep])
        b = omega(ctx, u1[keep], v1[keep])
        res = np.abs(b.omega - a.omega - 1)
        worst = float(res.max()) if res.size else float("inf")
        conf = int(np.sum(a.omega_confident & b.omega_confident))
        return CheckResult("abel", worst, worst <= ABEL_TOL, int(keep.sum()),
                           note=f"{conf} of {int(keep.sum())} limits met eps_tail")
    return _timed("abel", run)


def check_tau_invariance(ctx: FatouContext, n=100, seed=0):
    def run():
        u, v = abel_samples(ctx, n, seed)
        u1, v1 = ctx.step(u, v)
        keep = in_region_uv(u1, v1, ctx.params)
        a = tau_uv(ctx, u[keep], v[keep])
        b = tau_uv(ctx, u1[keep], v1[keep])
        res = np.abs(b.tau - a.tau)
        worst = float(res.max()) if res.size else float("inf")
        return CheckResult("tau", worst, worst <= TAU_TOL, int(keep.sum()),
                           note=f"median tau doubling gap {np.median(a.tau_gap):.2e}")
    return _timed("tau", run)


def check_f3(ctx: FatouContext, n=10_000, seed=0):
    def run():
        bad, total = f3_violations(ctx.params, n, seed)
        return CheckResult("f3_invariance", bad, bad == 0, total)
    return _timed("f3_invariance", run)


def check_ode_residual(ctx: FatouContext, n=50, seed=0):
    def run():
        u, _ = sample_region_uv(ctx.params, n, seed=seed)
        res = ctx.correctors.ode_residual(u)
        worst = float(res.max())
        return CheckResult("ode", worst, worst <= ODE_TOL, len(u) * ctx.k)
    return _timed("ode", run)


def fit_envelope(values, shape):
    """Least-squares constant C for values ~ C * shape, and max(values / (C shape))."""
    values = np.abs(np.asarray(values))
    shape = np.asarray(shape)
    C = float(np.sum(values * shape) / np.sum(shape * shape))
    return C, float(np.max(values / (C * shape)))


def check_eta_envelope(ctx: FatouContext, n=200, seed=0):
    def run():
        u, v = abel_samples(ctx, n, seed)
        om = omega(ctx, u, v).omega
        eta = eta_values(ctx, u, v, om)
        C, excess = fit_envelope(eta, eta_envelope_shape(ctx.k, u, v))
        return CheckResult("eta_envelope", excess, excess <= ENVELOPE_FACTOR, len(u),
                           note=f"fitted C = {C:.4g}")
    return _timed("eta_envelope", run)


def check_mu_envelope(ctx: FatouContext, n=200, seed=0):
    def run():
        u, v = abel_samples(ctx, n, seed)
        vals = tau_uv(ctx, u, v)
        om = vals.omega
        if ctx.correctors.closure:
            om = om + closure_shift_limit(ctx)
        mu = vals.tau - u + np.log(om) - alpha_of(ctx, u)
        C, excess = fit_envelope(mu, mu_envelope_shape(ctx.k, u, om))
        return CheckResult("mu_envelope", excess, excess <= ENVELOPE_FACTOR, len(u),
                           note=f"fitted c = {C:.4g}")
    return _timed("mu_envelope", run)


def run_suite(ctx: FatouContext, cfg):
    """The checks that make up a verification certificate, in order.

    The region check comes first; when it fails the rest is skipped because
    every later check assumes an invariant region.
    """
    seed = cfg.seed
    first = check_region_invariance(ctx, cfg.samples_invariance, seed)
    if not first.passed:
        return [first]
    return [
        first,
        check_orbit_bounds(ctx, cfg.samples_bounds, cfg.bounds_steps, seed),
        check_ode_residual(ctx, 50, seed),
        check_abel(ctx, cfg.samples_abel, seed),
        check_tau_invariance(ctx, cfg.samples_tau, seed),
        check_f3(ctx, cfg.samples_f3, seed),
    ]
